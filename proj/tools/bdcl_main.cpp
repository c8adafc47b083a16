// bdcl_main.cpp -- command-line front end
//
// Subcommands:
//   generate   write a synthetic multi-view dataset (raw, unnormalized)
//   train      pretrain + clustering phases, then prediction and metrics
//   evaluate   score an existing checkpoint against a dataset manifest
//
// Every command writes resolved_config.json (all defaults expanded) into its
// output directory. `train` additionally saves the exact (normalized) data it
// trained on under <out>/dataset/, so `evaluate <out>/checkpoint.bin
// <out>/dataset/manifest.json` reproduces the training-time metrics;
// `evaluate` never re-normalizes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bdcl/dataset.hpp"
#include "bdcl/kmeans.hpp"
#include "bdcl/metrics.hpp"
#include "bdcl/run_config.hpp"
#include "bdcl/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw bdcl::IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw bdcl::IoError("write failed: " + path.string());
}

void write_resolved_config(const bdcl::RunConfig& cfg, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw bdcl::IoError("cannot create directory: " + dir.string());
  write_text(dir / "resolved_config.json", bdcl::run_config_to_json(cfg) + "\n");
}

json log_record_to_json(const bdcl::TrainLogRecord& r) {
  return json{{"phase", r.phase},
              {"epoch", r.epoch},
              {"l_ir", r.losses.l_ir},
              {"l_ic", r.losses.l_ic},
              {"l_cc", r.losses.l_cc},
              {"l_p", r.losses.l_p},
              {"l_fd", r.losses.l_fd},
              {"l_cd", r.losses.l_cd},
              {"total", r.losses.total},
              {"wall_seconds", r.wall_seconds}};
}

template <class S>
void write_coupling_csvs(const std::vector<bdcl::CouplingSet<S>>& coupling,
                         const fs::path& dir) {
  for (std::size_t v = 0; v < coupling.size(); ++v) {
    bdcl::detail::write_csv_matrix(
        dir / ("coupling_z_view" + std::to_string(v) + ".csv"), coupling[v].z_gram);
    bdcl::detail::write_csv_matrix(
        dir / ("coupling_p_view" + std::to_string(v) + ".csv"), coupling[v].p_gram);
  }
}

template <class S>
json metrics_json(const bdcl::MultiViewDataset<S>& ds,
                  const bdcl::PredictionResult<S>& pred,
                  const std::vector<bdcl::CouplingSet<S>>& coupling) {
  json j;
  j["n"] = ds.num_samples();
  j["k"] = ds.k;
  if (ds.labels) {
    bdcl::MetricsReport r = bdcl::evaluate_clustering(pred.labels, *ds.labels);
    j["acc"] = r.acc;
    j["nmi"] = r.nmi;
    j["pur"] = r.pur;
    j["matching"] = r.matching;
  }
  json cj = json::array();
  for (std::size_t v = 0; v < coupling.size(); ++v)
    cj.push_back(json{{"view", v},
                      {"z_offdiag_mean", coupling[v].z_offdiag_mean},
                      {"p_offdiag_mean", coupling[v].p_offdiag_mean}});
  j["coupling"] = std::move(cj);
  return j;
}

// ---- generate --------------------------------------------------------------

int cmd_generate(bdcl::RunConfig cfg) {
  if (!cfg.synthetic) cfg.synthetic = bdcl::SyntheticSpec{};  // defaults suffice
  const bdcl::SyntheticSpec& s = *cfg.synthetic;
  bdcl::MultiViewDataset<double> ds = bdcl::generate_synthetic<double>(
      s.n, s.k, s.view_dims, s.cluster_sep, s.noise, s.seed);
  fs::path dir = cfg.out_dir;
  write_resolved_config(cfg, dir);
  fs::path manifest = bdcl::save_dataset(ds, dir, s.seed);
  std::cout << "wrote " << manifest.string() << "\n"
            << "  n=" << ds.num_samples() << " k=" << ds.k << " views=";
  for (std::size_t v = 0; v < s.view_dims.size(); ++v)
    std::cout << (v ? "," : "") << s.view_dims[v];
  std::cout << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

template <class S>
bdcl::MultiViewDataset<S> obtain_dataset(const bdcl::RunConfig& cfg) {
  bdcl::MultiViewDataset<S> ds;
  if (cfg.manifest) {
    ds = bdcl::load_dataset<S>(*cfg.manifest);
  } else if (cfg.synthetic) {
    const bdcl::SyntheticSpec& s = *cfg.synthetic;
    ds = bdcl::generate_synthetic<S>(s.n, s.k, s.view_dims, s.cluster_sep,
                                     s.noise, s.seed);
  } else {
    throw bdcl::ConfigError("train: config needs dataset.manifest or dataset.synthetic");
  }
  return bdcl::normalize(ds, cfg.normalization);
}

template <class S>
int run_train(const bdcl::RunConfig& cfg) {
  const fs::path dir = cfg.out_dir;
  write_resolved_config(cfg, dir);
  bdcl::MultiViewDataset<S> ds = obtain_dataset<S>(cfg);
  bdcl::save_dataset(ds, dir / "dataset");

  std::vector<bdcl::ViewSpec> specs;
  for (const auto& x : ds.views)
    specs.push_back({x.cols(), cfg.hidden, cfg.embed_dim});
  bdcl::ModelState<S> model = bdcl::init_model<S>(
      specs, cfg.contrastive_dim, ds.k, cfg.train.seed);

  std::vector<bdcl::TrainLogRecord> logs = bdcl::pretrain(model, ds, cfg.train);
  for (const auto& r : logs)
    if (r.epoch % cfg.train.log_every == 0 || r.epoch == cfg.train.t1)
      std::printf("[pretrain] epoch %d/%d  l_ir=%.6f\n", r.epoch, cfg.train.t1,
                  r.losses.l_ir);
  std::vector<bdcl::TrainLogRecord> logs2 =
      bdcl::train_clustering(model, ds, cfg.train);
  for (const auto& r : logs2)
    if (r.epoch % cfg.train.log_every == 0 || r.epoch == cfg.train.t2)
      std::printf("[cluster] epoch %d/%d  total=%.6f l_ir=%.4f l_ic=%.4f "
                  "l_cc=%.4f l_p=%.4f l_fd=%.4f l_cd=%.4f\n",
                  r.epoch, cfg.train.t2, r.losses.total, r.losses.l_ir,
                  r.losses.l_ic, r.losses.l_cc, r.losses.l_p, r.losses.l_fd,
                  r.losses.l_cd);
  logs.insert(logs.end(), logs2.begin(), logs2.end());

  std::string jsonl;
  for (const auto& r : logs) jsonl += log_record_to_json(r).dump() + "\n";
  write_text(dir / "train_log.jsonl", jsonl);

  bdcl::TrainConfig saved = cfg.train;
  saved.checkpoint_path = "checkpoint.bin";
  bdcl::save_checkpoint(model, saved, dir / "checkpoint.bin");

  bdcl::PredictionResult<S> pred = bdcl::predict_assignments(model, ds);
  std::vector<bdcl::CouplingSet<S>> coupling = bdcl::coupling_matrices(model, ds);
  write_coupling_csvs(coupling, dir);
  json mj = metrics_json(ds, pred, coupling);
  write_text(dir / "metrics.json", mj.dump(2) + "\n");

  if (mj.contains("acc"))
    std::printf("metrics: acc=%.4f nmi=%.4f pur=%.4f\n", mj["acc"].get<double>(),
                mj["nmi"].get<double>(), mj["pur"].get<double>());
  std::cout << "outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_train(bdcl::RunConfig cfg, const std::vector<std::uint64_t>& seeds) {
  if (!seeds.empty()) {
    // independent sweep: each seed gets its own subdirectory
    const std::string base = cfg.out_dir;
    for (std::uint64_t s : seeds) {
      bdcl::RunConfig per = cfg;
      per.train.seed = s;
      per.out_dir = (fs::path(base) / ("seed_" + std::to_string(s))).string();
      std::cout << "=== seed " << s << " ===\n";
      int rc = per.precision == "f32" ? run_train<float>(per) : run_train<double>(per);
      if (rc != 0) return rc;
    }
    return 0;
  }
  return cfg.precision == "f32" ? run_train<float>(cfg) : run_train<double>(cfg);
}

// ---- evaluate --------------------------------------------------------------

template <class S>
int run_evaluate(const fs::path& ckpt_path, const fs::path& manifest_path,
                 const fs::path& out_dir) {
  bdcl::Checkpoint<S> ck = bdcl::load_checkpoint<S>(ckpt_path);
  bdcl::MultiViewDataset<S> ds = bdcl::load_dataset<S>(manifest_path);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw bdcl::IoError("cannot create directory: " + out_dir.string());

  bdcl::PredictionResult<S> pred = bdcl::predict_assignments(ck.model, ds);
  std::vector<bdcl::CouplingSet<S>> coupling =
      bdcl::coupling_matrices(ck.model, ds);
  write_coupling_csvs(coupling, out_dir);
  json mj = metrics_json(ds, pred, coupling);
  write_text(out_dir / "metrics.json", mj.dump(2) + "\n");

  if (mj.contains("acc"))
    std::printf("metrics: acc=%.4f nmi=%.4f pur=%.4f\n", mj["acc"].get<double>(),
                mj["nmi"].get<double>(), mj["pur"].get<double>());
  std::cout << "outputs in " << out_dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& manifest,
                 std::string out) {
  if (out.empty()) out = fs::path(ckpt).parent_path().string();
  if (out.empty()) out = ".";
  const int width = bdcl::checkpoint_scalar_width(ckpt);
  if (width == sizeof(float)) return run_evaluate<float>(ckpt, manifest, out);
  return run_evaluate<double>(ckpt, manifest, out);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string tok = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (tok.empty()) throw bdcl::ConfigError("--seeds: empty entry in '" + text + "'");
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw bdcl::ConfigError("--seeds: bad entry '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view clustering with decoupled representations"};
  app.require_subcommand(1);

  std::string config_path, out_flag, seeds_flag;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  bdcl::CliOverrides overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_flag, "output directory (overrides config)");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          seed_flag = v;
          seed_set = true;
        },
        "seed override");
  };

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "run both training phases");
  add_common(train);
  train->add_flag("--no-bd", overrides.no_bd, "disable both decoupling terms");
  train->add_flag("--no-fd", overrides.no_fd, "disable feature decoupling");
  train->add_flag("--no-cd", overrides.no_cd, "disable cluster decoupling");
  train->add_flag("--no-cc", overrides.no_cc, "disable cluster consistency");
  train->add_option("--seeds", seeds_flag, "comma-separated seed sweep");

  std::string eval_ckpt, eval_manifest;
  CLI::App* eval = app.add_subcommand("evaluate", "score a checkpoint (data used as-is)");
  eval->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("manifest", eval_manifest, "dataset manifest")->required();
  eval->add_option("--out", out_flag, "output directory (default: checkpoint's)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) return cmd_evaluate(eval_ckpt, eval_manifest, out_flag);

    bdcl::RunConfig cfg;
    if (!config_path.empty()) cfg = bdcl::load_run_config(config_path);
    if (seed_set) overrides.seed = seed_flag;
    if (!out_flag.empty()) overrides.out = out_flag;
    apply_overrides(cfg, overrides);

    if (*gen) {
      if (!cfg.synthetic) cfg.synthetic = bdcl::SyntheticSpec{};
      if (overrides.seed) cfg.synthetic->seed = *overrides.seed;
      return cmd_generate(cfg);
    }
    std::vector<std::uint64_t> seeds;
    if (!seeds_flag.empty()) seeds = parse_seed_list(seeds_flag);
    return cmd_train(cfg, seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
