// run_config.cpp -- strict JSON parsing and resolved-form serialization

#include "bdcl/run_config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace bdcl {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

const json* sub_object(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return nullptr;
  if (!j[key].is_object())
    throw ConfigError(std::string("config: '") + key + "' must be an object");
  return &j[key];
}

template <class T>
void read_field(const json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "' in " + where);
  }
}

void parse_dataset(const json& j, RunConfig& cfg) {
  reject_unknown_keys(j, {"manifest", "synthetic", "normalization"}, "dataset");
  if (j.contains("manifest") && !j["manifest"].is_null())
    cfg.manifest = j["manifest"].get<std::string>();
  if (const json* s = sub_object(j, "synthetic")) {
    reject_unknown_keys(
        *s, {"n", "k", "view_dims", "cluster_sep", "noise", "seed"},
        "dataset.synthetic");
    SyntheticSpec spec;
    read_field(*s, "n", spec.n, "dataset.synthetic");
    read_field(*s, "k", spec.k, "dataset.synthetic");
    read_field(*s, "view_dims", spec.view_dims, "dataset.synthetic");
    read_field(*s, "cluster_sep", spec.cluster_sep, "dataset.synthetic");
    read_field(*s, "noise", spec.noise, "dataset.synthetic");
    read_field(*s, "seed", spec.seed, "dataset.synthetic");
    cfg.synthetic = std::move(spec);
  }
  read_field(j, "normalization", cfg.normalization, "dataset");
}

void parse_model(const json& j, RunConfig& cfg) {
  reject_unknown_keys(j, {"hidden", "embed_dim", "contrastive_dim"}, "model");
  read_field(j, "hidden", cfg.hidden, "model");
  read_field(j, "embed_dim", cfg.embed_dim, "model");
  read_field(j, "contrastive_dim", cfg.contrastive_dim, "model");
}

void parse_train(const json& j, TrainConfig& t) {
  reject_unknown_keys(j,
                      {"t1", "t2", "batch_size", "tau", "sigma", "lambda1",
                       "lambda2", "lr", "beta1", "beta2", "eps", "seed",
                       "shuffle", "log_every", "masks"},
                      "train");
  read_field(j, "t1", t.t1, "train");
  read_field(j, "t2", t.t2, "train");
  read_field(j, "batch_size", t.batch_size, "train");
  read_field(j, "tau", t.weights.tau, "train");
  read_field(j, "sigma", t.weights.sigma, "train");
  read_field(j, "lambda1", t.weights.lambda1, "train");
  read_field(j, "lambda2", t.weights.lambda2, "train");
  read_field(j, "lr", t.adam.lr, "train");
  read_field(j, "beta1", t.adam.beta1, "train");
  read_field(j, "beta2", t.adam.beta2, "train");
  read_field(j, "eps", t.adam.eps, "train");
  read_field(j, "seed", t.seed, "train");
  read_field(j, "shuffle", t.shuffle, "train");
  read_field(j, "log_every", t.log_every, "train");
  if (const json* m = sub_object(j, "masks")) {
    reject_unknown_keys(*m, {"cc", "fd", "cd"}, "train.masks");
    read_field(*m, "cc", t.masks.cc, "train.masks");
    read_field(*m, "fd", t.masks.fd, "train.masks");
    read_field(*m, "cd", t.masks.cd, "train.masks");
  }
}

}  // namespace

RunConfig parse_run_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(j, {"dataset", "model", "train", "out", "precision"},
                      "top level");

  RunConfig cfg;
  if (const json* d = sub_object(j, "dataset")) parse_dataset(*d, cfg);
  if (const json* m = sub_object(j, "model")) parse_model(*m, cfg);
  if (const json* t = sub_object(j, "train")) parse_train(*t, cfg.train);
  read_field(j, "out", cfg.out_dir, "top level");
  read_field(j, "precision", cfg.precision, "top level");

  if (cfg.manifest && cfg.synthetic)
    throw ConfigError("config: set either dataset.manifest or dataset.synthetic, not both");
  if (cfg.normalization != "none" && cfg.normalization != "minmax" &&
      cfg.normalization != "zscore")
    throw ConfigError("config: normalization must be none|minmax|zscore");
  if (cfg.precision != "f64" && cfg.precision != "f32")
    throw ConfigError("config: precision must be f64|f32");
  if (cfg.embed_dim < 2) throw ConfigError("config: embed_dim must be >= 2");
  if (cfg.contrastive_dim < 1)
    throw ConfigError("config: contrastive_dim must be >= 1");
  if (!(cfg.contrastive_dim < cfg.embed_dim))
    throw ConfigError("config: contrastive_dim must be < embed_dim");
  for (Index h : cfg.hidden)
    if (h < 1) throw ConfigError("config: hidden sizes must be >= 1");
  if (cfg.out_dir.empty()) throw ConfigError("config: out must be non-empty");
  validate(cfg.train);
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    if (s.k < 2) throw ConfigError("config: dataset.synthetic.k must be >= 2");
    if (s.n < 2 * s.k)
      throw ConfigError("config: dataset.synthetic.n must be >= 2k");
    if (s.view_dims.empty())
      throw ConfigError("config: dataset.synthetic.view_dims must be non-empty");
    for (Index d : s.view_dims)
      if (d < 2)
        throw ConfigError("config: dataset.synthetic.view_dims entries must be >= 2");
    if (s.cluster_sep < 0 || s.noise < 0)
      throw ConfigError("config: dataset.synthetic cluster_sep/noise must be >= 0");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config_json(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  json dataset;
  dataset["manifest"] = cfg.manifest ? json(*cfg.manifest) : json(nullptr);
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    dataset["synthetic"] = {{"n", s.n},
                            {"k", s.k},
                            {"view_dims", s.view_dims},
                            {"cluster_sep", s.cluster_sep},
                            {"noise", s.noise},
                            {"seed", s.seed}};
  } else {
    dataset["synthetic"] = nullptr;
  }
  dataset["normalization"] = cfg.normalization;
  j["dataset"] = std::move(dataset);

  j["model"] = {{"hidden", cfg.hidden},
                {"embed_dim", cfg.embed_dim},
                {"contrastive_dim", cfg.contrastive_dim}};

  const TrainConfig& t = cfg.train;
  j["train"] = {{"t1", t.t1},
                {"t2", t.t2},
                {"batch_size", t.batch_size},
                {"tau", t.weights.tau},
                {"sigma", t.weights.sigma},
                {"lambda1", t.weights.lambda1},
                {"lambda2", t.weights.lambda2},
                {"lr", t.adam.lr},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"eps", t.adam.eps},
                {"seed", t.seed},
                {"shuffle", t.shuffle},
                {"log_every", t.log_every},
                {"masks", {{"cc", t.masks.cc}, {"fd", t.masks.fd}, {"cd", t.masks.cd}}}};

  j["out"] = cfg.out_dir;
  j["precision"] = cfg.precision;
  return j.dump(2);
}

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.out) cfg.out_dir = *o.out;
  if (o.no_bd) {
    cfg.train.masks.fd = 0;
    cfg.train.masks.cd = 0;
  }
  if (o.no_fd) cfg.train.masks.fd = 0;
  if (o.no_cd) cfg.train.masks.cd = 0;
  if (o.no_cc) cfg.train.masks.cc = 0;
}

}  // namespace bdcl
