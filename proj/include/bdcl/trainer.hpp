// trainer.hpp -- two-phase training, final prediction, and checkpoints
//
// Phase 1 (pretrain) fits each view's autoencoder on reconstruction alone;
// the heads are not touched. Phase 2 (cluster) trains everything on the full
// objective. Each phase starts from fresh optimizer moments. Given a fixed
// (seed, config, data), logs and final weights are bit-reproducible.
#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bdcl/adam.hpp"
#include "bdcl/dataset.hpp"
#include "bdcl/losses.hpp"
#include "bdcl/model.hpp"

namespace bdcl {

struct TrainConfig {
  int t1 = 200;              // pretrain epochs
  int t2 = 300;              // clustering epochs
  Index batch_size = 256;    // >= 2; a trailing singleton batch is dropped
  LossWeights weights;
  LossMasks masks;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool shuffle = true;
  int log_every = 1;         // epoch stride for progress callbacks
  std::string checkpoint_path = "checkpoint.bin";
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.t1 < 0 || cfg.t2 < 0)
    throw ConfigError("TrainConfig: epoch counts must be >= 0");
  if (cfg.batch_size < 2) throw ConfigError("TrainConfig: batch_size must be >= 2");
  if (!(cfg.weights.tau > 0)) throw ConfigError("TrainConfig: tau must be > 0");
  if (cfg.weights.sigma < 0) throw ConfigError("TrainConfig: sigma must be >= 0");
  if (cfg.log_every < 1) throw ConfigError("TrainConfig: log_every must be >= 1");
  if (!(cfg.adam.lr > 0)) throw ConfigError("TrainConfig: lr must be > 0");
}

struct TrainLogRecord {
  std::string phase;  // "pretrain" | "cluster"
  int epoch = 0;      // 1-based within the phase
  LossBreakdown losses;
  double wall_seconds = 0;
};

// ---- batching --------------------------------------------------------------

// Index chunks covering [0, n); shuffled when rng is given. A final chunk of
// size 1 is dropped so every emitted batch supports contrastive negatives.
inline std::vector<std::vector<Index>> make_batches(Index n, Index batch_size,
                                                    Rng* rng) {
  if (n < 2) throw ConfigError("make_batches: need at least 2 samples");
  if (batch_size < 2) throw ConfigError("make_batches: batch size must be >= 2");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  if (rng) order = rng->permutation(n);
  std::vector<std::vector<Index>> batches;
  for (Index start = 0; start < n; start += batch_size) {
    const Index stop = std::min(n, start + batch_size);
    if (stop - start == 1) break;
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

namespace detail {

template <class S>
std::vector<Mat<S>> gather_batch(const std::vector<Mat<S>>& views,
                                 const std::vector<Index>& idx) {
  std::vector<Mat<S>> out;
  out.reserve(views.size());
  for (const auto& x : views) {
    Mat<S> b(static_cast<Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) b.row(static_cast<Index>(r)) = x.row(idx[r]);
    out.push_back(std::move(b));
  }
  return out;
}

inline void check_finite_breakdown(const LossBreakdown& b, const std::string& where) {
  const std::pair<const char*, double> items[] = {
      {"l_ir", b.l_ir}, {"l_ic", b.l_ic}, {"l_cc", b.l_cc},  {"l_p", b.l_p},
      {"l_fd", b.l_fd}, {"l_cd", b.l_cd}, {"total", b.total}};
  for (const auto& [name, v] : items)
    if (!std::isfinite(v))
      throw NumericError(where + ": non-finite loss component " + name);
}

template <class S>
void check_data_compat(const ModelState<S>& model, const MultiViewDataset<S>& ds,
                       const char* where) {
  if (ds.num_views() != model.num_views())
    throw ConfigError(std::string(where) + ": dataset has " +
                      std::to_string(ds.num_views()) + " views, model expects " +
                      std::to_string(model.num_views()));
  for (Index v = 0; v < ds.num_views(); ++v)
    if (ds.views[static_cast<std::size_t>(v)].cols() != model.specs[static_cast<std::size_t>(v)].input_dim)
      throw ConfigError(std::string(where) + ": view " + std::to_string(v) +
                        " has dim " +
                        std::to_string(ds.views[static_cast<std::size_t>(v)].cols()) +
                        ", model expects " +
                        std::to_string(model.specs[static_cast<std::size_t>(v)].input_dim));
}

template <class S>
void apply_gradients(OptimizerState<S>& opt, TapeForward<S>& tf) {
  std::vector<const Mat<S>*> grads;
  grads.reserve(tf.param_vars.size());
  for (auto& pv : tf.param_vars) grads.push_back(&pv.grad());
  adam_step(opt, tf.param_ptrs, grads);
}

}  // namespace detail

// ---- phase 1: autoencoder pretraining --------------------------------------

template <class S>
std::vector<TrainLogRecord> pretrain(ModelState<S>& model,
                                     const MultiViewDataset<S>& ds,
                                     const TrainConfig& cfg) {
  validate(cfg);
  detail::check_data_compat(model, ds, "pretrain");
  std::vector<TrainLogRecord> logs;
  if (cfg.t1 == 0) return logs;

  std::vector<const Mat<S>*> param_view;
  model.for_each_autoencoder_param([&](Mat<S>& p) { param_view.push_back(&p); });
  OptimizerState<S> opt;
  opt.cfg = cfg.adam;
  opt.reset(param_view);

  const Index n = ds.num_samples();
  for (int epoch = 1; epoch <= cfg.t1; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(cfg.seed, 101, static_cast<std::uint64_t>(epoch)));
    auto batches = make_batches(n, cfg.batch_size, cfg.shuffle ? &shuffle_rng : nullptr);
    double ir_sum = 0;
    Index used = 0;
    for (const auto& idx : batches) {
      ad::Tape<S> tape;
      TapeForward<S> tf = forward_views_tape(tape, model, detail::gather_batch(ds.views, idx),
                                             S(0), 0, Phase::kPretrain);
      ad::Var<S> loss = recon_loss(tape, tf.x, tf.xhat);
      const double val = static_cast<double>(loss.value()(0, 0));
      if (!std::isfinite(val))
        throw NumericError("pretrain epoch " + std::to_string(epoch) +
                           ": non-finite loss component l_ir");
      tape.backward(loss);
      detail::apply_gradients(opt, tf);
      ir_sum += val * static_cast<double>(idx.size());
      used += static_cast<Index>(idx.size());
    }
    TrainLogRecord rec;
    rec.phase = "pretrain";
    rec.epoch = epoch;
    rec.losses.l_ir = ir_sum / static_cast<double>(used);
    rec.losses.total = rec.losses.l_ir;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    logs.push_back(std::move(rec));
  }
  return logs;
}

// ---- phase 2: full objective -----------------------------------------------

template <class S>
std::vector<TrainLogRecord> train_clustering(ModelState<S>& model,
                                             const MultiViewDataset<S>& ds,
                                             const TrainConfig& cfg) {
  validate(cfg);
  detail::check_data_compat(model, ds, "train_clustering");
  std::vector<TrainLogRecord> logs;
  if (cfg.t2 == 0) return logs;

  std::vector<const Mat<S>*> param_view;
  model.for_each_param([&](Mat<S>& p) { param_view.push_back(&p); });
  OptimizerState<S> opt;
  opt.cfg = cfg.adam;
  opt.reset(param_view);

  const Index n = ds.num_samples();
  for (int epoch = 1; epoch <= cfg.t2; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(cfg.seed, 201, static_cast<std::uint64_t>(epoch)));
    auto batches = make_batches(n, cfg.batch_size, cfg.shuffle ? &shuffle_rng : nullptr);
    LossBreakdown sums;
    Index used = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const std::uint64_t noise_seed =
          mix_seed(mix_seed(cfg.seed, 202, static_cast<std::uint64_t>(epoch)), bi);
      ad::Tape<S> tape;
      TapeForward<S> tf = forward_views_tape(tape, model, detail::gather_batch(ds.views, idx),
                                             static_cast<S>(cfg.weights.sigma),
                                             noise_seed, Phase::kClustering);
      TotalLoss<S> tl = total_loss(tape, tf, cfg.weights, cfg.masks);
      detail::check_finite_breakdown(tl.breakdown, "train_clustering epoch " +
                                                       std::to_string(epoch));
      tape.backward(tl.total);
      detail::apply_gradients(opt, tf);

      const double w = static_cast<double>(idx.size());
      sums.l_ir += tl.breakdown.l_ir * w;
      sums.l_ic += tl.breakdown.l_ic * w;
      sums.l_cc += tl.breakdown.l_cc * w;
      sums.l_p += tl.breakdown.l_p * w;
      sums.l_fd += tl.breakdown.l_fd * w;
      sums.l_cd += tl.breakdown.l_cd * w;
      sums.total += tl.breakdown.total * w;
      used += static_cast<Index>(idx.size());
    }
    TrainLogRecord rec;
    rec.phase = "cluster";
    rec.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(used);
    rec.losses = {sums.l_ir * inv, sums.l_ic * inv, sums.l_cc * inv,
                  sums.l_p * inv,  sums.l_fd * inv, sums.l_cd * inv,
                  sums.total * inv};
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    logs.push_back(std::move(rec));
  }
  return logs;
}

// ---- prediction ------------------------------------------------------------

template <class S>
struct PredictionResult {
  std::vector<int> labels;   // argmax of the view-mean assignment
  std::vector<Mat<S>> p;     // per-view soft assignments, N x K
};

// Labels from the view-mean soft assignment: argmax per row, exact ties
// resolved toward the lowest cluster index.
template <class S>
std::vector<int> assignment_labels(const std::vector<Mat<S>>& p) {
  if (p.empty()) throw ContractError("assignment_labels: no views");
  Mat<S> mean = Mat<S>::Zero(p.front().rows(), p.front().cols());
  for (const auto& pv : p) {
    require_same_shape(pv, mean, "assignment_labels");
    mean += pv;
  }
  mean /= static_cast<S>(p.size());
  std::vector<int> labels(static_cast<std::size_t>(mean.rows()));
  for (Index i = 0; i < mean.rows(); ++i) {
    int best = 0;  // strict > keeps the lowest index on exact ties
    for (Index k = 1; k < mean.cols(); ++k)
      if (mean(i, k) > mean(i, best)) best = static_cast<int>(k);
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

template <class S>
PredictionResult<S> predict_assignments(const ModelState<S>& model,
                                        const MultiViewDataset<S>& ds) {
  detail::check_data_compat(model, ds, "predict_assignments");
  ForwardBundle<S> fb = forward_views(model, ds.views, S(0), 0);
  PredictionResult<S> out;
  out.p = std::move(fb.p);
  out.labels = assignment_labels(out.p);
  return out;
}

// ---- checkpoints -----------------------------------------------------------
//
// Layout (little-endian):
//   magic "BDCLCKPT" | u32 version | u8 scalar width | config fields
//   | model header (views, dims, q, K) | weight matrices | u64 FNV-1a checksum
// The checksum covers every preceding byte; loading validates it before any
// state is constructed, so a failed load leaves nothing half-built.

namespace detail {

inline constexpr char kCkptMagic[8] = {'B', 'D', 'C', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCkptVersion = 1;

inline std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

struct ByteWriter {
  std::string buf;
  void raw(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
  template <class T>
  void num(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    raw(&v, sizeof v);
  }
  void str(const std::string& s) {
    num<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
};

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  std::size_t end = 0;
  void raw(void* out, std::size_t n) {
    if (pos + n > end) throw CheckpointCorruptError("checkpoint: truncated payload");
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  template <class T>
  T num() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = num<std::uint64_t>();
    if (n > end - pos) throw CheckpointCorruptError("checkpoint: truncated string");
    std::string s(static_cast<std::size_t>(n), '\0');
    raw(s.data(), s.size());
    return s;
  }
};

inline void write_config(ByteWriter& w, const TrainConfig& cfg) {
  w.num<std::int32_t>(cfg.t1);
  w.num<std::int32_t>(cfg.t2);
  w.num<std::int64_t>(cfg.batch_size);
  w.num<double>(cfg.weights.tau);
  w.num<double>(cfg.weights.sigma);
  w.num<double>(cfg.weights.lambda1);
  w.num<double>(cfg.weights.lambda2);
  w.num<double>(cfg.masks.cc);
  w.num<double>(cfg.masks.fd);
  w.num<double>(cfg.masks.cd);
  w.num<double>(cfg.adam.lr);
  w.num<double>(cfg.adam.beta1);
  w.num<double>(cfg.adam.beta2);
  w.num<double>(cfg.adam.eps);
  w.num<std::uint64_t>(cfg.seed);
  w.num<std::uint8_t>(cfg.shuffle ? 1 : 0);
  w.num<std::int32_t>(cfg.log_every);
  w.str(cfg.checkpoint_path);
}

inline TrainConfig read_config(ByteReader& r) {
  TrainConfig cfg;
  cfg.t1 = r.num<std::int32_t>();
  cfg.t2 = r.num<std::int32_t>();
  cfg.batch_size = r.num<std::int64_t>();
  cfg.weights.tau = r.num<double>();
  cfg.weights.sigma = r.num<double>();
  cfg.weights.lambda1 = r.num<double>();
  cfg.weights.lambda2 = r.num<double>();
  cfg.masks.cc = r.num<double>();
  cfg.masks.fd = r.num<double>();
  cfg.masks.cd = r.num<double>();
  cfg.adam.lr = r.num<double>();
  cfg.adam.beta1 = r.num<double>();
  cfg.adam.beta2 = r.num<double>();
  cfg.adam.eps = r.num<double>();
  cfg.seed = r.num<std::uint64_t>();
  cfg.shuffle = r.num<std::uint8_t>() != 0;
  cfg.log_every = r.num<std::int32_t>();
  cfg.checkpoint_path = r.str();
  return cfg;
}

}  // namespace detail

template <class S>
void save_checkpoint(const ModelState<S>& model, const TrainConfig& cfg,
                     const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(detail::kCkptMagic, sizeof detail::kCkptMagic);
  w.num<std::uint32_t>(detail::kCkptVersion);
  w.num<std::uint8_t>(static_cast<std::uint8_t>(sizeof(S)));
  detail::write_config(w, cfg);

  w.num<std::uint32_t>(static_cast<std::uint32_t>(model.views.size()));
  w.num<std::int64_t>(model.contrastive_dim);
  w.num<std::int64_t>(model.num_clusters);
  for (const auto& s : model.specs) {
    w.num<std::int64_t>(s.input_dim);
    w.num<std::uint32_t>(static_cast<std::uint32_t>(s.hidden.size()));
    for (Index h : s.hidden) w.num<std::int64_t>(h);
    w.num<std::int64_t>(s.embed_dim);
  }

  std::vector<const Mat<S>*> params;
  model.for_each_param([&](const Mat<S>& p) { params.push_back(&p); });
  w.num<std::uint64_t>(params.size());
  for (const Mat<S>* p : params) {
    w.num<std::uint64_t>(static_cast<std::uint64_t>(p->rows()));
    w.num<std::uint64_t>(static_cast<std::uint64_t>(p->cols()));
    w.raw(p->data(), sizeof(S) * static_cast<std::size_t>(p->size()));
  }

  w.num<std::uint64_t>(detail::fnv1a(w.buf.data(), w.buf.size()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

template <class S>
struct Checkpoint {
  ModelState<S> model;
  TrainConfig cfg;
};

template <class S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < sizeof detail::kCkptMagic)
    throw CheckpointCorruptError("checkpoint: file shorter than header");
  if (std::memcmp(buf.data(), detail::kCkptMagic, sizeof detail::kCkptMagic) != 0)
    throw CheckpointVersionError("checkpoint: unrecognized format tag");
  if (buf.size() < sizeof detail::kCkptMagic + sizeof(std::uint32_t) + 8)
    throw CheckpointCorruptError("checkpoint: file shorter than header");

  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  detail::ByteReader r{buf, sizeof detail::kCkptMagic, buf.size() - 8};
  const auto version = r.num<std::uint32_t>();
  if (version != detail::kCkptVersion)
    throw CheckpointVersionError("checkpoint: version " + std::to_string(version) +
                                 ", expected " + std::to_string(detail::kCkptVersion));
  if (detail::fnv1a(buf.data(), buf.size() - 8) != stored)
    throw CheckpointCorruptError("checkpoint: checksum mismatch");

  const auto scalar_width = r.num<std::uint8_t>();
  if (scalar_width != sizeof(S))
    throw CheckpointVersionError("checkpoint: scalar width " +
                                 std::to_string(int(scalar_width)) + ", expected " +
                                 std::to_string(sizeof(S)));

  Checkpoint<S> ck;
  ck.cfg = detail::read_config(r);

  const auto num_views = r.num<std::uint32_t>();
  const auto q = static_cast<Index>(r.num<std::int64_t>());
  const auto k = static_cast<Index>(r.num<std::int64_t>());
  std::vector<ViewSpec> specs;
  for (std::uint32_t v = 0; v < num_views; ++v) {
    ViewSpec s;
    s.input_dim = static_cast<Index>(r.num<std::int64_t>());
    const auto nh = r.num<std::uint32_t>();
    for (std::uint32_t h = 0; h < nh; ++h)
      s.hidden.push_back(static_cast<Index>(r.num<std::int64_t>()));
    s.embed_dim = static_cast<Index>(r.num<std::int64_t>());
    specs.push_back(std::move(s));
  }
  try {
    ck.model = init_model<S>(specs, q, k, 0);
  } catch (const ConfigError& e) {
    throw CheckpointCorruptError(std::string("checkpoint: implausible header: ") +
                                 e.what());
  }

  std::vector<Mat<S>*> params;
  ck.model.for_each_param([&](Mat<S>& p) { params.push_back(&p); });
  const auto count = r.num<std::uint64_t>();
  if (count != params.size())
    throw CheckpointCorruptError("checkpoint: expected " +
                                 std::to_string(params.size()) + " matrices, found " +
                                 std::to_string(count));
  for (Mat<S>* p : params) {
    const auto rows = static_cast<Index>(r.num<std::uint64_t>());
    const auto cols = static_cast<Index>(r.num<std::uint64_t>());
    if (rows != p->rows() || cols != p->cols())
      throw CheckpointCorruptError("checkpoint: matrix shape " + std::to_string(rows) +
                                   "x" + std::to_string(cols) + " does not match model");
    r.raw(p->data(), sizeof(S) * static_cast<std::size_t>(p->size()));
  }
  if (r.pos != r.end)
    throw CheckpointCorruptError("checkpoint: trailing bytes after payload");
  return ck;
}

// Reads only the fixed header to report the stored scalar width (bytes).
// Full validation still happens in load_checkpoint.
inline int checkpoint_scalar_width(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char header[sizeof detail::kCkptMagic + sizeof(std::uint32_t) + 1];
  in.read(header, sizeof header);
  if (in.gcount() != static_cast<std::streamsize>(sizeof header))
    throw CheckpointCorruptError("checkpoint: file shorter than header");
  if (std::memcmp(header, detail::kCkptMagic, sizeof detail::kCkptMagic) != 0)
    throw CheckpointVersionError("checkpoint: unrecognized format tag");
  return static_cast<unsigned char>(header[sizeof header - 1]);
}

}  // namespace bdcl
