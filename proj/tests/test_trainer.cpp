// Two-phase training loop, batching, prediction, and checkpoints.
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "bdcl/trainer.hpp"
#include "support.hpp"

using bdcl::Index;
using bdcl::Mat;
using bdcl::ModelState;
using bdcl::MultiViewDataset;
using bdcl::TrainConfig;
using bdcl::TrainLogRecord;
using bdcl::ViewSpec;
namespace fs = std::filesystem;
using testsupport::rows;
using testsupport::same;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("bdcl_trainer_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// small two-view blobs plus a matching model
struct Setup {
  MultiViewDataset<double> ds;
  ModelState<double> model;
};

Setup small_setup(std::uint64_t seed) {
  Setup s{bdcl::generate_synthetic<double>(48, 3, {6, 5}, 4.0, 0.8, seed),
          bdcl::init_model<double>({{6, {12}, 8}, {5, {12}, 8}}, 4, 3, seed + 1)};
  s.ds = bdcl::normalize(s.ds, "minmax");
  return s;
}

TrainConfig quick_cfg() {
  TrainConfig cfg;
  cfg.t1 = 2;
  cfg.t2 = 3;
  cfg.batch_size = 16;
  cfg.seed = 5;
  return cfg;
}

template <class S, class Fn>
std::vector<Mat<S>> snapshot(const ModelState<S>& m, Fn&& each) {
  std::vector<Mat<S>> out;
  each(m, [&](const Mat<S>& p) { out.push_back(p); });
  return out;
}

std::vector<Mat<double>> all_params(const ModelState<double>& m) {
  return snapshot<double>(m, [](const ModelState<double>& mm, auto&& f) {
    mm.for_each_param(f);
  });
}
std::vector<Mat<double>> head_params(const ModelState<double>& m) {
  return snapshot<double>(m, [](const ModelState<double>& mm, auto&& f) {
    mm.for_each_head_param(f);
  });
}
std::vector<Mat<double>> ae_params(const ModelState<double>& m) {
  return snapshot<double>(m, [](const ModelState<double>& mm, auto&& f) {
    mm.for_each_autoencoder_param(f);
  });
}

bool all_same(const std::vector<Mat<double>>& a,
              const std::vector<Mat<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i])) return false;
  return true;
}

bool logs_identical(const std::vector<TrainLogRecord>& a,
                    const std::vector<TrainLogRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    if (x.phase != y.phase || x.epoch != y.epoch) return false;
    if (x.losses.l_ir != y.losses.l_ir || x.losses.l_ic != y.losses.l_ic ||
        x.losses.l_cc != y.losses.l_cc || x.losses.l_p != y.losses.l_p ||
        x.losses.l_fd != y.losses.l_fd || x.losses.l_cd != y.losses.l_cd ||
        x.losses.total != y.losses.total)
      return false;
  }
  return true;
}

}  // namespace

// ---- batching --------------------------------------------------------------

TEST_CASE("batches: cover every sample once, short tail kept") {
  auto batches = bdcl::make_batches(10, 4, nullptr);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::set<Index> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 10);
}

TEST_CASE("batches: a trailing singleton is dropped") {
  auto batches = bdcl::make_batches(9, 4, nullptr);
  REQUIRE(batches.size() == 2);
  for (const auto& b : batches) CHECK(b.size() >= 2);
  std::set<Index> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 8);  // one sample skipped this epoch
}

TEST_CASE("batches: shuffle is seeded and optional") {
  bdcl::Rng r1(9), r2(9), r3(10);
  auto a = bdcl::make_batches(20, 8, &r1);
  auto b = bdcl::make_batches(20, 8, &r2);
  auto c = bdcl::make_batches(20, 8, &r3);
  CHECK(a == b);
  CHECK(a != c);
  auto plain = bdcl::make_batches(6, 4, nullptr);
  CHECK(plain[0] == std::vector<Index>{0, 1, 2, 3});
  CHECK(plain[1] == std::vector<Index>{4, 5});
}

TEST_CASE("batches: degenerate sizes are rejected") {
  CHECK_THROWS_AS(bdcl::make_batches(1, 4, nullptr), bdcl::ConfigError);
  CHECK_THROWS_AS(bdcl::make_batches(10, 1, nullptr), bdcl::ConfigError);
}

// ---- config validation -----------------------------------------------------

TEST_CASE("config: invalid settings are rejected") {
  TrainConfig ok;
  CHECK_NOTHROW(bdcl::validate(ok));
  auto expect_bad = [](auto&& tweak) {
    TrainConfig c;
    tweak(c);
    CHECK_THROWS_AS(bdcl::validate(c), bdcl::ConfigError);
  };
  expect_bad([](TrainConfig& c) { c.t1 = -1; });
  expect_bad([](TrainConfig& c) { c.t2 = -1; });
  expect_bad([](TrainConfig& c) { c.batch_size = 1; });
  expect_bad([](TrainConfig& c) { c.weights.tau = 0.0; });
  expect_bad([](TrainConfig& c) { c.weights.sigma = -0.1; });
  expect_bad([](TrainConfig& c) { c.log_every = 0; });
  expect_bad([](TrainConfig& c) { c.adam.lr = 0.0; });
}

// ---- pretraining phase -----------------------------------------------------

TEST_CASE("pretrain: zero epochs leave the model untouched") {
  Setup s = small_setup(1);
  auto before = all_params(s.model);
  TrainConfig cfg = quick_cfg();
  cfg.t1 = 0;
  auto logs = bdcl::pretrain(s.model, s.ds, cfg);
  CHECK(logs.empty());
  CHECK(all_same(before, all_params(s.model)));
}

TEST_CASE("pretrain: trains autoencoders, never the heads") {
  Setup s = small_setup(2);
  auto heads_before = head_params(s.model);
  auto ae_before = ae_params(s.model);
  auto logs = bdcl::pretrain(s.model, s.ds, quick_cfg());
  REQUIRE(logs.size() == 2);
  CHECK(logs[0].phase == "pretrain");
  CHECK(logs[0].epoch == 1);
  CHECK(logs[1].epoch == 2);
  CHECK(std::isfinite(logs[0].losses.l_ir));
  CHECK(all_same(heads_before, head_params(s.model)));
  CHECK_FALSE(all_same(ae_before, ae_params(s.model)));
}

TEST_CASE("pretrain: a linear autoencoder drives reconstruction near zero") {
  auto ds = bdcl::generate_synthetic<double>(50, 2, {4, 4}, 2.0, 0.5, 3);
  ds = bdcl::normalize(ds, "minmax");
  // embedding width equals the input width and there are no hidden layers,
  // so an exact identity map is reachable
  auto model = bdcl::init_model<double>({{4, {}, 4}, {4, {}, 4}}, 2, 2, 4);
  TrainConfig cfg;
  cfg.t1 = 200;
  cfg.t2 = 0;
  cfg.batch_size = 16;
  cfg.adam.lr = 1e-2;
  cfg.seed = 5;
  auto logs = bdcl::pretrain(model, ds, cfg);
  REQUIRE(logs.size() == 200);
  const double initial = logs.front().losses.l_ir;
  const double final_loss = logs.back().losses.l_ir;
  INFO("initial ", initial, " final ", final_loss);
  CHECK(final_loss < 0.01 * initial);
}

TEST_CASE("pretrain: same seed gives bit-identical weights and logs") {
  Setup a = small_setup(6), b = small_setup(6);
  auto la = bdcl::pretrain(a.model, a.ds, quick_cfg());
  auto lb = bdcl::pretrain(b.model, b.ds, quick_cfg());
  CHECK(logs_identical(la, lb));
  CHECK(all_same(all_params(a.model), all_params(b.model)));
}

TEST_CASE("pretrain: mismatched data is rejected before any work") {
  Setup s = small_setup(7);
  auto other = bdcl::generate_synthetic<double>(20, 2, {6}, 2.0, 0.5, 8);
  CHECK_THROWS_AS(bdcl::pretrain(s.model, other, quick_cfg()),
                  bdcl::ConfigError);
}

// ---- clustering phase ------------------------------------------------------

TEST_CASE("clustering: zero epochs leave the model untouched") {
  Setup s = small_setup(9);
  auto before = all_params(s.model);
  TrainConfig cfg = quick_cfg();
  cfg.t2 = 0;
  auto logs = bdcl::train_clustering(s.model, s.ds, cfg);
  CHECK(logs.empty());
  CHECK(all_same(before, all_params(s.model)));
}

TEST_CASE("clustering: logs carry the full breakdown each epoch") {
  Setup s = small_setup(10);
  auto logs = bdcl::train_clustering(s.model, s.ds, quick_cfg());
  REQUIRE(logs.size() == 3);
  for (const auto& rec : logs) {
    CHECK(rec.phase == "cluster");
    for (double v : {rec.losses.l_ir, rec.losses.l_ic, rec.losses.l_cc,
                     rec.losses.l_p, rec.losses.l_fd, rec.losses.l_cd,
                     rec.losses.total})
      CHECK(std::isfinite(v));
    const auto& d = rec.losses;
    CHECK(d.total ==
          doctest::Approx(d.l_ir + d.l_ic + d.l_cc + d.l_p + d.l_fd + d.l_cd)
              .epsilon(1e-9));
  }
}

TEST_CASE("clustering: one step with the decoupling terms moves the heads") {
  Setup s = small_setup(11);
  auto heads_before = head_params(s.model);
  TrainConfig cfg = quick_cfg();
  cfg.t2 = 1;
  cfg.batch_size = 64;  // single batch
  bdcl::train_clustering(s.model, s.ds, cfg);
  CHECK_FALSE(all_same(heads_before, head_params(s.model)));
}

TEST_CASE("clustering: zero lambdas freeze the clustering head") {
  Setup s = small_setup(12);
  auto before = all_params(s.model);
  std::vector<Mat<double>> cluster_head_before;
  for (const auto& v : s.model.views) {
    cluster_head_before.push_back(v.clustering_head.w);
    cluster_head_before.push_back(v.clustering_head.b);
  }
  TrainConfig cfg = quick_cfg();
  cfg.weights.lambda1 = 0.0;
  cfg.weights.lambda2 = 0.0;
  bdcl::train_clustering(s.model, s.ds, cfg);
  // reconstruction + contrastive reach everything except the clustering head
  std::vector<Mat<double>> cluster_head_after;
  for (const auto& v : s.model.views) {
    cluster_head_after.push_back(v.clustering_head.w);
    cluster_head_after.push_back(v.clustering_head.b);
  }
  CHECK(all_same(cluster_head_before, cluster_head_after));
  CHECK_FALSE(all_same(before, all_params(s.model)));
}

TEST_CASE("clustering: same seed gives identical logs and weights") {
  Setup a = small_setup(13), b = small_setup(13);
  auto la = bdcl::train_clustering(a.model, a.ds, quick_cfg());
  auto lb = bdcl::train_clustering(b.model, b.ds, quick_cfg());
  CHECK(logs_identical(la, lb));
  CHECK(all_same(all_params(a.model), all_params(b.model)));
}

TEST_CASE("clustering: non-finite loss aborts naming the component") {
  Setup s = small_setup(14);
  s.ds.views[0](3, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(bdcl::train_clustering(s.model, s.ds, quick_cfg()),
                       doctest::Contains("l_ir"), bdcl::NumericError);
  CHECK_THROWS_WITH_AS(bdcl::pretrain(s.model, s.ds, quick_cfg()),
                       doctest::Contains("l_ir"), bdcl::NumericError);
}

TEST_CASE("clustering: loss trend flattens out over a longer run") {
  auto ds = bdcl::generate_synthetic<double>(120, 3, {6, 5}, 4.0, 0.8, 15);
  ds = bdcl::normalize(ds, "minmax");
  auto model = bdcl::init_model<double>({{6, {16}, 8}, {5, {16}, 8}}, 4, 3, 16);
  TrainConfig cfg;
  cfg.t1 = 30;
  cfg.t2 = 100;
  cfg.batch_size = 32;
  cfg.seed = 17;
  bdcl::pretrain(model, ds, cfg);
  auto logs = bdcl::train_clustering(model, ds, cfg);
  REQUIRE(logs.size() == 100);

  // 20-epoch moving average of the total loss
  std::vector<double> ma;
  for (std::size_t t = 19; t < logs.size(); ++t) {
    double acc = 0;
    for (std::size_t i = t - 19; i <= t; ++i) acc += logs[i].losses.total;
    ma.push_back(acc / 20.0);
  }
  // non-increasing over the final half of training (tiny slack for jitter)
  const std::size_t half = ma.size() / 2;
  for (std::size_t i = half; i + 1 < ma.size(); ++i) {
    INFO("moving average rose at window ", i, ": ", ma[i], " -> ", ma[i + 1]);
    CHECK(ma[i + 1] <= ma[i] + 1e-4 * std::max(1.0, std::abs(ma[i])));
  }
  CHECK(ma.back() <= ma[half]);
}

// ---- prediction ------------------------------------------------------------

TEST_CASE("predict: argmax of the view-mean assignment with low-index ties") {
  CHECK(bdcl::assignment_labels<double>({rows({{0.1, 0.7, 0.2}})}) ==
        std::vector<int>{1});
  CHECK(bdcl::assignment_labels<double>(
            {rows({{0.6, 0.4}}), rows({{0.2, 0.8}})}) ==
        std::vector<int>{1});  // mean [0.4, 0.6]
  CHECK(bdcl::assignment_labels<double>({rows({{0.5, 0.5}})}) ==
        std::vector<int>{0});
  CHECK(bdcl::assignment_labels<double>(
            {rows({{0.2, 0.5, 0.3}, {0.4, 0.3, 0.3}})}) ==
        std::vector<int>({1, 0}));
  CHECK_THROWS_AS(bdcl::assignment_labels<double>({}), bdcl::ContractError);
}

TEST_CASE("predict: full-dataset pass is deterministic and well-shaped") {
  Setup s = small_setup(18);
  auto a = bdcl::predict_assignments(s.model, s.ds);
  auto b = bdcl::predict_assignments(s.model, s.ds);
  REQUIRE(a.labels.size() == 48);
  REQUIRE(a.p.size() == 2);
  CHECK(a.p[0].rows() == 48);
  CHECK(a.p[0].cols() == 3);
  CHECK(a.labels == b.labels);
  CHECK(same(a.p[0], b.p[0]));
  for (int y : a.labels) {
    CHECK(y >= 0);
    CHECK(y < 3);
  }
}

// ---- checkpoints -----------------------------------------------------------

namespace {

bool cfg_equal(const TrainConfig& a, const TrainConfig& b) {
  return a.t1 == b.t1 && a.t2 == b.t2 && a.batch_size == b.batch_size &&
         a.weights.tau == b.weights.tau && a.weights.sigma == b.weights.sigma &&
         a.weights.lambda1 == b.weights.lambda1 &&
         a.weights.lambda2 == b.weights.lambda2 && a.masks.cc == b.masks.cc &&
         a.masks.fd == b.masks.fd && a.masks.cd == b.masks.cd &&
         a.adam.lr == b.adam.lr && a.adam.beta1 == b.adam.beta1 &&
         a.adam.beta2 == b.adam.beta2 && a.adam.eps == b.adam.eps &&
         a.seed == b.seed && a.shuffle == b.shuffle &&
         a.log_every == b.log_every && a.checkpoint_path == b.checkpoint_path;
}

}  // namespace

TEST_CASE("checkpoint: round trip restores weights and config exactly") {
  TempDir tmp("roundtrip");
  Setup s = small_setup(19);
  TrainConfig cfg = quick_cfg();
  cfg.weights.lambda1 = 0.25;
  cfg.masks.fd = 0.0;
  cfg.seed = 99;
  cfg.shuffle = false;
  cfg.checkpoint_path = "elsewhere.bin";
  const fs::path path = tmp.path / "model.bin";
  bdcl::save_checkpoint(s.model, cfg, path);

  auto ck = bdcl::load_checkpoint<double>(path);
  CHECK(cfg_equal(ck.cfg, cfg));
  CHECK(all_same(all_params(s.model), all_params(ck.model)));
  REQUIRE(ck.model.num_views() == 2);
  CHECK(ck.model.contrastive_dim == 4);
  CHECK(ck.model.num_clusters == 3);
}

TEST_CASE("checkpoint: float-precision round trip and width probe") {
  TempDir tmp("width");
  auto model = bdcl::init_model<float>({{6, {12}, 8}, {5, {12}, 8}}, 4, 3, 20);
  const fs::path path = tmp.path / "model32.bin";
  bdcl::save_checkpoint(model, TrainConfig{}, path);
  CHECK(bdcl::checkpoint_scalar_width(path) == 4);

  auto ck = bdcl::load_checkpoint<float>(path);
  std::vector<Mat<float>> before, after;
  model.for_each_param([&](const Mat<float>& p) { before.push_back(p); });
  ck.model.for_each_param([&](const Mat<float>& p) { after.push_back(p); });
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(same(before[i], after[i]));

  // reading a 32-bit file at 64-bit is a version problem, not corruption
  CHECK_THROWS_AS(bdcl::load_checkpoint<double>(path),
                  bdcl::CheckpointVersionError);
}

TEST_CASE("checkpoint: failure modes are distinct") {
  TempDir tmp("errors");
  Setup s = small_setup(21);
  const fs::path path = tmp.path / "model.bin";
  bdcl::save_checkpoint(s.model, TrainConfig{}, path);
  CHECK(bdcl::checkpoint_scalar_width(path) == 8);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(bdcl::load_checkpoint<double>(tmp.path / "absent.bin"),
                    bdcl::IoError);
  }
  SUBCASE("unrecognized format tag") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    }();
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_AS(bdcl::load_checkpoint<double>(path),
                    bdcl::CheckpointVersionError);
  }
  SUBCASE("flipped payload byte") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    }();
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_AS(bdcl::load_checkpoint<double>(path),
                    bdcl::CheckpointCorruptError);
  }
  SUBCASE("truncated file") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    }();
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(bdcl::load_checkpoint<double>(path),
                    bdcl::CheckpointCorruptError);
  }
}

TEST_CASE("checkpoint: training resumes identically after a reload") {
  TempDir tmp("resume");
  Setup a = small_setup(22);
  TrainConfig cfg = quick_cfg();
  bdcl::pretrain(a.model, a.ds, cfg);
  const fs::path path = tmp.path / "mid.bin";
  bdcl::save_checkpoint(a.model, cfg, path);

  auto ck = bdcl::load_checkpoint<double>(path);
  auto la = bdcl::train_clustering(a.model, a.ds, cfg);
  auto lb = bdcl::train_clustering(ck.model, a.ds, ck.cfg);
  CHECK(logs_identical(la, lb));
  CHECK(all_same(all_params(a.model), all_params(ck.model)));
}
