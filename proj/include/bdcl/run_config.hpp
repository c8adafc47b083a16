// run_config.hpp -- JSON run configuration shared by the CLI subcommands
//
// One document describes a whole run: where the data comes from (an existing
// manifest or synthetic-generator parameters), the network sizes, and every
// training knob. Parsing is strict: unknown keys are rejected so typos fail
// fast instead of silently falling back to defaults. Every field has a
// default, and the resolved form (all defaults expanded) is what gets written
// next to a run's outputs.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bdcl/matrix.hpp"
#include "bdcl/trainer.hpp"

namespace bdcl {

struct SyntheticSpec {
  Index n = 1000;
  Index k = 5;
  std::vector<Index> view_dims = {20, 30};
  double cluster_sep = 4.0;
  double noise = 1.0;
  std::uint64_t seed = 1;
};

struct RunConfig {
  // dataset: exactly one of manifest / synthetic once a command needs data
  std::optional<std::string> manifest;
  std::optional<SyntheticSpec> synthetic;
  std::string normalization = "minmax";  // none | minmax | zscore

  // model: views share the hidden stack; input dims come from the data
  std::vector<Index> hidden = {128};
  Index embed_dim = 32;        // m
  Index contrastive_dim = 16;  // q, must stay < m

  TrainConfig train;

  std::string out_dir = "run_out";
  std::string precision = "f64";  // f64 | f32
};

// Strict parse: throws ConfigError on malformed JSON, unknown keys, or
// out-of-range values.
RunConfig parse_run_config_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Fully resolved document (every field present) for reproducing the run.
std::string run_config_to_json(const RunConfig& cfg);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool no_bd = false;  // zero both decoupling terms
  bool no_fd = false;
  bool no_cd = false;
  bool no_cc = false;  // zero the cluster-consistency term
};

// Flag precedence: flags > file > defaults.
void apply_overrides(RunConfig& cfg, const CliOverrides& o);

}  // namespace bdcl
