// dataset.hpp -- multi-view datasets: synthetic generation, disk I/O,
// normalization
//
// On-disk layout: one headerless CSV per view (one row per sample), an
// optional labels CSV (one integer per row), and a JSON manifest tying them
// together. Values round-trip exactly via max_digits10 decimal text.
#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "bdcl/matrix.hpp"
#include "bdcl/rng.hpp"

namespace bdcl {

template <class S>
struct MultiViewDataset {
  std::vector<Mat<S>> views;              // each N x d_v
  std::optional<std::vector<int>> labels; // values in [0, k)
  Index k = 0;
  std::string name;
  std::string normalization = "none";     // none | minmax | zscore

  Index num_samples() const { return views.empty() ? 0 : views.front().rows(); }
  Index num_views() const { return static_cast<Index>(views.size()); }
};

// Manifest fields: {name, n, k, views: [{file, dim}], labels_file,
// normalization, seed}. File names are relative to the manifest's directory.
struct ManifestView {
  std::string file;
  Index dim = 0;
};

struct DatasetManifest {
  std::string name;
  Index n = 0;
  Index k = 0;
  std::vector<ManifestView> views;
  std::optional<std::string> labels_file;
  std::string normalization = "none";
  std::optional<std::uint64_t> seed;
};

// Implemented in manifest.cpp; parse rejects unknown keys.
DatasetManifest parse_manifest_json(const std::string& text);
std::string manifest_to_json(const DatasetManifest& m);

// ---- CSV helpers -----------------------------------------------------------

namespace detail {

template <class S>
void write_csv_matrix(const std::filesystem::path& path, const Mat<S>& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.*g",
                    std::numeric_limits<S>::max_digits10,
                    static_cast<double>(m(i, j)));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    std::string f = line.substr(start, comma == std::string::npos
                                           ? std::string::npos
                                           : comma - start);
    // trim surrounding whitespace / CR
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t'))
      f.pop_back();
    std::size_t lead = f.find_first_not_of(" \t");
    fields.push_back(lead == std::string::npos ? std::string() : f.substr(lead));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline double parse_number(const std::string& field, const std::string& where) {
  if (field.empty())
    throw DataIntegrityError("empty numeric field in " + where);
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size())
    throw DataIntegrityError("malformed number '" + field + "' in " + where);
  return v;
}

template <class S>
Mat<S> read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, path.string()));
    if (rows.empty())
      cols = row.size();
    else if (row.size() != cols)
      throw DataIntegrityError("ragged CSV row in " + path.string());
    rows.push_back(std::move(row));
  }
  Mat<S> m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = static_cast<S>(rows[static_cast<std::size_t>(i)]
                                   [static_cast<std::size_t>(j)]);
  if (!all_finite(m))
    throw DataIntegrityError("non-finite value in " + path.string());
  return m;
}

inline void write_labels_csv(const std::filesystem::path& path,
                             const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (int y : labels) out << y << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<int> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    double v = parse_number(split_csv_line(line).front(), path.string());
    long r = std::lround(v);
    if (static_cast<double>(r) != v)
      throw DataIntegrityError("non-integer label in " + path.string());
    labels.push_back(static_cast<int>(r));
  }
  return labels;
}

inline void check_labels(const std::vector<int>& labels, Index n, Index k,
                         const std::string& where) {
  if (static_cast<Index>(labels.size()) != n)
    throw DataIntegrityError(where + ": label count " +
                             std::to_string(labels.size()) +
                             " does not match sample count " + std::to_string(n));
  std::vector<char> seen(static_cast<std::size_t>(k), 0);
  for (int y : labels) {
    if (y < 0 || y >= k)
      throw DataIntegrityError(where + ": label value " + std::to_string(y) +
                               " outside [0," + std::to_string(k) + ")");
    seen[static_cast<std::size_t>(y)] = 1;
  }
  for (Index c = 0; c < k; ++c)
    if (!seen[static_cast<std::size_t>(c)])
      throw DataIntegrityError(where + ": class " + std::to_string(c) +
                               " has no samples");
}

}  // namespace detail

// ---- synthetic generator ---------------------------------------------------

// K Gaussian centers in an 8-dim latent space (scaled by cluster_sep); each
// view is an independent random linear map of the latent points plus isotropic
// noise. Labels cycle 0..K-1 so classes stay balanced within one sample.
template <class S>
MultiViewDataset<S> generate_synthetic(Index n, Index k,
                                       const std::vector<Index>& view_dims,
                                       double cluster_sep, double noise,
                                       std::uint64_t seed) {
  if (k < 2) throw ConfigError("generate_synthetic: k must be >= 2");
  if (n < 2 * k)
    throw ConfigError("generate_synthetic: n must be >= 2k (n=" +
                      std::to_string(n) + ", k=" + std::to_string(k) + ")");
  if (view_dims.empty())
    throw ConfigError("generate_synthetic: need at least one view");
  for (Index d : view_dims)
    if (d < 2) throw ConfigError("generate_synthetic: view dims must be >= 2");
  if (cluster_sep < 0 || noise < 0)
    throw ConfigError("generate_synthetic: cluster_sep and noise must be >= 0");

  constexpr Index kLatentDim = 8;
  Mat<double> centers =
      cluster_sep * Rng(mix_seed(seed, 0)).gaussian<double>(k, kLatentDim);
  Mat<double> latent = Rng(mix_seed(seed, 1)).gaussian<double>(n, kLatentDim);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<int>(i % k);
    latent.row(i) += centers.row(i % k);
  }

  MultiViewDataset<S> ds;
  ds.k = k;
  ds.name = "synthetic";
  ds.labels = std::move(labels);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(kLatentDim));
  for (std::size_t v = 0; v < view_dims.size(); ++v) {
    Mat<double> a = map_scale * Rng(mix_seed(seed, 2 + 2 * v))
                                    .gaussian<double>(kLatentDim, view_dims[v]);
    Mat<double> x = latent * a;
    if (noise > 0)
      x += noise * Rng(mix_seed(seed, 3 + 2 * v))
                       .gaussian<double>(n, view_dims[v]);
    ds.views.push_back(x.template cast<S>());
  }
  return ds;
}

// ---- disk round trip -------------------------------------------------------

template <class S>
std::filesystem::path save_dataset(const MultiViewDataset<S>& ds,
                                   const std::filesystem::path& dir,
                                   std::optional<std::uint64_t> seed = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());

  DatasetManifest m;
  m.name = ds.name;
  m.n = ds.num_samples();
  m.k = ds.k;
  m.normalization = ds.normalization;
  m.seed = seed;
  for (Index v = 0; v < ds.num_views(); ++v) {
    std::string file = "view_" + std::to_string(v) + ".csv";
    detail::write_csv_matrix(dir / file, ds.views[static_cast<std::size_t>(v)]);
    m.views.push_back({file, ds.views[static_cast<std::size_t>(v)].cols()});
  }
  if (ds.labels) {
    m.labels_file = "labels.csv";
    detail::write_labels_csv(dir / *m.labels_file, *ds.labels);
  }
  fs::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot open for writing: " + manifest_path.string());
  out << manifest_to_json(m) << '\n';
  if (!out) throw IoError("write failed: " + manifest_path.string());
  return manifest_path;
}

template <class S>
MultiViewDataset<S> load_dataset(const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  DatasetManifest m = parse_manifest_json(text);
  fs::path dir = manifest_path.parent_path();

  MultiViewDataset<S> ds;
  ds.k = m.k;
  ds.name = m.name;
  ds.normalization = m.normalization;
  for (const auto& mv : m.views) {
    fs::path p = dir / mv.file;
    if (!fs::exists(p)) throw IoError("missing view file: " + p.string());
    Mat<S> x = detail::read_csv_matrix<S>(p);
    if (x.cols() != mv.dim)
      throw DataIntegrityError(p.string() + ": manifest declares dim " +
                               std::to_string(mv.dim) + " but file has " +
                               std::to_string(x.cols()) + " columns");
    if (x.rows() != m.n)
      throw DataIntegrityError(p.string() + ": manifest declares " +
                               std::to_string(m.n) + " rows but file has " +
                               std::to_string(x.rows()));
    ds.views.push_back(std::move(x));
  }
  if (m.labels_file) {
    fs::path p = dir / *m.labels_file;
    if (!fs::exists(p)) throw IoError("missing labels file: " + p.string());
    std::vector<int> labels = detail::read_labels_csv(p);
    detail::check_labels(labels, m.n, m.k, p.string());
    ds.labels = std::move(labels);
  }
  return ds;
}

// ---- normalization ---------------------------------------------------------

// minmax maps each feature column to [0,1]; zscore to mean 0 and unit
// population standard deviation. Constant columns map to 0 in both modes.
template <class S>
MultiViewDataset<S> normalize(const MultiViewDataset<S>& ds,
                              const std::string& mode) {
  if (mode == "none") return ds;
  if (mode != "minmax" && mode != "zscore")
    throw ConfigError("normalize: unknown mode '" + mode + "'");
  MultiViewDataset<S> out = ds;
  out.normalization = mode;
  for (auto& x : out.views) {
    for (Index j = 0; j < x.cols(); ++j) {
      auto col = x.col(j);
      if (mode == "minmax") {
        const S lo = col.minCoeff(), hi = col.maxCoeff();
        if (hi > lo)
          col = (col.array() - lo) / (hi - lo);
        else
          col.setZero();
      } else {
        const S mu = col.mean();
        const S var = (col.array() - mu).square().sum() /
                      static_cast<S>(x.rows());
        if (var > S(0))
          col = (col.array() - mu) / std::sqrt(var);
        else
          col.setZero();
      }
    }
  }
  return out;
}

}  // namespace bdcl
