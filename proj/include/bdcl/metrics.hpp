// metrics.hpp -- clustering evaluation (ACC / NMI / PUR) and coupling
// diagnostics
//
// The label metrics run on plain int vectors and are implemented in
// metrics.cpp; the coupling diagnostic is templated on the scalar and lives
// here. All three scores are invariant under relabeling of either argument.
#pragma once

#include <cstdint>
#include <vector>

#include "bdcl/dataset.hpp"
#include "bdcl/matrix.hpp"
#include "bdcl/model.hpp"
#include "bdcl/ops.hpp"

namespace bdcl {

using CountMatrix =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Optimal assignment on a square non-negative count matrix; returns the
// column assigned to each row, maximizing the sum of selected entries.
std::vector<Index> hungarian_match(const CountMatrix& confusion);

// Square matrix sized to cover both label ranges; entry (i, j) counts samples
// with pred == i and truth == j.
CountMatrix confusion_matrix(const std::vector<int>& pred,
                             const std::vector<int>& truth);

double clustering_accuracy(const std::vector<int>& pred,
                           const std::vector<int>& truth);

// Mutual information over sqrt(H(pred) * H(truth)), natural log. Two
// single-cluster partitions score 1; one degenerate side against a spread
// partition scores 0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

double purity(const std::vector<int>& pred, const std::vector<int>& truth);

struct MetricsReport {
  double acc = 0, nmi = 0, pur = 0;
  std::vector<Index> matching;  // cluster id -> class id
};

MetricsReport evaluate_clustering(const std::vector<int>& pred,
                                  const std::vector<int>& truth);

// ---- coupling diagnostic ---------------------------------------------------

// Gram matrices of the column-normalized embeddings (m x m) and soft
// assignments (K x K) over the full dataset, plus the mean absolute
// off-diagonal entry of each as a scalar coupling summary.
template <class S>
struct CouplingSet {
  Mat<S> z_gram;
  Mat<S> p_gram;
  double z_offdiag_mean = 0;
  double p_offdiag_mean = 0;
};

template <class S>
double mean_abs_offdiag(const Mat<S>& m) {
  if (m.rows() != m.cols())
    throw ContractError("mean_abs_offdiag: matrix must be square");
  const Index n = m.rows();
  if (n < 2) return 0.0;
  double acc = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j) acc += std::abs(static_cast<double>(m(i, j)));
  return acc / static_cast<double>(n * (n - 1));
}

template <class S>
std::vector<CouplingSet<S>> coupling_matrices(const ModelState<S>& model,
                                              const MultiViewDataset<S>& ds) {
  ForwardBundle<S> fb = forward_views(model, ds.views, S(0), 0);
  std::vector<CouplingSet<S>> out;
  for (std::size_t v = 0; v < fb.z.size(); ++v) {
    CouplingSet<S> c;
    Mat<S> zc = l2_normalize_cols(fb.z[v], static_cast<S>(kNormEps));
    Mat<S> pc = l2_normalize_cols(fb.p[v], static_cast<S>(kNormEps));
    c.z_gram = zc.transpose() * zc;
    c.p_gram = pc.transpose() * pc;
    c.z_offdiag_mean = mean_abs_offdiag(c.z_gram);
    c.p_offdiag_mean = mean_abs_offdiag(c.p_gram);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace bdcl
