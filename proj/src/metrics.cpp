// metrics.cpp -- Hungarian matching and the label-based clustering scores

#include "bdcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bdcl {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

void check_labels_pair(const std::vector<int>& pred,
                       const std::vector<int>& truth, const char* where) {
  if (pred.size() != truth.size())
    throw DimensionError(std::string(where) + ": pred has " +
                         std::to_string(pred.size()) + " labels, truth has " +
                         std::to_string(truth.size()));
  if (pred.empty())
    throw ContractError(std::string(where) + ": empty label vectors");
  for (int y : pred)
    if (y < 0) throw ContractError(std::string(where) + ": negative pred label");
  for (int y : truth)
    if (y < 0) throw ContractError(std::string(where) + ": negative truth label");
}

}  // namespace

// Potential-based O(n^3) assignment, minimizing cost = -count so the selected
// entries maximize the matched total.
std::vector<Index> hungarian_match(const CountMatrix& confusion) {
  if (confusion.rows() != confusion.cols())
    throw ContractError("hungarian_match: matrix must be square, got " +
                        std::to_string(confusion.rows()) + "x" +
                        std::to_string(confusion.cols()));
  const Index n = confusion.rows();
  if (n == 0) throw ContractError("hungarian_match: empty matrix");
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (confusion(i, j) < 0)
        throw ContractError("hungarian_match: negative count at (" +
                            std::to_string(i) + "," + std::to_string(j) + ")");

  // 1-indexed arrays; p[j] is the row currently assigned to column j.
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<std::int64_t> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      Index j1 = 0;
      std::int64_t delta = kInf;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = -confusion(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Index> match(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j)
    match[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return match;
}

CountMatrix confusion_matrix(const std::vector<int>& pred,
                             const std::vector<int>& truth) {
  check_labels_pair(pred, truth, "confusion_matrix");
  int hi = 0;
  for (int y : pred) hi = std::max(hi, y);
  for (int y : truth) hi = std::max(hi, y);
  const Index n = hi + 1;
  CountMatrix c = CountMatrix::Zero(n, n);
  for (std::size_t i = 0; i < pred.size(); ++i)
    c(pred[i], truth[i]) += 1;
  return c;
}

double clustering_accuracy(const std::vector<int>& pred,
                           const std::vector<int>& truth) {
  CountMatrix c = confusion_matrix(pred, truth);
  std::vector<Index> match = hungarian_match(c);
  std::int64_t hit = 0;
  for (Index i = 0; i < c.rows(); ++i) hit += c(i, match[static_cast<std::size_t>(i)]);
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  CountMatrix c = confusion_matrix(pred, truth);
  const Index n = c.rows();
  const long double total = static_cast<long double>(pred.size());

  std::vector<std::int64_t> row(n, 0), col(n, 0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      row[i] += c(i, j);
      col[j] += c(i, j);
    }

  auto entropy = [&](const std::vector<std::int64_t>& counts) {
    long double h = 0;
    for (std::int64_t cnt : counts)
      if (cnt > 0) {
        const long double p = cnt / total;
        h -= p * std::log(p);
      }
    return h;
  };
  const long double hp = entropy(row), ht = entropy(col);
  if (hp <= 0 && ht <= 0) return 1.0;  // both single-cluster: identical partitions
  if (hp <= 0 || ht <= 0) return 0.0;  // one degenerate side carries no information

  long double mi = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (c(i, j) > 0) {
        const long double pij = c(i, j) / total;
        mi += pij * std::log(pij * total * total /
                             (static_cast<long double>(row[i]) *
                              static_cast<long double>(col[j])));
      }
  const long double score = mi / std::sqrt(hp * ht);
  return static_cast<double>(std::min<long double>(1.0L, std::max<long double>(0.0L, score)));
}

double purity(const std::vector<int>& pred, const std::vector<int>& truth) {
  CountMatrix c = confusion_matrix(pred, truth);
  std::int64_t hit = 0;
  for (Index i = 0; i < c.rows(); ++i) hit += c.row(i).maxCoeff();
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

MetricsReport evaluate_clustering(const std::vector<int>& pred,
                                  const std::vector<int>& truth) {
  MetricsReport r;
  CountMatrix c = confusion_matrix(pred, truth);
  r.matching = hungarian_match(c);
  std::int64_t hit = 0;
  for (Index i = 0; i < c.rows(); ++i) hit += c(i, r.matching[static_cast<std::size_t>(i)]);
  r.acc = static_cast<double>(hit) / static_cast<double>(pred.size());
  r.nmi = nmi(pred, truth);
  r.pur = purity(pred, truth);
  return r;
}

}  // namespace bdcl
