// kmeans.hpp -- plain k-means with k-means++ seeding, used as the raw-feature
// baseline. Deterministic for a fixed seed; best of `restarts` runs by inertia.
#pragma once

#include <cstdint>
#include <vector>

#include "bdcl/matrix.hpp"
#include "bdcl/rng.hpp"

namespace bdcl {

template <class S>
struct KMeansResult {
  std::vector<int> labels;  // n, values in [0, k)
  Mat<S> centers;           // k x d
  double inertia = 0;       // sum of squared distances to assigned centers
};

namespace detail {

template <class S>
Mat<S> kmeanspp_init(const Mat<S>& x, Index k, Rng& rng) {
  const Index n = x.rows();
  Mat<S> centers(k, x.cols());
  centers.row(0) = x.row(rng.uniform_int(0, static_cast<int>(n - 1)));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index c = 1; c < k; ++c) {
    double total = 0;
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index p = 0; p < c; ++p)
        best = std::min(best,
                        static_cast<double>((x.row(i) - centers.row(p)).squaredNorm()));
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    Index pick = 0;
    if (total > 0) {
      const double r = rng.uniform_scalar(0.0, 1.0) * total;
      double acc = 0;
      pick = n - 1;  // fallback against rounding past the end
      for (Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(0, static_cast<int>(n - 1));
    }
    centers.row(c) = x.row(pick);
  }
  return centers;
}

template <class S>
KMeansResult<S> kmeans_single(const Mat<S>& x, Index k, std::uint64_t seed,
                              int max_iters) {
  const Index n = x.rows();
  Rng rng(seed);
  KMeansResult<S> r;
  r.centers = kmeanspp_init(x, k, rng);
  r.labels.assign(static_cast<std::size_t>(n), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    // assignment step; ties go to the lowest center index
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (Index c = 0; c < k; ++c) {
        const double d = (x.row(i) - r.centers.row(c)).squaredNorm();
        if (d < best) {
          best = d;
          best_c = static_cast<int>(c);
        }
      }
      if (r.labels[static_cast<std::size_t>(i)] != best_c) {
        r.labels[static_cast<std::size_t>(i)] = best_c;
        changed = true;
      }
    }
    // update step
    Mat<S> sums = Mat<S>::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(r.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(r.labels[static_cast<std::size_t>(i)])];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centers.row(c) =
            sums.row(c) / static_cast<S>(counts[static_cast<std::size_t>(c)]);
      } else {
        // revive an empty cluster at the point farthest from its center
        Index far = 0;
        double far_d = -1;
        for (Index i = 0; i < n; ++i) {
          const double d =
              (x.row(i) - r.centers.row(r.labels[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        r.centers.row(c) = x.row(far);
        r.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }

  r.inertia = 0;
  for (Index i = 0; i < n; ++i)
    r.inertia +=
        (x.row(i) - r.centers.row(r.labels[static_cast<std::size_t>(i)]))
            .squaredNorm();
  return r;
}

}  // namespace detail

template <class S>
KMeansResult<S> kmeans(const Mat<S>& x, Index k, std::uint64_t seed,
                       int restarts = 10, int max_iters = 100) {
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (x.rows() < k)
    throw ConfigError("kmeans: need at least k rows, got " +
                      std::to_string(x.rows()));
  if (restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");
  KMeansResult<S> best;
  for (int t = 0; t < restarts; ++t) {
    KMeansResult<S> r =
        detail::kmeans_single(x, k, mix_seed(seed, static_cast<std::uint64_t>(t)),
                              max_iters);
    if (t == 0 || r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

}  // namespace bdcl
