// support.hpp -- shared helpers for the test binaries: small matrix literals,
// exact-equality checks, and a central-difference gradient harness.
#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <vector>

#include "doctest.h"

#include "bdcl/rng.hpp"
#include "bdcl/tape.hpp"

namespace testsupport {

using bdcl::Index;
using bdcl::Mat;

inline Mat<double> rows(std::initializer_list<std::initializer_list<double>> v) {
  Mat<double> m(static_cast<Index>(v.size()),
                static_cast<Index>(v.begin()->size()));
  Index i = 0;
  for (const auto& r : v) {
    Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

inline bool same(const Mat<double>& a, const Mat<double>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}
inline bool same(const Mat<float>& a, const Mat<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

// random matrix with entries bounded away from zero, for kinked/log-like ops
inline Mat<double> random_offset(Index r, Index c, std::uint64_t seed, double lo,
                                 double hi, bool signed_values) {
  bdcl::Rng rng(seed);
  Mat<double> m = rng.uniform<double>(r, c, lo, hi);
  if (signed_values) {
    Mat<double> s = rng.uniform<double>(r, c, -1.0, 1.0);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j)
        if (s(i, j) < 0) m(i, j) = -m(i, j);
  }
  return m;
}

// fixed weighting turns a matrix output into a scalar probe with asymmetric
// sensitivities, catching transposed or misrouted gradients
inline bdcl::ad::Var<double> weighted_sum(bdcl::ad::Tape<double>& t,
                                          bdcl::ad::Var<double> x,
                                          std::uint64_t seed) {
  Mat<double> c = bdcl::Rng(seed).uniform<double>(x.value().rows(),
                                                  x.value().cols(), -1.0, 1.0);
  return bdcl::ad::sum(bdcl::ad::hadamard(x, bdcl::ad::constant(t, std::move(c))));
}

// ---- central-difference gradient harness -----------------------------------
// Rebuilds the graph from scratch around each perturbed input, so the check
// exercises the same code path a training step uses.

using Builder = std::function<bdcl::ad::Var<double>(bdcl::ad::Tape<double>&,
                                                    std::vector<bdcl::ad::Var<double>>&)>;

inline void check_gradients(std::vector<Mat<double>> inputs, const Builder& build,
                            double step = 1e-5, double rtol = 1e-4,
                            double atol = 1e-8) {
  bdcl::ad::Tape<double> tape;
  std::vector<bdcl::ad::Var<double>> vars;
  for (auto& x : inputs) vars.push_back(bdcl::ad::param(tape, x));
  bdcl::ad::Var<double> loss = build(tape, vars);
  REQUIRE(loss.value().rows() == 1);
  REQUIRE(loss.value().cols() == 1);
  tape.backward(loss);
  std::vector<Mat<double>> grads;
  for (auto& v : vars) grads.push_back(v.grad());

  auto eval = [&](const std::vector<Mat<double>>& xs) {
    bdcl::ad::Tape<double> t;
    std::vector<bdcl::ad::Var<double>> vs;
    for (const auto& x : xs) vs.push_back(bdcl::ad::param(t, x));
    return build(t, vs).value()(0, 0);
  };
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (Index i = 0; i < inputs[k].rows(); ++i)
      for (Index j = 0; j < inputs[k].cols(); ++j) {
        std::vector<Mat<double>> hi = inputs, lo = inputs;
        hi[k](i, j) += step;
        lo[k](i, j) -= step;
        const double fd = (eval(hi) - eval(lo)) / (2 * step);
        const double an = grads[k](i, j);
        const double tol = atol + rtol * std::max(std::abs(fd), std::abs(an));
        INFO("input ", k, " entry (", i, ",", j, "): analytic=", an, " fd=", fd);
        CHECK(std::abs(fd - an) <= tol);
      }
}

}  // namespace testsupport
