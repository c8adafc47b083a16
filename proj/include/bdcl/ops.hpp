// ops.hpp -- pure numeric kernels shared by the tape and eval-only paths
#pragma once

#include <cmath>

#include "bdcl/matrix.hpp"

namespace bdcl {

// Shared floor for L2 normalization: norms below this are replaced by it.
inline constexpr double kNormEps = 1e-12;

template <class S>
Mat<S> relu(const Mat<S>& x) {
  return x.cwiseMax(S(0));
}

// out[i,j] = sum_k x[i,k] W[k,j] + b[j]; b is 1 x dout.
template <class S>
Mat<S> linear(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b) {
  if (x.cols() != w.rows())
    throw DimensionError("linear: x " + shape_str(x) + " incompatible with W " + shape_str(w));
  if (b.rows() != 1 || b.cols() != w.cols())
    throw DimensionError("linear: bias " + shape_str(b) + " must be 1x" + std::to_string(w.cols()));
  Mat<S> out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

// Row softmax with max subtraction; every output row sums to 1.
template <class S>
Mat<S> softmax_rows(const Mat<S>& x) {
  Mat<S> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const S m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// Euclidean norm of each column, as a 1 x cols row.
template <class S>
Mat<S> col_norms(const Mat<S>& x) {
  Mat<S> n(1, x.cols());
  for (Index j = 0; j < x.cols(); ++j) n(0, j) = x.col(j).norm();
  return n;
}

// Columns scaled to unit norm; columns with norm < eps are divided by eps
// instead, so an all-zero column stays zero.
template <class S>
Mat<S> l2_normalize_cols(const Mat<S>& x, S eps) {
  if (!(eps > S(0))) throw ContractError("l2_normalize_cols: eps must be > 0");
  Mat<S> out = x;
  for (Index j = 0; j < x.cols(); ++j) {
    const S n = x.col(j).norm();
    out.col(j) /= (n < eps) ? eps : n;
  }
  return out;
}

template <class S>
Mat<S> l2_normalize_rows(const Mat<S>& x, S eps) {
  if (!(eps > S(0))) throw ContractError("l2_normalize_rows: eps must be > 0");
  Mat<S> out = x;
  for (Index i = 0; i < x.rows(); ++i) {
    const S n = x.row(i).norm();
    out.row(i) /= (n < eps) ? eps : n;
  }
  return out;
}

// Cosine of the angle between two vectors (any 1xN / Nx1 mix); norms below
// eps are clamped to eps.
template <class S>
S cosine_sim(const Mat<S>& a, const Mat<S>& b, S eps = S(1e-12)) {
  if (a.rows() != 1 && a.cols() != 1)
    throw DimensionError("cosine_sim: expected a vector, got " + shape_str(a));
  if (b.rows() != 1 && b.cols() != 1)
    throw DimensionError("cosine_sim: expected a vector, got " + shape_str(b));
  if (a.size() != b.size())
    throw DimensionError("cosine_sim: length mismatch " + shape_str(a) + " vs " + shape_str(b));
  S dot = S(0), na2 = S(0), nb2 = S(0);
  for (Index k = 0; k < a.size(); ++k) {
    const S av = a(k / a.cols(), k % a.cols());
    const S bv = b(k / b.cols(), k % b.cols());
    dot += av * bv;
    na2 += av * av;
    nb2 += bv * bv;
  }
  const S na = std::max(std::sqrt(na2), eps);
  const S nb = std::max(std::sqrt(nb2), eps);
  return dot / (na * nb);
}

}  // namespace bdcl
