// tape.hpp -- eager reverse-mode autodiff over dense matrices
//
// A Tape owns a sequence of GradNodes created in topological order; backward()
// walks the sequence in reverse, so parents are always visited after all of
// their consumers. Values are computed eagerly when a node is created;
// gradients are accumulated into pre-zeroed buffers of the same shape.
#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "bdcl/matrix.hpp"
#include "bdcl/ops.hpp"

namespace bdcl::ad {

template <class S>
class Tape;

// Cheap handle to one node of a tape.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int idx = -1;

  const Mat<S>& value() const;
  const Mat<S>& grad() const;
};

template <class S>
class Tape {
 public:
  struct GradNode {
    Mat<S> value;
    Mat<S> gradient;  // same shape as value
    bool needs_grad = false;
    std::vector<int> parents;
    // Reads this node's gradient and accumulates into the parents' gradients.
    std::function<void(Tape&, int self)> backprop;
  };

  int size() const { return static_cast<int>(nodes_.size()); }
  GradNode& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const GradNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

  Var<S> make(Mat<S> value, bool needs_grad, std::vector<int> parents,
              std::function<void(Tape&, int)> backprop) {
    GradNode n;
    n.gradient = Mat<S>::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.parents = std::move(parents);
    if (needs_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var<S>{this, size() - 1};
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  // loss must be 1x1. One backward pass per tape.
  void backward(Var<S> loss) {
    if (loss.tape != this) throw ContractError("backward: var belongs to another tape");
    GradNode& root = node(loss.idx);
    if (root.value.rows() != 1 || root.value.cols() != 1)
      throw ContractError("backward: root must be a scalar, got " + shape_str(root.value));
    root.gradient(0, 0) = S(1);
    for (int i = loss.idx; i >= 0; --i) {
      GradNode& n = node(i);
      if (n.needs_grad && n.backprop) n.backprop(*this, i);
    }
  }

 private:
  std::vector<GradNode> nodes_;
};

template <class S>
const Mat<S>& Var<S>::value() const {
  return tape->node(idx).value;
}
template <class S>
const Mat<S>& Var<S>::grad() const {
  return tape->node(idx).gradient;
}

namespace detail {
template <class S>
void check_same_tape(Var<S> a, Var<S> b, const char* where) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ContractError(std::string(where) + ": vars must live on the same tape");
}
template <class S>
bool needs(Var<S> a) {
  return a.tape->node(a.idx).needs_grad;
}
}  // namespace detail

// ---- leaves ----------------------------------------------------------------

template <class S>
Var<S> constant(Tape<S>& t, Mat<S> v) {
  return t.make(std::move(v), false, {}, {});
}

// A trainable leaf; its .grad() is read out after backward().
template <class S>
Var<S> param(Tape<S>& t, Mat<S> v) {
  return t.make(std::move(v), true, {}, {});
}

// ---- elementwise and scalar ops --------------------------------------------

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::check_same_tape(a, b, "add");
  Tape<S>& t = *a.tape;
  require_same_shape(a.value(), b.value(), "add");
  Mat<S> v = a.value() + b.value();
  const int ai = a.idx, bi = b.idx;
  return t.make(std::move(v), detail::needs(a) || detail::needs(b), {ai, bi},
                [ai, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  tp.node(ai).gradient += g;
                  tp.node(bi).gradient += g;
                });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::check_same_tape(a, b, "sub");
  Tape<S>& t = *a.tape;
  require_same_shape(a.value(), b.value(), "sub");
  Mat<S> v = a.value() - b.value();
  const int ai = a.idx, bi = b.idx;
  return t.make(std::move(v), detail::needs(a) || detail::needs(b), {ai, bi},
                [ai, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  tp.node(ai).gradient += g;
                  tp.node(bi).gradient -= g;
                });
}

template <class S>
Var<S> hadamard(Var<S> a, Var<S> b) {
  detail::check_same_tape(a, b, "hadamard");
  Tape<S>& t = *a.tape;
  require_same_shape(a.value(), b.value(), "hadamard");
  Mat<S> v = a.value().cwiseProduct(b.value());
  const int ai = a.idx, bi = b.idx;
  return t.make(std::move(v), detail::needs(a) || detail::needs(b), {ai, bi},
                [ai, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  tp.node(ai).gradient += g.cwiseProduct(tp.node(bi).value);
                  tp.node(bi).gradient += g.cwiseProduct(tp.node(ai).value);
                });
}

template <class S>
Var<S> scale(Var<S> a, S c) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value() * c;
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai, c](Tape<S>& tp, int self) {
    tp.node(ai).gradient += c * tp.node(self).gradient;
  });
}

template <class S>
Var<S> relu(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = bdcl::relu(a.value());
  const int ai = a.idx;
  // subgradient at 0 is 0
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.node(self).gradient;
    const Mat<S>& x = tp.node(ai).value;
    tp.node(ai).gradient.array() += g.array() * (x.array() > S(0)).template cast<S>();
  });
}

template <class S>
Var<S> exp(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().array().exp().matrix();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    tp.node(ai).gradient.array() +=
        tp.node(self).gradient.array() * tp.node(self).value.array();
  });
}

template <class S>
Var<S> log(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().array().log().matrix();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    tp.node(ai).gradient.array() +=
        tp.node(self).gradient.array() / tp.node(ai).value.array();
  });
}

template <class S>
Var<S> square(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().array().square().matrix();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    tp.node(ai).gradient.array() +=
        S(2) * tp.node(self).gradient.array() * tp.node(ai).value.array();
  });
}

// x log x with the entropy convention 0*log(0) := 0 (derivative 0 there too).
template <class S>
Var<S> xlogx(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v(a.value().rows(), a.value().cols());
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) {
      const S p = a.value()(i, j);
      v(i, j) = p > S(0) ? p * std::log(p) : S(0);
    }
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.node(self).gradient;
    const Mat<S>& x = tp.node(ai).value;
    Mat<S>& ga = tp.node(ai).gradient;
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < x.cols(); ++j)
        if (x(i, j) > S(0)) ga(i, j) += g(i, j) * (std::log(x(i, j)) + S(1));
  });
}

// ---- linear algebra --------------------------------------------------------

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  detail::check_same_tape(a, b, "matmul");
  Tape<S>& t = *a.tape;
  if (a.value().cols() != b.value().rows())
    throw DimensionError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  Mat<S> v = a.value() * b.value();
  const int ai = a.idx, bi = b.idx;
  return t.make(std::move(v), detail::needs(a) || detail::needs(b), {ai, bi},
                [ai, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  tp.node(ai).gradient.noalias() += g * tp.node(bi).value.transpose();
                  tp.node(bi).gradient.noalias() += tp.node(ai).value.transpose() * g;
                });
}

template <class S>
Var<S> transpose(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().transpose();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    tp.node(ai).gradient += tp.node(self).gradient.transpose();
  });
}

// x: B x d, bias: 1 x d, broadcast-added to every row.
template <class S>
Var<S> add_rowvec(Var<S> x, Var<S> bias) {
  detail::check_same_tape(x, bias, "add_rowvec");
  Tape<S>& t = *x.tape;
  if (bias.value().rows() != 1 || bias.value().cols() != x.value().cols())
    throw DimensionError("add_rowvec: bias " + shape_str(bias.value()) + " vs x " +
                         shape_str(x.value()));
  Mat<S> v = x.value();
  v.rowwise() += bias.value().row(0);
  const int xi = x.idx, bi = bias.idx;
  return t.make(std::move(v), detail::needs(x) || detail::needs(bias), {xi, bi},
                [xi, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  tp.node(xi).gradient += g;
                  tp.node(bi).gradient.row(0) += g.colwise().sum();
                });
}

// out[i,j] = sum_k x[i,k] W[k,j] + b[j]
template <class S>
Var<S> linear(Var<S> x, Var<S> w, Var<S> bias) {
  return add_rowvec(matmul(x, w), bias);
}

// ---- normalizations --------------------------------------------------------

template <class S>
Var<S> softmax_rows(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = bdcl::softmax_rows(a.value());
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.node(self).gradient;
    const Mat<S>& y = tp.node(self).value;
    Mat<S>& ga = tp.node(ai).gradient;
    for (Index i = 0; i < y.rows(); ++i) {
      const S dot = (g.row(i).array() * y.row(i).array()).sum();
      ga.row(i).array() += (g.row(i).array() - dot) * y.row(i).array();
    }
  });
}

template <class S>
Var<S> l2_normalize_cols(Var<S> a, S eps) {
  Tape<S>& t = *a.tape;
  Mat<S> norms = col_norms(a.value());
  Mat<S> v = bdcl::l2_normalize_cols(a.value(), eps);
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai},
                [ai, eps, norms](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  const Mat<S>& y = tp.node(self).value;
                  Mat<S>& ga = tp.node(ai).gradient;
                  for (Index j = 0; j < y.cols(); ++j) {
                    const S n = norms(0, j);
                    if (n < eps) {
                      ga.col(j) += g.col(j) / eps;
                    } else {
                      const S d = y.col(j).dot(g.col(j));
                      ga.col(j) += (g.col(j) - y.col(j) * d) / n;
                    }
                  }
                });
}

template <class S>
Var<S> l2_normalize_rows(Var<S> a, S eps) {
  Tape<S>& t = *a.tape;
  Mat<S> norms(a.value().rows(), 1);
  for (Index i = 0; i < a.value().rows(); ++i) norms(i, 0) = a.value().row(i).norm();
  Mat<S> v = bdcl::l2_normalize_rows(a.value(), eps);
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai},
                [ai, eps, norms](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.node(self).gradient;
                  const Mat<S>& y = tp.node(self).value;
                  Mat<S>& ga = tp.node(ai).gradient;
                  for (Index i = 0; i < y.rows(); ++i) {
                    const S n = norms(i, 0);
                    if (n < eps) {
                      ga.row(i) += g.row(i) / eps;
                    } else {
                      const S d = y.row(i).dot(g.row(i));
                      ga.row(i) += (g.row(i) - y.row(i) * d) / n;
                    }
                  }
                });
}

// ---- reductions ------------------------------------------------------------

template <class S>
Var<S> row_sum(Var<S> a) {  // B x d -> B x 1
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().rowwise().sum();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.node(self).gradient;
    Mat<S>& ga = tp.node(ai).gradient;
    for (Index j = 0; j < ga.cols(); ++j) ga.col(j) += g.col(0);
  });
}

template <class S>
Var<S> col_mean(Var<S> a) {  // B x d -> 1 x d
  Tape<S>& t = *a.tape;
  const S inv = S(1) / static_cast<S>(a.value().rows());
  Mat<S> v = a.value().colwise().sum() * inv;
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai, inv](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.node(self).gradient;
    Mat<S>& ga = tp.node(ai).gradient;
    for (Index i = 0; i < ga.rows(); ++i) ga.row(i) += inv * g.row(0);
  });
}

template <class S>
Var<S> diag_as_col(Var<S> a) {  // n x n -> n x 1
  Tape<S>& t = *a.tape;
  if (a.value().rows() != a.value().cols())
    throw DimensionError("diag_as_col: matrix must be square, got " + shape_str(a.value()));
  Mat<S> v = a.value().diagonal();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.node(self).gradient;
    Mat<S>& ga = tp.node(ai).gradient;
    for (Index i = 0; i < ga.rows(); ++i) ga(i, i) += g(i, 0);
  });
}

template <class S>
Var<S> sum(Var<S> a) {  // -> 1 x 1
  Tape<S>& t = *a.tape;
  Mat<S> v(1, 1);
  v(0, 0) = a.value().sum();
  const int ai = a.idx;
  return t.make(std::move(v), detail::needs(a), {ai}, [ai](Tape<S>& tp, int self) {
    tp.node(ai).gradient.array() += tp.node(self).gradient(0, 0);
  });
}

}  // namespace bdcl::ad
