// adam.hpp -- Adam with bias correction, one moment pair per parameter
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bdcl/matrix.hpp"

namespace bdcl {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class S>
struct OptimizerState {
  AdamConfig cfg;
  std::int64_t step_count = 0;
  std::vector<Mat<S>> m;  // first moments, shapes match the parameters
  std::vector<Mat<S>> v;  // second moments

  void reset(const std::vector<const Mat<S>*>& params) {
    step_count = 0;
    m.clear();
    v.clear();
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Mat<S>* p : params) {
      m.push_back(Mat<S>::Zero(p->rows(), p->cols()));
      v.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    }
  }
};

// In-place update of every parameter from its gradient. Deterministic.
template <class S>
void adam_step(OptimizerState<S>& st, const std::vector<Mat<S>*>& params,
               const std::vector<const Mat<S>*>& grads) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw DimensionError("adam_step: params/grads/state length mismatch");
  st.step_count += 1;
  const S b1 = static_cast<S>(st.cfg.beta1);
  const S b2 = static_cast<S>(st.cfg.beta2);
  const S corr1 = S(1) - static_cast<S>(std::pow(st.cfg.beta1, double(st.step_count)));
  const S corr2 = S(1) - static_cast<S>(std::pow(st.cfg.beta2, double(st.step_count)));
  const S lr = static_cast<S>(st.cfg.lr);
  const S eps = static_cast<S>(st.cfg.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat<S>& p = *params[k];
    const Mat<S>& g = *grads[k];
    require_same_shape(p, g, "adam_step");
    require_same_shape(p, st.m[k], "adam_step(state)");
    st.m[k] = b1 * st.m[k] + (S(1) - b1) * g;
    st.v[k] = b2 * st.v[k] + (S(1) - b2) * g.cwiseProduct(g);
    const Mat<S> mhat = st.m[k] / corr1;
    const Mat<S> vhat = st.v[k] / corr2;
    p.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

}  // namespace bdcl
