// losses.hpp -- training objectives built on the tape
//
// Six terms over a batch of B samples seen by V views:
//   reconstruction        (1/B) sum_v sum_i ||x_i^v - xhat_i^v||^2
//   instance contrastive  InfoNCE over the contrastive features h, with the
//                         positive excluded from the denominator
//   cluster consistency   (1/4B) sum_{u != v} sum_i (||p_i^u - p_i^v||^2
//                                         + ||p_i^u - pneighbor_i^v||^2)
//   assignment entropy    sum_v sum_j pbar_j log pbar_j  (pbar = column mean)
//   feature decoupling    (1/m^2) ||Zc^T Zc - I_m||_F^2 per view, Zc = Z with
//                         L2-normalized columns
//   cluster decoupling    same with the soft assignments P and I_K
//
// Ablation masks multiply individual terms by 0 or 1 inside the tape, so a
// disabled term contributes exactly zero gradient while its raw value is
// still reported in the breakdown.
#pragma once

#include <vector>

#include "bdcl/matrix.hpp"
#include "bdcl/model.hpp"
#include "bdcl/tape.hpp"

namespace bdcl {

struct LossWeights {
  double tau = 0.5;      // contrastive temperature
  double sigma = 0.001;  // neighbor noise scale
  double lambda1 = 1;    // weight on cluster-level terms
  double lambda2 = 1;    // weight on decoupling terms
};

struct LossMasks {
  double cc = 1;  // cluster consistency
  double fd = 1;  // feature decoupling
  double cd = 1;  // cluster decoupling
};

struct LossBreakdown {
  double l_ir = 0;
  double l_ic = 0;
  double l_cc = 0;
  double l_p = 0;
  double l_fd = 0;
  double l_cd = 0;
  double total = 0;
};

namespace detail {

template <class S>
ad::Var<S> accumulate(std::vector<ad::Var<S>>& terms) {
  if (terms.empty()) throw ContractError("loss accumulate: no terms");
  ad::Var<S> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
  return acc;
}

}  // namespace detail

// ---- reconstruction --------------------------------------------------------

template <class S>
ad::Var<S> recon_loss(ad::Tape<S>& tape, const std::vector<ad::Var<S>>& x,
                      const std::vector<ad::Var<S>>& xhat) {
  if (x.empty() || x.size() != xhat.size())
    throw ContractError("recon_loss: need matching non-empty view lists");
  const Index b = x.front().value().rows();
  std::vector<ad::Var<S>> terms;
  for (std::size_t v = 0; v < x.size(); ++v)
    terms.push_back(ad::sum(ad::square(ad::sub(x[v], xhat[v]))));
  return ad::scale(detail::accumulate(terms), S(1) / static_cast<S>(b));
}

// ---- instance contrastive --------------------------------------------------

// For each ordered view pair (u, v) and anchor i, the positive is sample i in
// the other view; negatives are every j != i in both views. Similarities are
// cosine (rows L2-normalized, then a plain dot product).
template <class S>
ad::Var<S> instance_contrastive_loss(ad::Tape<S>& tape,
                                     const std::vector<ad::Var<S>>& h, S tau) {
  if (h.size() < 2)
    throw ContractError("instance_contrastive_loss: need at least 2 views");
  if (tau <= S(0)) throw ContractError("instance_contrastive_loss: tau must be > 0");
  const Index b = h.front().value().rows();
  if (b < 2)
    throw ContractError("instance_contrastive_loss: batch size must be >= 2");

  const S inv_tau = S(1) / tau;
  std::vector<ad::Var<S>> hn;
  for (const auto& hv : h)
    hn.push_back(ad::l2_normalize_rows(hv, static_cast<S>(kNormEps)));

  std::vector<ad::Var<S>> terms;
  for (std::size_t u = 0; u < h.size(); ++u) {
    // self-similarities of view u, shared across all partner views
    ad::Var<S> s_uu = ad::scale(ad::matmul(hn[u], ad::transpose(hn[u])), inv_tau);
    ad::Var<S> e_uu = ad::exp(s_uu);
    ad::Var<S> uu_rows = ad::sub(ad::row_sum(e_uu), ad::diag_as_col(e_uu));
    for (std::size_t v = 0; v < h.size(); ++v) {
      if (v == u) continue;
      ad::Var<S> s_uv = ad::scale(ad::matmul(hn[u], ad::transpose(hn[v])), inv_tau);
      ad::Var<S> e_uv = ad::exp(s_uv);
      ad::Var<S> den =
          ad::add(uu_rows, ad::sub(ad::row_sum(e_uv), ad::diag_as_col(e_uv)));
      // -log(numerator/denominator) = log(den) - s_uv[i,i]
      ad::Var<S> per_i = ad::sub(ad::log(den), ad::diag_as_col(s_uv));
      terms.push_back(ad::sum(per_i));
    }
  }
  return ad::scale(detail::accumulate(terms), S(1) / (S(2) * static_cast<S>(b)));
}

// ---- cluster consistency ---------------------------------------------------

template <class S>
ad::Var<S> cluster_consistency_loss(ad::Tape<S>& tape,
                                    const std::vector<ad::Var<S>>& p,
                                    const std::vector<ad::Var<S>>& p_neighbor) {
  if (p.size() < 2)
    throw ContractError("cluster_consistency_loss: need at least 2 views");
  if (p.size() != p_neighbor.size())
    throw ContractError("cluster_consistency_loss: neighbor list size mismatch");
  const Index b = p.front().value().rows();
  std::vector<ad::Var<S>> terms;
  for (std::size_t u = 0; u < p.size(); ++u)
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (v == u) continue;
      terms.push_back(ad::sum(ad::square(ad::sub(p[u], p[v]))));
      terms.push_back(ad::sum(ad::square(ad::sub(p[u], p_neighbor[v]))));
    }
  return ad::scale(detail::accumulate(terms), S(1) / (S(4) * static_cast<S>(b)));
}

// ---- assignment entropy regularizer ----------------------------------------

// Negative entropy of the batch-mean assignment; minimizing it pushes the
// cluster usage toward uniform.
template <class S>
ad::Var<S> assignment_regularizer(ad::Tape<S>& tape,
                                  const std::vector<ad::Var<S>>& p) {
  if (p.empty()) throw ContractError("assignment_regularizer: no views");
  std::vector<ad::Var<S>> terms;
  for (const auto& pv : p)
    terms.push_back(ad::sum(ad::xlogx(ad::col_mean(pv))));
  return detail::accumulate(terms);
}

// ---- decoupling ------------------------------------------------------------

namespace detail {

// (1/n^2) ||Ac^T Ac - I_n||_F^2 with Ac = column-normalized A.
template <class S>
ad::Var<S> gram_offdiag_penalty(ad::Tape<S>& tape, ad::Var<S> a) {
  const Index n = a.value().cols();
  ad::Var<S> ac = ad::l2_normalize_cols(a, static_cast<S>(kNormEps));
  ad::Var<S> gram = ad::matmul(ad::transpose(ac), ac);
  ad::Var<S> eye = ad::constant(tape, Mat<S>(Mat<S>::Identity(n, n)));
  ad::Var<S> dev = ad::sum(ad::square(ad::sub(gram, eye)));
  return ad::scale(dev, S(1) / static_cast<S>(n * n));
}

}  // namespace detail

template <class S>
ad::Var<S> feature_decoupling_loss(ad::Tape<S>& tape,
                                   const std::vector<ad::Var<S>>& z) {
  if (z.empty()) throw ContractError("feature_decoupling_loss: no views");
  std::vector<ad::Var<S>> terms;
  for (const auto& zv : z) terms.push_back(detail::gram_offdiag_penalty(tape, zv));
  return detail::accumulate(terms);
}

template <class S>
ad::Var<S> cluster_decoupling_loss(ad::Tape<S>& tape,
                                   const std::vector<ad::Var<S>>& p) {
  if (p.empty()) throw ContractError("cluster_decoupling_loss: no views");
  std::vector<ad::Var<S>> terms;
  for (const auto& pv : p) terms.push_back(detail::gram_offdiag_penalty(tape, pv));
  return detail::accumulate(terms);
}

// ---- combined objective ----------------------------------------------------

template <class S>
struct TotalLoss {
  ad::Var<S> total;
  LossBreakdown breakdown;
};

// Full clustering-phase objective:
//   total = L_ir + L_ic + lambda1 * (mask_cc * L_cc + L_p)
//                + lambda2 * (mask_fd * L_fd + mask_cd * L_cd)
// The breakdown stores each term's unmasked value plus the masked total.
template <class S>
TotalLoss<S> total_loss(ad::Tape<S>& tape, const TapeForward<S>& tf,
                        const LossWeights& w, const LossMasks& masks) {
  ad::Var<S> l_ir = recon_loss(tape, tf.x, tf.xhat);
  ad::Var<S> l_ic = instance_contrastive_loss(tape, tf.h, static_cast<S>(w.tau));
  ad::Var<S> l_cc = cluster_consistency_loss(tape, tf.p, tf.p_neighbor);
  ad::Var<S> l_p = assignment_regularizer(tape, tf.p);
  ad::Var<S> l_fd = feature_decoupling_loss(tape, tf.z);
  ad::Var<S> l_cd = cluster_decoupling_loss(tape, tf.p);

  ad::Var<S> cluster_part = ad::scale(
      ad::add(ad::scale(l_cc, static_cast<S>(masks.cc)), l_p),
      static_cast<S>(w.lambda1));
  ad::Var<S> decouple_part =
      ad::scale(ad::add(ad::scale(l_fd, static_cast<S>(masks.fd)),
                        ad::scale(l_cd, static_cast<S>(masks.cd))),
                static_cast<S>(w.lambda2));
  ad::Var<S> total =
      ad::add(ad::add(l_ir, l_ic), ad::add(cluster_part, decouple_part));

  TotalLoss<S> out{total, {}};
  out.breakdown.l_ir = static_cast<double>(l_ir.value()(0, 0));
  out.breakdown.l_ic = static_cast<double>(l_ic.value()(0, 0));
  out.breakdown.l_cc = static_cast<double>(l_cc.value()(0, 0));
  out.breakdown.l_p = static_cast<double>(l_p.value()(0, 0));
  out.breakdown.l_fd = static_cast<double>(l_fd.value()(0, 0));
  out.breakdown.l_cd = static_cast<double>(l_cd.value()(0, 0));
  out.breakdown.total = static_cast<double>(total.value()(0, 0));
  return out;
}

}  // namespace bdcl
