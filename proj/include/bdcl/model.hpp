// model.hpp -- per-view autoencoders plus contrastive and clustering heads
//
// Each view owns an independent encoder/decoder pair and two single-layer
// heads: one mapping the embedding into the contrastive space (m -> q) and one
// mapping it into the cluster space (m -> K, followed by a row softmax).
// Hidden layers use ReLU; the embedding layer and both heads are linear.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdcl/adam.hpp"
#include "bdcl/matrix.hpp"
#include "bdcl/ops.hpp"
#include "bdcl/rng.hpp"
#include "bdcl/tape.hpp"

namespace bdcl {

struct ViewSpec {
  Index input_dim = 0;               // d_v
  std::vector<Index> hidden;         // encoder hidden sizes; decoder mirrors them
  Index embed_dim = 0;               // m
};

template <class S>
struct LinearLayer {
  Mat<S> w;  // in x out
  Mat<S> b;  // 1 x out
};

template <class S>
struct ModelState {
  struct ViewNet {
    std::vector<LinearLayer<S>> encoder;  // d -> hidden... -> m
    std::vector<LinearLayer<S>> decoder;  // m -> reversed hidden... -> d
    LinearLayer<S> contrastive_head;      // m -> q
    LinearLayer<S> clustering_head;       // m -> K
  };

  std::vector<ViewSpec> specs;
  Index contrastive_dim = 0;  // q
  Index num_clusters = 0;     // K
  std::vector<ViewNet> views;

  Index num_views() const { return static_cast<Index>(views.size()); }
  Index embed_dim() const { return specs.empty() ? 0 : specs.front().embed_dim; }

  // Canonical parameter order: per view, encoder W/b pairs, decoder W/b pairs,
  // contrastive head, clustering head. Every consumer (optimizer wiring,
  // checkpoints, gradient checks) relies on this order.
  template <class F>
  void for_each_autoencoder_param(F&& f) {
    for (auto& vn : views) {
      for (auto& l : vn.encoder) {
        f(l.w);
        f(l.b);
      }
      for (auto& l : vn.decoder) {
        f(l.w);
        f(l.b);
      }
    }
  }

  template <class F>
  void for_each_autoencoder_param(F&& f) const {
    for (const auto& vn : views) {
      for (const auto& l : vn.encoder) {
        f(l.w);
        f(l.b);
      }
      for (const auto& l : vn.decoder) {
        f(l.w);
        f(l.b);
      }
    }
  }

  template <class F>
  void for_each_head_param(F&& f) {
    for (auto& vn : views) {
      f(vn.contrastive_head.w);
      f(vn.contrastive_head.b);
      f(vn.clustering_head.w);
      f(vn.clustering_head.b);
    }
  }

  template <class F>
  void for_each_head_param(F&& f) const {
    for (const auto& vn : views) {
      f(vn.contrastive_head.w);
      f(vn.contrastive_head.b);
      f(vn.clustering_head.w);
      f(vn.clustering_head.b);
    }
  }

  template <class F>
  void for_each_param(F&& f) {
    for (auto& vn : views) {
      for (auto& l : vn.encoder) {
        f(l.w);
        f(l.b);
      }
      for (auto& l : vn.decoder) {
        f(l.w);
        f(l.b);
      }
      f(vn.contrastive_head.w);
      f(vn.contrastive_head.b);
      f(vn.clustering_head.w);
      f(vn.clustering_head.b);
    }
  }

  template <class F>
  void for_each_param(F&& f) const {
    for (const auto& vn : views) {
      for (const auto& l : vn.encoder) {
        f(l.w);
        f(l.b);
      }
      for (const auto& l : vn.decoder) {
        f(l.w);
        f(l.b);
      }
      f(vn.contrastive_head.w);
      f(vn.contrastive_head.b);
      f(vn.clustering_head.w);
      f(vn.clustering_head.b);
    }
  }
};

namespace detail {

// Kaiming-style fan-in scaling: uniform on [-sqrt(6/fan_in), sqrt(6/fan_in)],
// which has standard deviation sqrt(2/fan_in). Biases start at zero.
template <class S>
LinearLayer<S> init_linear(Index in, Index out, std::uint64_t seed) {
  Rng rng(seed);
  const S bound = static_cast<S>(std::sqrt(6.0 / static_cast<double>(in)));
  LinearLayer<S> l;
  l.w = rng.template uniform<S>(in, out, -bound, bound);
  l.b = Mat<S>::Zero(1, out);
  return l;
}

template <class S>
std::vector<LinearLayer<S>> init_stack(const std::vector<Index>& dims, std::uint64_t seed) {
  std::vector<LinearLayer<S>> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    layers.push_back(init_linear<S>(dims[i], dims[i + 1], mix_seed(seed, i)));
  return layers;
}

inline std::vector<Index> encoder_dims(const ViewSpec& s) {
  std::vector<Index> d{s.input_dim};
  d.insert(d.end(), s.hidden.begin(), s.hidden.end());
  d.push_back(s.embed_dim);
  return d;
}

inline std::vector<Index> decoder_dims(const ViewSpec& s) {
  std::vector<Index> d{s.embed_dim};
  d.insert(d.end(), s.hidden.rbegin(), s.hidden.rend());
  d.push_back(s.input_dim);
  return d;
}

}  // namespace detail

template <class S>
ModelState<S> init_model(const std::vector<ViewSpec>& specs, Index q, Index k,
                         std::uint64_t seed) {
  if (specs.size() < 2) throw ConfigError("init_model: need at least 2 views");
  if (k < 2) throw ConfigError("init_model: need at least 2 clusters");
  if (q < 1) throw ConfigError("init_model: contrastive dim must be >= 1");
  const Index m = specs.front().embed_dim;
  for (const auto& s : specs) {
    if (s.input_dim < 1 || s.embed_dim < 1)
      throw ConfigError("init_model: view dims must be >= 1");
    if (s.embed_dim != m)
      throw ConfigError("init_model: all views must share the embedding dim");
    for (Index h : s.hidden)
      if (h < 1) throw ConfigError("init_model: hidden sizes must be >= 1");
  }
  if (!(q < m))
    throw ConfigError("init_model: contrastive dim q must be < embedding dim m");

  ModelState<S> model;
  model.specs = specs;
  model.contrastive_dim = q;
  model.num_clusters = k;
  model.views.resize(specs.size());
  for (std::size_t v = 0; v < specs.size(); ++v) {
    auto& vn = model.views[v];
    vn.encoder = detail::init_stack<S>(detail::encoder_dims(specs[v]), mix_seed(seed, v, 0));
    vn.decoder = detail::init_stack<S>(detail::decoder_dims(specs[v]), mix_seed(seed, v, 1));
    vn.contrastive_head = detail::init_linear<S>(m, q, mix_seed(seed, v, 2));
    vn.clustering_head = detail::init_linear<S>(m, k, mix_seed(seed, v, 3));
  }
  return model;
}

// ---- forward (eval path, no tape) ------------------------------------------

// One batch through every view. Rows of p and p_neighbor are probability
// distributions over the K clusters.
template <class S>
struct ForwardBundle {
  std::vector<Mat<S>> z;           // B x m
  std::vector<Mat<S>> xhat;        // B x d_v
  std::vector<Mat<S>> h;           // B x q
  std::vector<Mat<S>> p;           // B x K
  std::vector<Mat<S>> p_neighbor;  // B x K
};

// Adds isotropic Gaussian noise of scale sigma; sigma == 0 returns z
// unchanged, bit for bit.
template <class S>
Mat<S> sample_neighbors(const Mat<S>& z, S sigma, std::uint64_t seed) {
  if (sigma < S(0)) throw ContractError("sample_neighbors: sigma must be >= 0");
  if (sigma == S(0)) return z;
  Rng rng(seed);
  return z + sigma * rng.template gaussian<S>(z.rows(), z.cols());
}

namespace detail {

// ReLU between layers, linear output on the last one.
template <class S>
Mat<S> run_stack(const std::vector<LinearLayer<S>>& layers, const Mat<S>& x) {
  Mat<S> a = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    a = linear(a, layers[i].w, layers[i].b);
    if (i + 1 < layers.size()) a = relu(a);
  }
  return a;
}

}  // namespace detail

template <class S>
ForwardBundle<S> forward_views(const ModelState<S>& model,
                               const std::vector<Mat<S>>& batch, S sigma,
                               std::uint64_t noise_seed) {
  if (static_cast<Index>(batch.size()) != model.num_views())
    throw DimensionError("forward_views: batch has " + std::to_string(batch.size()) +
                         " views, model expects " + std::to_string(model.num_views()));
  ForwardBundle<S> out;
  for (std::size_t v = 0; v < batch.size(); ++v) {
    const auto& vn = model.views[v];
    if (batch[v].cols() != model.specs[v].input_dim)
      throw DimensionError("forward_views: view " + std::to_string(v) + " has dim " +
                           std::to_string(batch[v].cols()) + ", expected " +
                           std::to_string(model.specs[v].input_dim));
    Mat<S> z = detail::run_stack(vn.encoder, batch[v]);
    out.xhat.push_back(detail::run_stack(vn.decoder, z));
    out.h.push_back(linear(z, vn.contrastive_head.w, vn.contrastive_head.b));
    out.p.push_back(softmax_rows(linear(z, vn.clustering_head.w, vn.clustering_head.b)));
    if (sigma == S(0)) {
      out.p_neighbor.push_back(out.p.back());
    } else {
      Mat<S> zn = sample_neighbors(z, sigma, mix_seed(noise_seed, v));
      out.p_neighbor.push_back(
          softmax_rows(linear(zn, vn.clustering_head.w, vn.clustering_head.b)));
    }
    out.z.push_back(std::move(z));
  }
  return out;
}

// ---- forward (tape path, used for training) --------------------------------

enum class Phase { kPretrain, kClustering };

// The same graph as forward_views but built on a tape, with the weights as
// trainable leaves. param_vars/param_ptrs line up index for index, in the
// canonical parameter order of the active phase.
template <class S>
struct TapeForward {
  std::vector<ad::Var<S>> x;  // constants
  std::vector<ad::Var<S>> z, xhat, h, p, p_neighbor;
  std::vector<ad::Var<S>> param_vars;
  std::vector<Mat<S>*> param_ptrs;
};

namespace detail {

template <class S>
ad::Var<S> run_stack_tape(ad::Tape<S>& tape, std::vector<LinearLayer<S>>& layers,
                          ad::Var<S> x, TapeForward<S>& tf) {
  ad::Var<S> a = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    ad::Var<S> w = ad::param(tape, layers[i].w);
    ad::Var<S> b = ad::param(tape, layers[i].b);
    tf.param_vars.push_back(w);
    tf.param_ptrs.push_back(&layers[i].w);
    tf.param_vars.push_back(b);
    tf.param_ptrs.push_back(&layers[i].b);
    a = ad::linear(a, w, b);
    if (i + 1 < layers.size()) a = ad::relu(a);
  }
  return a;
}

}  // namespace detail

template <class S>
TapeForward<S> forward_views_tape(ad::Tape<S>& tape, ModelState<S>& model,
                                  const std::vector<Mat<S>>& batch, S sigma,
                                  std::uint64_t noise_seed, Phase phase) {
  if (static_cast<Index>(batch.size()) != model.num_views())
    throw DimensionError("forward_views_tape: view count mismatch");
  TapeForward<S> tf;
  for (std::size_t v = 0; v < batch.size(); ++v) {
    auto& vn = model.views[v];
    ad::Var<S> x = ad::constant(tape, batch[v]);
    tf.x.push_back(x);
    ad::Var<S> z = detail::run_stack_tape(tape, vn.encoder, x, tf);
    tf.z.push_back(z);
    tf.xhat.push_back(detail::run_stack_tape(tape, vn.decoder, z, tf));
    if (phase == Phase::kPretrain) continue;  // heads stay out of the graph

    ad::Var<S> cw = ad::param(tape, vn.contrastive_head.w);
    ad::Var<S> cb = ad::param(tape, vn.contrastive_head.b);
    tf.param_vars.push_back(cw);
    tf.param_ptrs.push_back(&vn.contrastive_head.w);
    tf.param_vars.push_back(cb);
    tf.param_ptrs.push_back(&vn.contrastive_head.b);
    tf.h.push_back(ad::linear(z, cw, cb));

    ad::Var<S> kw = ad::param(tape, vn.clustering_head.w);
    ad::Var<S> kb = ad::param(tape, vn.clustering_head.b);
    tf.param_vars.push_back(kw);
    tf.param_ptrs.push_back(&vn.clustering_head.w);
    tf.param_vars.push_back(kb);
    tf.param_ptrs.push_back(&vn.clustering_head.b);
    tf.p.push_back(ad::softmax_rows(ad::linear(z, kw, kb)));

    if (sigma == S(0)) {
      tf.p_neighbor.push_back(tf.p.back());
    } else {
      Mat<S> noise = sigma * Rng(mix_seed(noise_seed, v))
                                 .template gaussian<S>(z.value().rows(), z.value().cols());
      ad::Var<S> zn = ad::add(z, ad::constant(tape, std::move(noise)));
      tf.p_neighbor.push_back(ad::softmax_rows(ad::linear(zn, kw, kb)));
    }
  }
  return tf;
}

}  // namespace bdcl
