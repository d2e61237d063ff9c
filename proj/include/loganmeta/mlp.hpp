#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace loganmeta::nn {

/// One dense layer: y = x * weight + bias, weight is fan_in x fan_out.
struct Layer {
  Matrix weight;
  std::vector<double> bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feed-forward stack with ReLU after every layer but the last.
struct MlpParams {
  std::vector<Layer> layers;

  static MlpParams zeros(std::span<const std::size_t> dims) {
    if (dims.size() < 2) throw Error(ErrorCode::ShapeMismatch, "network needs at least two dims");
    MlpParams p;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      p.layers.push_back({Matrix(dims[i], dims[i + 1]), std::vector<double>(dims[i + 1], 0.0)});
    return p;
  }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    if (layers.empty()) return d;
    d.push_back(layers.front().weight.rows());
    for (const auto& l : layers) d.push_back(l.weight.cols());
    return d;
  }

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }

  /// Visits every tensor as (name, flat values). Names are W1, b1, W2, ...
  template <typename F>
  void for_each_tensor(F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      f("W" + std::to_string(i + 1), std::span<double>(layers[i].weight.data()));
      f("b" + std::to_string(i + 1), std::span<double>(layers[i].bias));
    }
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      f("W" + std::to_string(i + 1), std::span<const double>(layers[i].weight.data()));
      f("b" + std::to_string(i + 1), std::span<const double>(layers[i].bias));
    }
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, std::span<const double> t) {
      for (double v : t) ok = ok && std::isfinite(v);
    });
    return ok;
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

using EncoderParams = MlpParams;

inline std::vector<std::size_t> encoder_dims(std::size_t input_dim = 495, std::size_t hidden = 128,
                                             std::size_t embedding_dim = 32) {
  return {input_dim, hidden, hidden, embedding_dim};
}

/// Weights uniform in +-sqrt(1/fan_in), biases zero.
inline MlpParams init_params(std::span<const std::size_t> dims, Rng& rng) {
  auto p = MlpParams::zeros(dims);
  for (auto& layer : p.layers) {
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.weight.rows()));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  }
  return p;
}

struct DropoutConfig {
  double p = 0.5;
  /// Also drop units of the final (embedding) layer.
  bool on_output = false;
};

/// Everything backward needs. masks[i] scales the output of layer i; an
/// empty matrix means no dropout there.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   ///< pre-activation of each layer
  std::vector<Matrix> post;  ///< layer outputs after activation and dropout
  std::vector<Matrix> masks;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// Forward pass with explicitly supplied dropout masks (one per layer; empty
/// entries disable dropout for that layer).
inline ForwardResult forward_with_masks(const MlpParams& params, const Matrix& x,
                                        std::vector<Matrix> masks) {
  if (params.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "network has no layers");
  if (x.cols() != params.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.cols()) +
                                              " columns, network expects " +
                                              std::to_string(params.input_dim()));
  masks.resize(params.layers.size());
  ForwardResult res;
  res.cache.input = x;
  const Matrix* h = &res.cache.input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Matrix z = affine(*h, layer.weight, layer.bias);
    Matrix a = z;
    if (i + 1 < params.layers.size())
      for (double& v : a.data()) v = v < 0.0 ? 0.0 : v;  // keeps NaN visible
    if (!masks[i].empty()) {
      require_shape(masks[i], a.rows(), a.cols(), "dropout mask");
      for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] *= masks[i].data()[k];
    }
    res.cache.pre.push_back(std::move(z));
    res.cache.post.push_back(std::move(a));
    h = &res.cache.post.back();
  }
  res.cache.masks = std::move(masks);
  res.output = res.cache.post.back();
  return res;
}

/// Inverted-dropout masks: each entry is 0 with probability p, else 1/(1-p).
inline std::vector<Matrix> sample_dropout_masks(const MlpParams& params, std::size_t batch,
                                                const DropoutConfig& dropout, Rng& rng) {
  std::vector<Matrix> masks(params.layers.size());
  if (dropout.p <= 0.0) return masks;
  const double keep_scale = 1.0 / (1.0 - dropout.p);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const bool last = i + 1 == params.layers.size();
    if (last && !dropout.on_output) continue;
    masks[i] = Matrix(batch, params.layers[i].weight.cols());
    for (double& m : masks[i].data()) m = rng.uniform01() < dropout.p ? 0.0 : keep_scale;
  }
  return masks;
}

inline ForwardResult forward(const MlpParams& params, const Matrix& x, bool train_mode,
                             const DropoutConfig& dropout, Rng& rng) {
  if (!(dropout.p >= 0.0 && dropout.p < 1.0))
    throw Error(ErrorCode::InvalidConfig, "dropout probability must be in [0, 1)");
  std::vector<Matrix> masks;
  if (train_mode) masks = sample_dropout_masks(params, x.rows(), dropout, rng);
  return forward_with_masks(params, x, std::move(masks));
}

/// Eval-mode forward: dropout is the identity.
inline Matrix forward_eval(const MlpParams& params, const Matrix& x) {
  return forward_with_masks(params, x, {}).output;
}

struct Gradients {
  MlpParams params;  ///< same shapes as the network
  Matrix input;
};

/// Exact gradients of sum_{rows} <grad_output, f(x)>; parameter gradients sum
/// over the batch.
inline Gradients backward(const MlpParams& params, const ForwardCache& cache,
                          const Matrix& grad_output) {
  const std::size_t n_layers = params.layers.size();
  if (cache.pre.size() != n_layers || cache.input.cols() != params.input_dim())
    throw Error(ErrorCode::StaleCache, "cache does not belong to this network");
  for (std::size_t i = 0; i < n_layers; ++i)
    if (cache.pre[i].cols() != params.layers[i].weight.cols() ||
        cache.pre[i].rows() != cache.input.rows())
      throw Error(ErrorCode::StaleCache, "cached activations have the wrong shape");
  if (grad_output.rows() != cache.input.rows() || grad_output.cols() != params.output_dim())
    throw Error(ErrorCode::StaleCache, "grad_output shape disagrees with cached forward pass");

  Gradients g;
  g.params = MlpParams::zeros(params.dims());
  Matrix delta = grad_output;
  for (std::size_t step = 0; step < n_layers; ++step) {
    const std::size_t i = n_layers - 1 - step;
    if (!cache.masks[i].empty())
      for (std::size_t k = 0; k < delta.size(); ++k) delta.data()[k] *= cache.masks[i].data()[k];
    if (i + 1 < n_layers)
      for (std::size_t k = 0; k < delta.size(); ++k)
        if (!(cache.pre[i].data()[k] > 0.0)) delta.data()[k] = 0.0;
    const Matrix& layer_in = i == 0 ? cache.input : cache.post[i - 1];
    auto& gl = g.params.layers[i];
    accumulate_at_b(layer_in, delta, gl.weight);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto dr = delta.row(r);
      for (std::size_t c = 0; c < dr.size(); ++c) gl.bias[c] += dr[c];
    }
    delta = mul_bt(delta, params.layers[i].weight);
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace loganmeta::nn
