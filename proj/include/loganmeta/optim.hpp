#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "error.hpp"
#include "mlp.hpp"

namespace loganmeta::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  MlpParams m;
  MlpParams v;
  std::uint64_t step = 0;
  AdamWConfig config;

  static AdamWState for_params(const MlpParams& params, AdamWConfig config = {}) {
    return {MlpParams::zeros(params.dims()), MlpParams::zeros(params.dims()), 0, config};
  }
};

/// Decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// With weight_decay = 0 this is plain Adam.
inline void adamw_step(AdamWState& state, MlpParams& params, const MlpParams& grads, double lr) {
  if (params.dims() != grads.dims() || params.dims() != state.m.dims())
    throw Error(ErrorCode::ShapeMismatch, "optimizer, parameter and gradient shapes disagree");
  const auto& cfg = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  std::vector<std::span<double>> p_t, m_t, v_t;
  std::vector<std::span<const double>> g_t;
  params.for_each_tensor([&](const std::string&, std::span<double> t) { p_t.push_back(t); });
  state.m.for_each_tensor([&](const std::string&, std::span<double> t) { m_t.push_back(t); });
  state.v.for_each_tensor([&](const std::string&, std::span<double> t) { v_t.push_back(t); });
  grads.for_each_tensor([&](const std::string&, std::span<const double> t) { g_t.push_back(t); });

  for (std::size_t t = 0; t < p_t.size(); ++t) {
    for (std::size_t k = 0; k < p_t[t].size(); ++k) {
      const double g = g_t[t][k];
      double& m = m_t[t][k];
      double& v = v_t[t][k];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      double& theta = p_t[t][k];
      theta -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta);
    }
  }
}

/// Multi-step decay: base_lr * gamma^(number of milestones <= epoch).
struct LrSchedule {
  double base_lr = 1e-3;
  std::vector<int> milestones{150, 450};
  double gamma = 0.1;

  void validate() const {
    for (std::size_t i = 1; i < milestones.size(); ++i)
      if (milestones[i] <= milestones[i - 1])
        throw Error(ErrorCode::InvalidConfig, "lr milestones must be strictly increasing");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be in (0, 1]");
    if (!(base_lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "base_lr must be positive");
  }

  // Repeated multiplication, so 1e-3 decays to exactly 1e-4 and 1e-5.
  double lr_at(int epoch) const {
    double lr = base_lr;
    for (int m : milestones)
      if (m <= epoch) lr *= gamma;
    return lr;
  }
};

}  // namespace loganmeta::nn
