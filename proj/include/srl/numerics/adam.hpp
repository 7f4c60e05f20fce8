#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "srl/numerics/mlp.hpp"

namespace srl::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double lr_decay = 0.999;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global-norm threshold; <= 0 disables
};

struct AdamState {
  std::uint64_t step_count = 0;
  GradBuffer first_moment;
  GradBuffer second_moment;
  double learning_rate = 1e-3;
  double lr_decay = 0.999;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const MlpParams& params, const AdamConfig& cfg)
      : first_moment(params),
        second_moment(params),
        learning_rate(cfg.learning_rate),
        lr_decay(cfg.lr_decay),
        beta1(cfg.beta1),
        beta2(cfg.beta2),
        epsilon(cfg.epsilon) {
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("adam learning rate must be positive");
    if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0))
      throw std::invalid_argument("adam lr_decay must lie in (0, 1]");
  }

  /// Applies lr_decay; called once per full update pass, not per step.
  void finish_update_pass() { learning_rate *= lr_decay; }
};

struct AdamResult {
  bool applied = true;
  std::string diagnostic;
};

/// One bias-corrected Adam step. A gradient with non-finite entries is
/// skipped (parameters, moments and step_count untouched). An all-zero
/// gradient advances step_count and decays the moments but leaves the
/// parameters where they are, whatever momentum has accumulated.
inline AdamResult adam_step(MlpParams& params, const GradBuffer& grads, AdamState& state) {
  if (!grads.matches(params) || !state.first_moment.matches(params) ||
      !state.second_moment.matches(params))
    throw std::invalid_argument("adam_step: shape mismatch between parameters, gradients and state");
  if (!grads.all_finite()) return {false, "non-finite gradient; update skipped"};

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const float step = static_cast<float>(state.learning_rate * std::sqrt(bc2) / bc1);
  const float eps_hat = static_cast<float>(state.epsilon * std::sqrt(bc2));
  const float b1 = static_cast<float>(state.beta1);
  const float b2 = static_cast<float>(state.beta2);

  const bool zero_grad = grads.squared_norm() == 0.0;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m.array() = b1 * m.array() + (1.0f - b1) * g.array();
    v.array() = b2 * v.array() + (1.0f - b2) * g.array().square();
    if (!zero_grad) p.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l], grads.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
  if (!zero_grad) params.touch();
  return {};
}

/// Clips then steps; the usual call site for learners.
inline AdamResult clipped_adam_step(MlpParams& params, GradBuffer& grads, AdamState& state,
                                    double max_norm) {
  if (grads.all_finite()) clip_global_norm(grads, max_norm);
  return adam_step(params, grads, state);
}

}  // namespace srl::nn
