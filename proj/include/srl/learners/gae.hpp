#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace srl {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation over one episode.
///   delta_t = r_t + gamma * V_{t+1} - V_t
///   A_t     = delta_t + gamma * lambda * A_{t+1}
/// V_T is `terminal_value` when bootstrapping and 0 otherwise.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                             double lambda, bool bootstrap, double terminal_value = 0.0) {
  if (rewards.size() != values.size())
    throw std::invalid_argument("compute_gae: rewards and values differ in length");
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = bootstrap ? terminal_value : 0.0;
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
    next_value = values[t];
  }
  return out;
}

}  // namespace srl
