#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "srl/numerics/mlp.hpp"

namespace srl::nn {

/// Compares an analytic gradient against central finite differences.
///
/// `loss(params) -> double` evaluates the scalar loss and
/// `analytic(params) -> BasicGradBuffer<double>` returns its gradient (normally
/// built with mlp_backward). The check runs in double precision. Returns the
/// maximum over parameters of |a - n| / max(|a|, |n|, 1e-8).
template <class Loss, class Analytic>
double grad_check(const BasicMlpParams<double>& params, Loss&& loss, Analytic&& analytic,
                  double step = 1e-5) {
  const BasicGradBuffer<double> grad = analytic(params);
  if (!grad.matches(params)) throw std::invalid_argument("grad_check: gradient shape mismatch");

  BasicMlpParams<double> probe = params;
  double worst = 0.0;
  auto check_block = [&](double* p, const double* g, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss(std::as_const(probe));
      p[i] = saved - step;
      const double down = loss(std::as_const(probe));
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = g[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  };
  for (std::size_t l = 0; l < probe.num_layers(); ++l) {
    check_block(probe.weights[l].data(), grad.weights[l].data(), probe.weights[l].size());
    check_block(probe.biases[l].data(), grad.biases[l].data(), probe.biases[l].size());
  }
  return worst;
}

}  // namespace srl::nn
