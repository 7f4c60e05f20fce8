#pragma once

// Log-densities, entropies and their gradients for the two policy heads.

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srl {

inline constexpr double kBetaClamp = 1e-6;

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct BetaStats {
  double log_prob = 0.0;
  double entropy = 0.0;
  double dlogp_dalpha = 0.0, dlogp_dbeta = 0.0;
  double dentropy_dalpha = 0.0, dentropy_dbeta = 0.0;
};

/// Beta(alpha, beta) log-density at z in (0, 1), differential entropy, and
/// the analytic derivatives of both with respect to alpha and beta.
inline BetaStats beta_head_stats(double alpha, double beta, double z) {
  if (!(alpha > 0.0 && beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw std::invalid_argument("beta parameters must be positive and finite");
  if (!(z > 0.0 && z < 1.0))
    throw std::invalid_argument("beta sample z=" + std::to_string(z) + " is not strictly inside (0, 1)");
  using boost::math::digamma;
  using boost::math::trigamma;
  const double log_beta_fn = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
  const double psi_a = digamma(alpha), psi_b = digamma(beta), psi_ab = digamma(alpha + beta);
  const double tri_a = trigamma(alpha), tri_b = trigamma(beta), tri_ab = trigamma(alpha + beta);

  BetaStats s;
  s.log_prob = (alpha - 1.0) * std::log(z) + (beta - 1.0) * std::log1p(-z) - log_beta_fn;
  s.entropy = log_beta_fn - (alpha - 1.0) * psi_a - (beta - 1.0) * psi_b +
              (alpha + beta - 2.0) * psi_ab;
  s.dlogp_dalpha = std::log(z) - psi_a + psi_ab;
  s.dlogp_dbeta = std::log1p(-z) - psi_b + psi_ab;
  s.dentropy_dalpha = -(alpha - 1.0) * tri_a + (alpha + beta - 2.0) * tri_ab;
  s.dentropy_dbeta = -(beta - 1.0) * tri_b + (alpha + beta - 2.0) * tri_ab;
  return s;
}

struct CategoricalStats {
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<double> probs;
  std::vector<double> dlogp_dlogits;
  std::vector<double> dentropy_dlogits;
};

inline CategoricalStats categorical_head_stats(std::span<const float> logits, int index) {
  const int k = static_cast<int>(logits.size());
  if (k == 0) throw std::invalid_argument("categorical head has no logits");
  if (index < 0 || index >= k)
    throw std::invalid_argument("categorical action " + std::to_string(index) + " out of range");
  double mx = -INFINITY;
  for (float l : logits) {
    if (!std::isfinite(l)) throw std::invalid_argument("categorical logits must be finite");
    mx = std::max(mx, static_cast<double>(l));
  }
  double z = 0.0;
  for (float l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);

  CategoricalStats s;
  s.probs.resize(logits.size());
  std::vector<double> logp(logits.size());
  for (int j = 0; j < k; ++j) {
    logp[j] = logits[j] - log_z;
    s.probs[j] = std::exp(logp[j]);
    if (s.probs[j] > 0.0) s.entropy -= s.probs[j] * logp[j];
  }
  s.log_prob = logp[index];
  s.dlogp_dlogits.resize(logits.size());
  s.dentropy_dlogits.resize(logits.size());
  for (int j = 0; j < k; ++j) {
    s.dlogp_dlogits[j] = (j == index ? 1.0 : 0.0) - s.probs[j];
    s.dentropy_dlogits[j] = -s.probs[j] * (logp[j] + s.entropy);
  }
  return s;
}

}  // namespace srl
