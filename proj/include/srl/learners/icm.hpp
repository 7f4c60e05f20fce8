#pragma once

// Intrinsic curiosity: an embedding trained through an inverse-dynamics
// head, and a forward model whose prediction error is the bonus.

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "srl/core/rng.hpp"
#include "srl/numerics/adam.hpp"
#include "srl/numerics/mlp.hpp"
#include "srl/policy/distributions.hpp"
#include "srl/trajectory.hpp"

namespace srl {

struct IcmConfig {
  double intrinsic_weight = 0.01;
  double module_lr_scale = 0.05;
  int feature_dim = 32;
  std::vector<int> hidden{128, 128};
  double forward_loss_weight = 0.2;
  int batch_size = 128;
  int epochs = 1;

  void validate() const {
    if (intrinsic_weight < 0.0 || module_lr_scale < 0.0 || forward_loss_weight < 0.0)
      throw std::invalid_argument("curiosity weights must be non-negative");
    if (feature_dim < 1 || batch_size < 1 || epochs < 1)
      throw std::invalid_argument("curiosity sizes must be positive");
  }
};

/// One-hot for discrete actions, box-normalised to [-1, 1] for continuous.
inline std::vector<float> encode_action(const ActionSpace& space, const Action& a) {
  if (space.is_discrete()) {
    std::vector<float> v(static_cast<std::size_t>(space.count), 0.0f);
    v[static_cast<std::size_t>(a.index)] = 1.0f;
    return v;
  }
  std::vector<float> v(a.values.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 2.0f * (a.values[i] - space.low[i]) / (space.high[i] - space.low[i]) - 1.0f;
  return v;
}

inline int encoded_action_size(const ActionSpace& space) {
  return space.is_discrete() ? space.count : space.dim();
}

struct IcmModule {
  ActionSpace space;
  nn::MlpParams embed;     // s -> phi(s)
  nn::MlpParams inverse;   // [phi(s) | phi(s')] -> action logits or values
  nn::MlpParams forward;   // [phi(s) | a] -> phi(s')
  nn::AdamState embed_opt, inverse_opt, forward_opt;

  static IcmModule create(int state_dim, const ActionSpace& space, const IcmConfig& cfg,
                          const nn::AdamConfig& policy_adam, Rng& rng) {
    cfg.validate();
    auto sizes = [&](int in, int out) {
      std::vector<int> s{in};
      s.insert(s.end(), cfg.hidden.begin(), cfg.hidden.end());
      s.push_back(out);
      return s;
    };
    IcmModule m;
    m.space = space;
    const int f = cfg.feature_dim, a = encoded_action_size(space);
    m.embed = nn::MlpParams::init(sizes(state_dim, f), rng);
    m.inverse = nn::MlpParams::init(sizes(2 * f, a), rng);
    m.forward = nn::MlpParams::init(sizes(f + a, f), rng);
    nn::AdamConfig adam = policy_adam;
    adam.learning_rate = policy_adam.learning_rate * cfg.module_lr_scale;
    m.embed_opt = nn::AdamState(m.embed, adam);
    m.inverse_opt = nn::AdamState(m.inverse, adam);
    m.forward_opt = nn::AdamState(m.forward, adam);
    return m;
  }
};

/// Half squared forward-prediction error in feature space, scaled by the
/// intrinsic weight.
inline double icm_reward(const IcmModule& m, std::span<const float> state, const Action& action,
                         std::span<const float> next_state, const IcmConfig& cfg) {
  const nn::Vector phi = nn::mlp_apply(m.embed, state);
  const nn::Vector phi_next = nn::mlp_apply(m.embed, next_state);
  std::vector<float> in(phi.data(), phi.data() + phi.size());
  const auto a = encode_action(m.space, action);
  in.insert(in.end(), a.begin(), a.end());
  const nn::Vector pred = nn::mlp_apply(m.forward, in);
  return cfg.intrinsic_weight * 0.5 * static_cast<double>((pred - phi_next).squaredNorm());
}

inline std::vector<double> icm_episode_rewards(const IcmModule& m, const Trajectory& t, const IcmConfig& cfg) {
  std::vector<double> r;
  r.reserve(t.length());
  for (const auto& s : t.steps) r.push_back(icm_reward(m, s.state, s.action, s.next_state, cfg));
  return r;
}

struct IcmStats {
  double inverse_loss = 0.0;
  double forward_loss = 0.0;
  int steps = 0;
};

/// Minibatch updates over every transition of `episodes`. The inverse loss
/// (cross-entropy or squared error) trains the embedding; the forward loss
/// trains only the forward model.
inline IcmStats icm_update(IcmModule& m, const std::vector<const Trajectory*>& episodes, const IcmConfig& cfg,
                           Rng& rng) {
  cfg.validate();
  std::vector<const Step*> steps;
  for (const auto* t : episodes)
    for (const auto& s : t->steps) steps.push_back(&s);
  IcmStats stats;
  if (steps.empty()) return stats;

  const int f = cfg.feature_dim, a_dim = encoded_action_size(m.space);
  std::vector<std::size_t> order(steps.size());
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const auto n = static_cast<Eigen::Index>(end - begin);
      const int sdim = m.embed.input_size();
      nn::Matrix s(sdim, 2 * n), acts(a_dim, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Step& st = *steps[order[begin + static_cast<std::size_t>(j)]];
        s.col(j) = Eigen::Map<const nn::Vector>(st.state.data(), sdim);
        s.col(n + j) = Eigen::Map<const nn::Vector>(st.next_state.data(), sdim);
        const auto ae = encode_action(m.space, st.action);
        acts.col(j) = Eigen::Map<const nn::Vector>(ae.data(), a_dim);
      }
      const auto embed_cache = nn::mlp_forward_batch(m.embed, std::move(s));
      const nn::Matrix& phi = embed_cache.output();
      const double inv_n = 1.0 / static_cast<double>(n);

      nn::Matrix inv_in(2 * f, n);
      inv_in.topRows(f) = phi.leftCols(n);
      inv_in.bottomRows(f) = phi.rightCols(n);
      const auto inv_cache = nn::mlp_forward_batch(m.inverse, std::move(inv_in));
      const nn::Matrix& inv_out = inv_cache.output();
      nn::Matrix inv_grad(inv_out.rows(), n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Step& st = *steps[order[begin + static_cast<std::size_t>(j)]];
        if (m.space.is_discrete()) {
          const std::span<const float> logits(inv_out.col(j).data(), static_cast<std::size_t>(inv_out.rows()));
          const CategoricalStats cs = categorical_head_stats(logits, st.action.index);
          stats.inverse_loss -= cs.log_prob * inv_n;
          for (Eigen::Index k = 0; k < inv_out.rows(); ++k)
            inv_grad(k, j) = static_cast<float>(-cs.dlogp_dlogits[static_cast<std::size_t>(k)] * inv_n);
        } else {
          const nn::Vector err = inv_out.col(j) - acts.col(j);
          stats.inverse_loss += 0.5 * err.squaredNorm() * inv_n;
          inv_grad.col(j) = err * static_cast<float>(inv_n);
        }
      }
      nn::GradBuffer inverse_grad(m.inverse);
      nn::Matrix dphi_pair;
      nn::mlp_backward_accumulate(m.inverse, inv_cache, inv_grad, inverse_grad, &dphi_pair);
      nn::Matrix dphi(f, 2 * n);
      dphi.leftCols(n) = dphi_pair.topRows(f);
      dphi.rightCols(n) = dphi_pair.bottomRows(f);
      nn::GradBuffer embed_grad = nn::mlp_backward(m.embed, embed_cache, dphi);

      nn::Matrix fwd_in(f + a_dim, n);
      fwd_in.topRows(f) = phi.leftCols(n);
      fwd_in.bottomRows(a_dim) = acts;
      const auto fwd_cache = nn::mlp_forward_batch(m.forward, std::move(fwd_in));
      const nn::Matrix err = fwd_cache.output() - phi.rightCols(n);
      stats.forward_loss += 0.5 * static_cast<double>(err.squaredNorm()) * inv_n;
      const nn::Matrix fwd_out_grad = err * static_cast<float>(cfg.forward_loss_weight * inv_n);
      nn::GradBuffer forward_grad = nn::mlp_backward(m.forward, fwd_cache, fwd_out_grad);

      const double clip = 5.0;
      nn::clipped_adam_step(m.embed, embed_grad, m.embed_opt, clip);
      nn::clipped_adam_step(m.inverse, inverse_grad, m.inverse_opt, clip);
      nn::clipped_adam_step(m.forward, forward_grad, m.forward_opt, clip);
      stats.steps += 1;
    }
  }
  if (stats.steps > 0) {
    stats.inverse_loss /= stats.steps;
    stats.forward_loss /= stats.steps;
  }
  return stats;
}

}  // namespace srl
