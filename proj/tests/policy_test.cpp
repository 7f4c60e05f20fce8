#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "srl/core/rng.hpp"
#include "srl/env/task.hpp"
#include "srl/policy/actor_critic.hpp"
#include "srl/policy/distributions.hpp"

using namespace srl;

namespace {

double integrate01(const std::function<double(double)>& f) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, 0.0, 1.0);
}

}  // namespace

TEST(Beta, UniformHasZeroLogDensity) {
  for (double z : {0.01, 0.3, 0.5, 0.99}) EXPECT_NEAR(beta_head_stats(1.0, 1.0, z).log_prob, 0.0, 1e-12);
}

TEST(Beta, SymmetricTwoTwoAtHalf) {
  // Beta(2,2) density is 6 z (1 - z).
  EXPECT_NEAR(beta_head_stats(2.0, 2.0, 0.5).log_prob, std::log(6.0 * 0.5 * 0.5), 1e-12);
  EXPECT_NEAR(beta_head_stats(2.0, 2.0, 0.5).log_prob, 0.4055, 1e-4);
}

TEST(Beta, DensityAndEntropyMatchIntegration) {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const double a = rng.uniform(1.0, 12.0), b = rng.uniform(1.0, 12.0);
    auto pdf = [&](double z) { return std::exp(beta_head_stats(a, b, z).log_prob); };
    const double mass = integrate01([&](double z) { return z <= 0 || z >= 1 ? 0.0 : pdf(z); });
    const double ent = integrate01([&](double z) {
      if (z <= 0 || z >= 1) return 0.0;
      const double p = pdf(z);
      return p > 0 ? -p * std::log(p) : 0.0;
    });
    EXPECT_NEAR(mass, 1.0, 1e-5) << a << " " << b;
    EXPECT_NEAR(beta_head_stats(a, b, 0.5).entropy, ent, 1e-5) << a << " " << b;
  }
}

TEST(Beta, ParameterDerivativesMatchFiniteDifferences) {
  Rng rng(4);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(1.05, 8.0), b = rng.uniform(1.05, 8.0), z = rng.uniform(0.02, 0.98);
    const BetaStats s = beta_head_stats(a, b, z);
    const double dla = (beta_head_stats(a + h, b, z).log_prob - beta_head_stats(a - h, b, z).log_prob) / (2 * h);
    const double dlb = (beta_head_stats(a, b + h, z).log_prob - beta_head_stats(a, b - h, z).log_prob) / (2 * h);
    const double dea = (beta_head_stats(a + h, b, z).entropy - beta_head_stats(a - h, b, z).entropy) / (2 * h);
    const double deb = (beta_head_stats(a, b + h, z).entropy - beta_head_stats(a, b - h, z).entropy) / (2 * h);
    auto rel = [](double x, double y) { return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-3}); };
    EXPECT_LT(rel(s.dlogp_dalpha, dla), 1e-4);
    EXPECT_LT(rel(s.dlogp_dbeta, dlb), 1e-4);
    EXPECT_LT(rel(s.dentropy_dalpha, dea), 1e-4);
    EXPECT_LT(rel(s.dentropy_dbeta, deb), 1e-4);
  }
}

TEST(Beta, RejectsBoundarySamples) {
  EXPECT_THROW(beta_head_stats(2.0, 2.0, 0.0), std::invalid_argument);
  EXPECT_THROW(beta_head_stats(2.0, 2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(beta_head_stats(0.0, 2.0, 0.5), std::invalid_argument);
}

TEST(Categorical, SymmetricLogits) {
  const std::vector<float> logits{0.0f, 0.0f};
  const auto s = categorical_head_stats(logits, 1);
  EXPECT_NEAR(s.probs[0], 0.5, 1e-12);
  EXPECT_NEAR(s.probs[1], 0.5, 1e-12);
}

TEST(Categorical, UniformOverTen) {
  const std::vector<float> logits(10, 0.3f);
  const auto s = categorical_head_stats(logits, 4);
  EXPECT_NEAR(s.log_prob, -std::log(10.0), 1e-12);
  EXPECT_NEAR(s.entropy, std::log(10.0), 1e-12);
}

TEST(Categorical, DominantLogit) {
  std::vector<float> logits(5, 0.0f);
  logits[2] = 50.0f;
  const auto s = categorical_head_stats(logits, 2);
  EXPECT_NEAR(s.probs[2], 1.0, 1e-12);
  EXPECT_NEAR(s.entropy, 0.0, 1e-12);
}

TEST(Categorical, EntropyMatchesBruteForceAndIsBounded) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(9));
    std::vector<float> logits(static_cast<std::size_t>(k));
    for (auto& l : logits) l = static_cast<float>(rng.uniform(-6.0, 6.0));
    const auto s = categorical_head_stats(logits, 0);
    double z = 0, h = 0, total = 0;
    for (float l : logits) z += std::exp(static_cast<double>(l));
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const double p = std::exp(static_cast<double>(logits[j])) / z;
      h -= p * std::log(p);
      total += s.probs[j];
    }
    EXPECT_NEAR(s.entropy, h, 1e-9);
    EXPECT_NEAR(total, 1.0, 1e-6);
    EXPECT_GE(s.entropy, 0.0);
    EXPECT_LE(s.entropy, std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST(Categorical, RejectsBadIndexAndLogits) {
  const std::vector<float> logits{0.0f, 1.0f};
  EXPECT_THROW(categorical_head_stats(logits, 2), std::invalid_argument);
  const std::vector<float> bad{0.0f, NAN};
  EXPECT_THROW(categorical_head_stats(bad, 0), std::invalid_argument);
}

// d log pi / d raw head output, against finite differences through the
// softplus transform (Beta) and the softmax (categorical).
TEST(PolicyHead, GradientsMatchFiniteDifferences) {
  Rng rng(19);
  const ActionSpace box = ActionSpace::box({-0.95f, -0.95f}, {0.95f, 0.95f});
  const ActionSpace disc = ActionSpace::discrete(6);
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-2}); };
  for (int trial = 0; trial < 40; ++trial) {
    const bool discrete = trial % 2 == 1;
    const ActionSpace& space = discrete ? disc : box;
    std::vector<float> head(static_cast<std::size_t>(space.head_size()));
    for (auto& h : head) h = static_cast<float>(rng.uniform(-2.0, 2.0));
    Action a = discrete ? Action::discrete(static_cast<int>(rng.below(6)))
                        : Action::continuous({static_cast<float>(rng.uniform(-0.9, 0.9)),
                                              static_cast<float>(rng.uniform(-0.9, 0.9))});
    const HeadEval ev = evaluate_head(space, head, a);
    for (std::size_t k = 0; k < head.size(); ++k) {
      auto up = head, down = head;
      up[k] += 1e-3f;
      down[k] -= 1e-3f;
      const double step = static_cast<double>(up[k]) - static_cast<double>(down[k]);
      const HeadEval eu = evaluate_head(space, up, a), ed = evaluate_head(space, down, a);
      const double dl = (eu.log_prob - ed.log_prob) / step;
      const double de = (eu.entropy - ed.entropy) / step;
      EXPECT_LT(rel(ev.dlogp[k], dl), 1e-4) << "trial " << trial << " k " << k;
      EXPECT_LT(rel(ev.dentropy[k], de), 1e-4) << "trial " << trial << " k " << k;
    }
  }
}

TEST(PolicyHead, ShapeParametersStayAboveOne) {
  const std::vector<float> head{-10.0f, 3.0f, -5.0f, 40.0f};
  const auto p = beta_parameters(head, 2);
  for (double v : p.alpha) EXPECT_GT(v, 1.0);
  for (double v : p.beta) EXPECT_GT(v, 1.0);
  // Far in the tail softplus underflows and the shape rounds to exactly 1.
  const auto tail = beta_parameters(std::vector<float>{-60.0f, -60.0f}, 1);
  EXPECT_GE(tail.alpha[0], 1.0);
  EXPECT_GE(tail.beta[0], 1.0);
}

TEST(PolicyHead, NonFiniteHeadRejected) {
  const std::vector<float> head{NAN, 0.0f};
  EXPECT_ANY_THROW(beta_parameters(head, 1));
}

TEST(PolicySampling, BetaActionsStrictlyInsideBounds) {
  GoalTaskSpec task;
  task.state_feature_dim = 2;
  task.goal_feature_dim = 2;
  task.goal_dim = 2;
  task.action = ActionSpace::box({-0.95f, -0.95f}, {0.95f, 0.95f});
  Rng rng(2);
  NetworkShape shape;
  shape.hidden = {16};
  shape.actor_output_scale = 5.0;  // sharp, near-boundary densities
  const auto ac = ActorCritic::create(task, shape, rng);
  const std::vector<float> goal{0.5f, 0.5f};
  for (int i = 0; i < 5000; ++i) {
    const std::vector<float> s{static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))};
    const auto sa = policy_forward_sample(ac.actor, task.action, s, goal, rng);
    for (float v : sa.action.values) {
      ASSERT_GT(v, -0.95f);
      ASSERT_LT(v, 0.95f);
    }
    ASSERT_TRUE(std::isfinite(sa.log_prob));
  }
}

TEST(PolicySampling, SampledLogProbMatchesEvaluation) {
  GoalTaskSpec task;
  task.state_feature_dim = 3;
  task.goal_feature_dim = 2;
  task.goal_dim = 2;
  task.action = ActionSpace::discrete(4);
  Rng rng(5);
  NetworkShape shape;
  shape.hidden = {8};
  const auto ac = ActorCritic::create(task, shape, rng);
  const std::vector<float> s{0.1f, 0.2f, 0.3f}, g{1.0f, -1.0f};
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 4000; ++i) {
    const auto sa = policy_forward_sample(ac.actor, task.action, s, g, rng);
    ++counts[static_cast<std::size_t>(sa.action.index)];
  }
  const nn::Vector head = nn::mlp_apply(ac.actor, policy_input(s, g));
  const auto stats = categorical_head_stats(std::span<const float>(head.data(), 4), 0);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(counts[static_cast<std::size_t>(j)] / 4000.0, stats.probs[static_cast<std::size_t>(j)], 0.03);
}

TEST(Critic, ZeroWeightsGiveZeroValue) {
  auto critic = nn::MlpParams::zeros({critic_input_size(2, 2), 4, 1});
  const std::vector<float> s{0.3f, 0.1f}, g{1.0f, 2.0f}, anti{0.0f, 0.5f};
  EXPECT_EQ(critic_value(critic, {s, g, std::nullopt}), 0.0);
  EXPECT_EQ(critic_value(critic, {s, g, std::span<const float>(anti)}), 0.0);
}

TEST(Critic, PresenceFlagEncoding) {
  const std::vector<float> s{0.3f}, g{1.0f, 2.0f}, anti{5.0f, 6.0f};
  const auto without = encode_critic_input({s, g, std::nullopt});
  const auto with = encode_critic_input({s, g, std::span<const float>(anti)});
  ASSERT_EQ(without.size(), 6u);
  ASSERT_EQ(with.size(), 6u);
  EXPECT_EQ(without.back(), 0.0f);
  EXPECT_EQ(with.back(), 1.0f);
  EXPECT_EQ(without[3], 0.0f);
  EXPECT_EQ(with[3], 5.0f);
}

TEST(Greedy, BetaMeanAndArgmax) {
  auto actor = nn::MlpParams::zeros({2, 2});
  const ActionSpace space = ActionSpace::box({-1.0f}, {1.0f});
  const std::vector<float> s{0.0f}, g{0.0f};
  // Equal shapes: mean of the unit Beta is 1/2, the centre of the box.
  EXPECT_NEAR(greedy_action(actor, space, s, g).values[0], 0.0f, 1e-6f);

  auto q = nn::MlpParams::zeros({2, 3});
  q.biases[0] << 0.1f, 2.0f, -1.0f;
  EXPECT_EQ(greedy_action(q, ActionSpace::discrete(3), s, g).index, 1);
}
