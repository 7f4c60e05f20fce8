#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "srl/core/rng.hpp"
#include "srl/rewards.hpp"

using namespace srl;

namespace {

GoalTaskSpec plane(double delta) {
  GoalTaskSpec t;
  t.name = "plane";
  t.state_feature_dim = t.goal_feature_dim = t.goal_dim = 2;
  t.distance = DistanceKind::l2;
  t.threshold = delta;
  return t;
}

GoalVec pt(double x, double y) { return {static_cast<float>(x), static_cast<float>(y)}; }

Trajectory ending_at(GoalVec terminal, GoalVec goal, const GoalTaskSpec& task) {
  Trajectory t;
  t.goal = goal;
  t.start_state = {0.0f, 0.0f};
  t.steps.resize(1);
  t.terminal = terminal;
  t.terminal_features = terminal;
  t.terminal_distance = task_distance(task, terminal, goal);
  t.success = t.terminal_distance <= task.threshold;
  return t;
}

}  // namespace

TEST(SparseReward, ValuesAndBoundary) {
  const auto task = plane(0.15);
  const RewardContext ctx{&task, pt(0, 0), std::nullopt};
  EXPECT_EQ(sparse_reward(pt(0.10, 0), ctx), 1.0);
  EXPECT_EQ(sparse_reward(pt(0.2, 0), ctx), 0.0);
  const auto unit = plane(0.5);
  const RewardContext at{&unit, pt(0, 0), std::nullopt};
  EXPECT_EQ(sparse_reward(pt(0.5, 0), at), 1.0);
}

TEST(NaiveReward, Values) {
  const auto task = plane(0.15);
  const RewardContext ctx{&task, pt(0, 0), std::nullopt};
  EXPECT_DOUBLE_EQ(naive_shaped_reward(pt(2.0, 0), ctx), -2.0);
  EXPECT_EQ(naive_shaped_reward(pt(0.05, 0), ctx), 1.0);

  GoalTaskSpec grid;
  grid.state_feature_dim = grid.goal_feature_dim = grid.goal_dim = 9;
  grid.distance = DistanceKind::l1;
  grid.threshold = 0.0;
  const GoalVec g(9, 1.0f);
  GoalVec s(9, 1.0f);
  for (int i = 0; i < 7; ++i) s[static_cast<std::size_t>(i)] = 0.0f;
  EXPECT_EQ(naive_shaped_reward(s, RewardContext{&grid, g, std::nullopt}), -7.0);
}

TEST(SelfBalancingReward, Values) {
  const auto task = plane(0.15);
  // d(s,g) = 1, d(s,anti) = 3: avoidance never pays more than 0.
  EXPECT_DOUBLE_EQ(self_balancing_reward(pt(1, 0), RewardContext{&task, pt(0, 0), pt(4, 0)}), 0.0);
  // d(s,g) = 3, d(s,anti) = 1.
  EXPECT_DOUBLE_EQ(self_balancing_reward(pt(3, 0), RewardContext{&task, pt(0, 0), pt(4, 0)}), -2.0);
  EXPECT_EQ(self_balancing_reward(pt(0.1, 0), RewardContext{&task, pt(0, 0), pt(0.1, 0)}), 1.0);
  EXPECT_THROW(self_balancing_reward(pt(1, 1), RewardContext{&task, pt(0, 0), std::nullopt}), std::invalid_argument);
}

TEST(RewardProperties, RandomInequalities) {
  Rng rng(123);
  for (int i = 0; i < 100000; ++i) {
    const double delta = rng.uniform(0.0, 2.0);
    const auto task = plane(delta);
    const GoalVec s = pt(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const GoalVec g = pt(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const GoalVec anti = pt(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const GoalVec anti2 = pt(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const RewardContext ctx{&task, g, anti};
    const double r = sparse_reward(s, ctx);
    const double naive = naive_shaped_reward(s, ctx);
    const double prime = self_balancing_reward(s, ctx);
    ASSERT_EQ(r, sparse_reward(s, RewardContext{&task, g, anti2}));
    ASSERT_EQ(prime, self_balancing_reward(s, ctx));
    if (is_success(task, s, g)) {
      ASSERT_EQ(r, 1.0);
      ASSERT_EQ(naive, 1.0);
      ASSERT_EQ(prime, 1.0);
    } else {
      ASSERT_EQ(r, 0.0);
      ASSERT_LE(naive, prime);
      ASSERT_LE(prime, 0.0);
    }
  }
}

TEST(Relabel, SymmetricTerminalsGiveZero) {
  const auto task = plane(0.15);
  SiblingPair p{ending_at(pt(1, 1), pt(0, 0), task), ending_at(pt(-1, 1), pt(0, 0), task)};
  relabel_sibling_pair(p, task);
  EXPECT_DOUBLE_EQ(*p.closer.terminal_reward, 0.0);
  EXPECT_DOUBLE_EQ(*p.farther.terminal_reward, 0.0);
}

TEST(Relabel, SuccessfulCloserGetsOne) {
  const auto task = plane(0.15);
  SiblingPair p{ending_at(pt(0.05, 0), pt(0, 0), task), ending_at(pt(3, 0), pt(0, 0), task)};
  relabel_sibling_pair(p, task);
  EXPECT_EQ(*p.closer.terminal_reward, 1.0);
  EXPECT_LT(*p.farther.terminal_reward, 0.0);
}

TEST(Relabel, MatchesIndependentRecomputation) {
  const auto task = plane(0.15);
  Rng rng(6);
  for (int i = 0; i < 2000; ++i) {
    const GoalVec g = pt(rng.uniform(0, 10), rng.uniform(0, 10));
    const GoalVec a = pt(rng.uniform(0, 10), rng.uniform(0, 10));
    const GoalVec b = pt(rng.uniform(0, 10), rng.uniform(0, 10));
    SiblingPair p{ending_at(a, g, task), ending_at(b, g, task)};
    relabel_sibling_pair(p, task);
    auto expect = [&](const GoalVec& s, const GoalVec& anti) {
      const double dg = std::hypot(double(s[0]) - g[0], double(s[1]) - g[1]);
      const double da = std::hypot(double(s[0]) - anti[0], double(s[1]) - anti[1]);
      return dg <= 0.15 ? 1.0 : std::min(0.0, da - dg);
    };
    EXPECT_NEAR(*p.closer.terminal_reward, expect(a, b), 1e-9);
    EXPECT_NEAR(*p.farther.terminal_reward, expect(b, a), 1e-9);
    EXPECT_EQ(*p.closer.anti_goal, b);
    EXPECT_EQ(*p.farther.anti_goal, a);
  }
}

TEST(Relabel, StrictPairingRejectsDifferentStarts) {
  const auto task = plane(0.15);
  SiblingPair p{ending_at(pt(1, 1), pt(0, 0), task), ending_at(pt(2, 1), pt(0, 0), task)};
  p.farther.start_state = {0.5f, 0.5f};
  EXPECT_THROW(relabel_sibling_pair(p, task, true), std::invalid_argument);
  EXPECT_NO_THROW(relabel_sibling_pair(p, task, false));
  p.farther.goal = pt(1, 0);
  EXPECT_THROW(relabel_sibling_pair(p, task, false), std::invalid_argument);
}
