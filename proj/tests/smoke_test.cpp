#include <gtest/gtest.h>

#include "srl/harness/run.hpp"

TEST(Smoke, Run) {
  auto cfg = srl::preset(srl::EnvKind::point_maze, srl::LearnerKind::ppo_sr);
  cfg.iterations = 2;
  cfg.eval_every = 1;
  cfg.workers = 1;
  cfg.output_dir = "/tmp/srl_smoke";
  auto r = srl::run_experiment(cfg);
  EXPECT_EQ(r.rows.size(), 2u);
}
