#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srl/harness/config.hpp"
#include "srl/harness/plot.hpp"
#include "srl/harness/run.hpp"

using namespace srl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("srl_harness_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny(const std::string& env, const std::string& learner, const fs::path& out, int workers = 1) {
  return resolve_config({{"env", env},
                         {"learner", learner},
                         {"iterations", "4"},
                         {"eval_every", "2"},
                         {"eval_episodes", "6"},
                         {"sr.pairs_per_update", "3"},
                         {"network.hidden", "16,16"},
                         {"corridor.length", "4"},
                         {"bitgrid.side", "5"},
                         {"bitgrid.walk_length", "3"},
                         {"dqn.batch_size", "8"},
                         {"dqn.minibatches", "2"},
                         {"workers", std::to_string(workers)},
                         {"output_dir", out.string()}},
                        false);
}

// The stored config names the worker count; everything else must agree.
std::vector<std::uint8_t> checkpoint_without_workers(const fs::path& dir) {
  auto ck = nn::read_checkpoint_file((dir / "checkpoint.bin").string());
  ck.extra.erase("cfg.workers");
  return nn::save_checkpoint(ck);
}

}  // namespace

TEST(Config, PresetsFollowEnvironment) {
  EXPECT_EQ(preset(EnvKind::point_maze, LearnerKind::ppo_sr).sr.epsilon, 5.0);
  EXPECT_EQ(preset(EnvKind::track, LearnerKind::a2c_sr).sr.epsilon, 0.0);
  EXPECT_TRUE(std::isinf(preset(EnvKind::bitgrid, LearnerKind::ppo_sr).sr.epsilon));
  EXPECT_EQ(preset(EnvKind::bitgrid, LearnerKind::ppo_sr).ppo.entropy_coef, 0.0);
  EXPECT_EQ(preset(EnvKind::bitgrid, LearnerKind::ppo).ppo.entropy_coef, 0.025);
  const auto icm = preset(EnvKind::bitgrid, LearnerKind::ppo_icm);
  EXPECT_EQ(icm.ppo.gamma, 0.98);
  EXPECT_TRUE(icm.ppo.bootstrap_value);
  const auto ppo = preset(EnvKind::point_maze, LearnerKind::ppo);
  EXPECT_EQ(ppo.ppo.gamma, 1.0);
  EXPECT_EQ(ppo.ppo.clip_ratio, 0.2);
  EXPECT_EQ(ppo.ppo.epochs_per_update, 4);
  EXPECT_EQ(ppo.ppo.minibatches_per_epoch, 4);
  EXPECT_EQ(ppo.ppo.gae_lambda, 0.98);
  EXPECT_EQ(ppo.ppo.learning_rate, 1e-3);
  EXPECT_EQ(ppo.ppo.lr_decay, 0.999);
  const DqnHerConfig dqn = preset(EnvKind::bitgrid, LearnerKind::dqn_her).dqn;
  EXPECT_EQ(dqn.minibatches_per_update, 40);
  EXPECT_EQ(dqn.batch_size, 128);
  EXPECT_EQ(dqn.polyak, 0.95);
  EXPECT_EQ(dqn.epsilon_greedy, 0.2);
  EXPECT_EQ(dqn.gamma, 0.98);
}

TEST(Config, RejectsUnsupportedCombinations) {
  EXPECT_THROW(resolve_config({{"env", "point_maze"}, {"learner", "dqn_her"}}, false), ConfigError);
  EXPECT_THROW(resolve_config({{"env", "bitgrid"}, {"learner", "ppo_grid_oracle"}}, false), ConfigError);
  EXPECT_NO_THROW(resolve_config({{"env", "bitgrid"}, {"learner", "dqn_her"}}, false));
  EXPECT_NO_THROW(resolve_config({{"env", "umaze"}, {"learner", "ppo_grid_oracle"}}, false));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(resolve_config({{"ppo.lr", "1e-3"}}, false), ConfigError);
  EXPECT_THROW(resolve_config({{"env", "moon"}}, false), ConfigError);
  EXPECT_THROW(resolve_config({{"ppo.epochs", "many"}}, false), ConfigError);
  EXPECT_THROW(resolve_config({{"workers", "0"}}, false), ConfigError);
  EXPECT_THROW(resolve_config({{"sr.epsilon", "-1"}}, false), ConfigError);
  EXPECT_THROW(parse_config_json("{not json", {}, false), ConfigError);
}

TEST(Config, InfinityParses) {
  EXPECT_TRUE(std::isinf(resolve_config({{"sr.epsilon", "inf"}}, false).sr.epsilon));
}

TEST(Config, EnvironmentVariablesOverrideValues) {
  ::setenv("SRLAB_SR_EPSILON", "2.5", 1);
  ::setenv("SRLAB_PPO_EPOCHS", "7", 1);
  const auto c = parse_config_json(R"({"sr": {"epsilon": 1.0}, "ppo": {"epochs": 2}})");
  ::unsetenv("SRLAB_SR_EPSILON");
  ::unsetenv("SRLAB_PPO_EPOCHS");
  EXPECT_EQ(c.sr.epsilon, 2.5);
  EXPECT_EQ(c.ppo.epochs_per_update, 7);
  EXPECT_EQ(parse_config_json(R"({"sr": {"epsilon": 1.0}})").sr.epsilon, 1.0);
}

TEST(Config, JsonRoundTrip) {
  auto c = resolve_config({{"env", "bitgrid"}, {"learner", "ppo_icm"}, {"seed", "42"}, {"network.hidden", "64,32"}},
                          false);
  const auto back = parse_config_json(config_to_json(c), {}, false);
  EXPECT_EQ(config_items(back), config_items(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  c.seed = 43;
  EXPECT_NE(config_hash(back), config_hash(c));
}

TEST(Harness, GoldenMetricsHeader) {
  EXPECT_STREQ(metrics_header(),
               "iteration,episodes,env_steps,success_rate,mean_distance,mean_sibling_distance,mean_dispersion,"
               "wall_clock_seconds");
}

TEST(Harness, RepeatRunsAreByteIdentical) {
  for (const char* learner : {"ppo_sr", "ppo", "ppo_icm"}) {
    const auto a = scratch(std::string("rep_a_") + learner), b = scratch(std::string("rep_b_") + learner),
               c = scratch(std::string("rep_c_") + learner);
    run_experiment(tiny("corridor", learner, a, 1));
    run_experiment(tiny("corridor", learner, b, 1));
    run_experiment(tiny("corridor", learner, c, 4));
    for (const char* f : {"metrics.csv", "terminals.csv", "checkpoint.bin"})
      EXPECT_EQ(slurp(a / f), slurp(b / f)) << learner << " " << f;
    for (const char* f : {"metrics.csv", "terminals.csv"})
      EXPECT_EQ(slurp(a / f), slurp(c / f)) << learner << " workers " << f;
    EXPECT_EQ(checkpoint_without_workers(a), checkpoint_without_workers(c)) << learner;
  }
  const auto a = scratch("rep_dqn_a"), c = scratch("rep_dqn_c");
  run_experiment(tiny("bitgrid", "dqn_her", a, 1));
  run_experiment(tiny("bitgrid", "dqn_her", c, 3));
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
  EXPECT_EQ(checkpoint_without_workers(a), checkpoint_without_workers(c));
}

TEST(Harness, ZeroIterationsWritesHeaderAndCheckpoint) {
  const auto dir = scratch("zero");
  auto cfg = tiny("corridor", "ppo_sr", dir);
  cfg.iterations = 0;
  const auto res = run_experiment(cfg);
  EXPECT_TRUE(res.rows.empty());
  EXPECT_EQ(slurp(dir / "metrics.csv"), std::string(metrics_header()) + "\n");
  EXPECT_TRUE(fs::exists(dir / "checkpoint.bin"));
  EXPECT_NO_THROW(nn::read_checkpoint_file((dir / "checkpoint.bin").string()));
}

TEST(Harness, MetricsAreWellFormed) {
  const auto dir = scratch("rows");
  const auto res = run_experiment(tiny("corridor", "ppo_sr", dir));
  ASSERT_EQ(res.rows.size(), 2u);
  const auto rows = read_metrics_csv((dir / "metrics.csv").string());
  ASSERT_EQ(rows.size(), 2u);
  std::uint64_t last_episodes = 0;
  for (const auto& r : rows) {
    EXPECT_GE(r.success_rate, 0.0);
    EXPECT_LE(r.success_rate, 1.0);
    EXPECT_GE(r.mean_distance, 0.0);
    EXPECT_GT(r.episodes, last_episodes);
    EXPECT_FALSE(std::isnan(r.mean_sibling_distance));
    EXPECT_EQ(r.wall_clock_seconds, 0.0);
    last_episodes = r.episodes;
  }
  // Three pairs per update, two updates between evaluations.
  EXPECT_EQ(rows[0].episodes, 12u);
  EXPECT_EQ(rows[1].episodes, 24u);
  EXPECT_EQ(rows[1].iteration, 4);
}

TEST(Harness, SavedCheckpointReproducesFinalEvaluation) {
  const auto dir = scratch("ckpt");
  const auto cfg = tiny("corridor", "ppo_sr", dir);
  const auto res = run_experiment(cfg);
  const auto ck = nn::read_checkpoint_file((dir / "checkpoint.bin").string());
  EXPECT_EQ(config_from_checkpoint(ck).seed, cfg.seed);
  EXPECT_EQ(ck.iteration, 4u);
  const auto again = eval_saved_checkpoint(ck, cfg.eval_episodes, cfg.seed);
  EXPECT_EQ(again.success_rate, res.evals.back().success_rate);
  EXPECT_EQ(again.mean_distance, res.evals.back().mean_distance);
  const auto greedy = eval_saved_checkpoint(ck, 5, 9, true);
  EXPECT_GE(greedy.success_rate, 0.0);
  EXPECT_LE(greedy.success_rate, 1.0);
}

TEST(Harness, IterationBudgetOnEnvSteps) {
  auto cfg = tiny("corridor", "ppo", scratch("budget"));
  cfg.iterations = 1000;
  cfg.max_env_steps = 500;
  RunOptions o;
  o.write_files = false;
  const auto res = run_experiment(cfg, o);
  EXPECT_GE(res.env_steps, 500u);
  EXPECT_LT(res.iterations.size(), 1000u);
}

TEST(Plot, SingleRunBandCollapsesToCurve) {
  std::vector<MetricsRow> run(5);
  for (int i = 0; i < 5; ++i) {
    run[i].episodes = 10u * (i + 1);
    run[i].success_rate = 0.2 * i;
  }
  const auto b = success_band({run});
  ASSERT_EQ(b.mean.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(b.mean[i], 0.2 * i);
    EXPECT_DOUBLE_EQ(b.lo[i], b.mean[i]);
    EXPECT_DOUBLE_EQ(b.hi[i], b.mean[i]);
  }
}

TEST(Plot, FiveRunBandMatchesMeanAndSd) {
  Rng rng(1);
  std::vector<std::vector<MetricsRow>> runs(5, std::vector<MetricsRow>(4));
  for (auto& r : runs)
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i].episodes = 100 * (i + 1);
      r[i].success_rate = rng.uniform(0.3, 0.7);
    }
  const auto b = success_band(runs);
  for (std::size_t i = 0; i < 4; ++i) {
    double m = 0, v = 0;
    for (const auto& r : runs) m += r[i].success_rate / 5;
    for (const auto& r : runs) v += (r[i].success_rate - m) * (r[i].success_rate - m) / 5;
    EXPECT_NEAR(b.mean[i], m, 1e-12);
    EXPECT_NEAR(b.lo[i], m - std::sqrt(v), 1e-12);
    EXPECT_NEAR(b.hi[i], m + std::sqrt(v), 1e-12);
    EXPECT_DOUBLE_EQ(b.x[i], 100.0 * (i + 1));
  }
  EXPECT_NE(learning_curve_svg({{"sr", runs}}).find("<svg"), std::string::npos);
}
