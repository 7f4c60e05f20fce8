#pragma once

// Experiment driver: the collect / update / evaluate cycle for every
// learner, with metrics, terminal snapshots and checkpoints on disk.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "srl/diagnostics.hpp"
#include "srl/env/bit_grid.hpp"
#include "srl/env/point_maze.hpp"
#include "srl/env/track.hpp"
#include "srl/harness/config.hpp"
#include "srl/learners/grid_oracle.hpp"
#include "srl/learners/her_dqn.hpp"
#include "srl/learners/icm.hpp"
#include "srl/learners/ppo.hpp"
#include "srl/numerics/checkpoint.hpp"
#include "srl/rewards.hpp"
#include "srl/sibling_rivalry.hpp"

namespace srl {

using AnyEnv = std::variant<TrackEnv, PointMazeEnv, BitGridEnv>;

inline AnyEnv make_env(const ExperimentConfig& c) {
  switch (c.env) {
    case EnvKind::track:
      return TrackEnv(c.track);
    case EnvKind::point_maze:
      return PointMazeEnv::maze(c.maze_side, c.maze_seed);
    case EnvKind::corridor:
      return PointMazeEnv::corridor(c.corridor_length);
    case EnvKind::umaze:
      return PointMazeEnv::umaze(c.corridor_length);
    case EnvKind::bitgrid: {
      BitGridConfig b;
      b.side = c.bitgrid_side;
      b.walk_length = c.bitgrid_walk;
      return BitGridEnv(b);
    }
  }
  throw ConfigError("unknown env");
}

struct MetricsRow {
  int iteration = 0;
  std::uint64_t episodes = 0;
  std::uint64_t env_steps = 0;
  double success_rate = 0.0;
  double mean_distance = 0.0;
  double mean_sibling_distance = std::numeric_limits<double>::quiet_NaN();
  double mean_dispersion = std::numeric_limits<double>::quiet_NaN();
  double wall_clock_seconds = 0.0;
};

inline const char* metrics_header() {
  return "iteration,episodes,env_steps,success_rate,mean_distance,mean_sibling_distance,mean_dispersion,"
         "wall_clock_seconds";
}

namespace detail {
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}
}  // namespace detail

inline std::string format_metrics_row(const MetricsRow& r) {
  std::ostringstream os;
  os << r.iteration << ',' << r.episodes << ',' << r.env_steps << ',' << detail::csv_number(r.success_rate) << ','
     << detail::csv_number(r.mean_distance) << ',' << detail::csv_number(r.mean_sibling_distance) << ','
     << detail::csv_number(r.mean_dispersion) << ',' << detail::csv_number(r.wall_clock_seconds);
  return os.str();
}

struct EvalResult {
  double success_rate = 0.0;
  double mean_distance = 0.0;
  std::vector<std::array<double, 2>> terminal_positions;
  std::vector<GoalVec> terminals;
};

/// Runs `n_episodes` fresh episodes with `policy` and
/// aggregates outcomes. Nothing here reaches a training buffer.
template <class Policy, GoalEnvironment E>
EvalResult eval_checkpoint(const Policy& policy, const E& env, int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("evaluation needs at least one episode");
  EvalResult out;
  int successes = 0;
  double dist = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    Rng ep = Rng::stream(rng(), {static_cast<std::uint64_t>(i)});
    const auto init = env.sample_init(ep);
    const Trajectory t = collect_rollout(policy, env, init, ep);
    successes += t.success ? 1 : 0;
    dist += t.terminal_distance;
    out.terminal_positions.push_back(t.terminal_position);
    out.terminals.push_back(t.terminal);
  }
  out.success_rate = static_cast<double>(successes) / n_episodes;
  out.mean_distance = dist / n_episodes;
  return out;
}

/// Pairwise terminal spread of `n` stochastic rollouts sharing one (s0, g).
template <class Policy, GoalEnvironment E>
double sampled_dispersion(const Policy& policy, const E& env, int n, Rng& rng) {
  const auto init = env.sample_init(rng);
  TerminalSampleSet s;
  for (int i = 0; i < n; ++i) s.points.push_back(collect_rollout(policy, env, init, rng).terminal);
  return terminal_dispersion(s, env.spec());
}

/// Training-side bookkeeping for one outer iteration.
struct IterationLog {
  int iteration = 0;
  std::uint64_t episodes = 0;
  std::uint64_t env_steps = 0;
  double train_success_rate = 0.0;
  double mean_train_distance = 0.0;
  double mean_sibling_distance = std::numeric_limits<double>::quiet_NaN();
  double closer_included_fraction = std::numeric_limits<double>::quiet_NaN();
  double toggle_fraction = std::numeric_limits<double>::quiet_NaN();
  double policy_entropy = 0.0;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  std::vector<IterationLog> iterations;
  std::vector<EvalResult> evals;
  std::uint64_t episodes = 0;
  std::uint64_t env_steps = 0;
  nn::Checkpoint checkpoint;
};

struct RunOptions {
  bool write_files = true;
  std::ostream* progress = nullptr;
};

/// Rebuilds the config stored in a checkpoint's metadata.
inline ExperimentConfig config_from_checkpoint(const nn::Checkpoint& ck) {
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : ck.extra)
    if (k.rfind("cfg.", 0) == 0) values[k.substr(4)] = v;
  if (values.empty()) throw ConfigError("checkpoint carries no configuration");
  return resolve_config(values, false);
}

namespace detail {

inline double mean_or_nan(double sum, std::size_t n) {
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

inline void toggle_stats(const Trajectory& t, bool discrete, std::size_t& toggles, std::size_t& actions) {
  if (!discrete) return;
  for (const auto& s : t.steps) {
    actions += 1;
    toggles += s.action.index == bitgrid::kToggle ? 1 : 0;
  }
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {}

  template <GoalEnvironment E>
  RunResult run(const E& env) {
    const GoalTaskSpec& task = env.spec();
    const auto start_time = std::chrono::steady_clock::now();
    Rng init_rng = Rng::stream(cfg_.seed, {static_cast<std::uint64_t>(Stream::init)});

    const bool dqn = cfg_.learner == LearnerKind::dqn_her;
    PolicyLearner pl;
    DqnLearner dl;
    IcmModule icm;
    std::optional<ReplayBuffer> replay;
    if (dqn) {
      dl = DqnLearner::create(task.state_feature_dim, task.goal_feature_dim, task.action.count, cfg_.network.hidden,
                              cfg_.dqn, init_rng);
      replay.emplace(cfg_.dqn.replay_capacity);
    } else {
      pl = PolicyLearner::create(task, cfg_.network, cfg_.ppo, init_rng);
      if (cfg_.learner == LearnerKind::ppo_icm)
        icm = IcmModule::create(task.state_feature_dim, task.action, cfg_.icm, cfg_.ppo.adam(), init_rng);
    }

    std::ofstream metrics, terminals;
    if (opts_.write_files) {
      std::filesystem::create_directories(cfg_.output_dir);
      std::ofstream(cfg_.output_dir + "/config.json") << config_to_json(cfg_);
      metrics.open(cfg_.output_dir + "/metrics.csv");
      terminals.open(cfg_.output_dir + "/terminals.csv");
      if (!metrics || !terminals) throw std::runtime_error("cannot write into '" + cfg_.output_dir + "'");
      metrics << metrics_header() << '\n' << std::flush;
      terminals << "checkpoint,x,y\n" << std::flush;
    }

    RunResult result;
    const int pairs = cfg_.count_mode == CountMode::pairs ? cfg_.sr.pairs_per_update : cfg_.sr.pairs_per_update / 2;
    const std::size_t singles = static_cast<std::size_t>(
        cfg_.count_mode == CountMode::pairs ? 2 * cfg_.sr.pairs_per_update : cfg_.sr.pairs_per_update);
    SrConfig sr = cfg_.sr;
    sr.pairs_per_update = std::max(1, pairs);

    double sib_sum = 0.0;
    std::size_t sib_n = 0;
    int last_eval = -1;
    int checkpoint_index = 0;

    auto evaluate = [&](int it) {
      Rng eval_rng = Rng::stream(cfg_.seed, {static_cast<std::uint64_t>(Stream::eval)});
      Rng disp_rng = Rng::stream(cfg_.seed, {static_cast<std::uint64_t>(Stream::dispersion),
                                             static_cast<std::uint64_t>(checkpoint_index)});
      EvalResult ev;
      double disp = std::numeric_limits<double>::quiet_NaN();
      if (dqn) {
        const QPolicy q_eval{&dl.q, 0.0};  // Q-learning's target policy is the greedy one
        ev = eval_checkpoint(q_eval, env, cfg_.eval_episodes, eval_rng);
        if (cfg_.dispersion_samples >= 2)
          disp = sampled_dispersion(QPolicy{&dl.q, cfg_.dqn.epsilon_greedy}, env, cfg_.dispersion_samples, disp_rng);
      } else {
        const ActorPolicy actor_eval{&pl.net.actor, pl.net.space, cfg_.eval_greedy};
        ev = eval_checkpoint(actor_eval, env, cfg_.eval_episodes, eval_rng);
        if (cfg_.dispersion_samples >= 2)
          disp = sampled_dispersion(ActorPolicy{&pl.net.actor, pl.net.space, false}, env, cfg_.dispersion_samples,
                                    disp_rng);
      }
      MetricsRow row;
      row.iteration = it;
      row.episodes = result.episodes;
      row.env_steps = result.env_steps;
      row.success_rate = ev.success_rate;
      row.mean_distance = ev.mean_distance;
      if (is_sibling_learner(cfg_.learner)) row.mean_sibling_distance = mean_or_nan(sib_sum, sib_n);
      row.mean_dispersion = disp;
      if (cfg_.log_wall_clock)
        row.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
      sib_sum = 0.0;
      sib_n = 0;
      if (opts_.write_files) {
        metrics << format_metrics_row(row) << '\n' << std::flush;
        if (checkpoint_index < cfg_.snapshot_checkpoints) {
          for (const auto& p : ev.terminal_positions)
            terminals << checkpoint_index << ',' << csv_number(p[0]) << ',' << csv_number(p[1]) << '\n';
          terminals << std::flush;
        }
      }
      if (opts_.progress)
        *opts_.progress << "[" << enum_name(env_names(), cfg_.env) << "/" << enum_name(learner_names(), cfg_.learner)
                        << " seed " << cfg_.seed << "] iter " << it << " steps " << result.env_steps << " success "
                        << ev.success_rate << " dist " << ev.mean_distance << "\n"
                        << std::flush;
      result.rows.push_back(row);
      result.evals.push_back(std::move(ev));
      last_eval = it;
      ++checkpoint_index;
    };

    int it = 0;
    while (it < cfg_.iterations) {
      if (cfg_.max_env_steps > 0 && result.env_steps >= cfg_.max_env_steps) break;
      ++it;
      Rng collect_rng = Rng::stream(cfg_.seed, {static_cast<std::uint64_t>(Stream::collect), static_cast<std::uint64_t>(it)});
      Rng update_rng = Rng::stream(cfg_.seed, {static_cast<std::uint64_t>(Stream::update), static_cast<std::uint64_t>(it)});
      IterationLog log;
      log.iteration = it;
      std::size_t toggles = 0, actions = 0, successes = 0, count = 0;
      double dist = 0.0;
      const bool discrete = task.action.is_discrete();

      if (dqn) {
        const QPolicy behaviour{&dl.q, cfg_.dqn.epsilon_greedy};
        auto episodes = collect_rollouts(behaviour, env, singles, collect_rng, cfg_.workers);
        for (const auto& t : episodes) {
          for (auto& tr : episode_transitions(t, task)) replay->add(std::move(tr));
          auto gf = [&env](const GoalVec& g) { return env.goal_features(g); };
          for (auto& tr : her_relabel(t, task, cfg_.dqn.strategy, cfg_.dqn.future_k, update_rng, gf))
            replay->add(std::move(tr));
          toggle_stats(t, discrete, toggles, actions);
          successes += t.success;
          dist += t.terminal_distance;
          result.env_steps += t.length();
          ++count;
        }
        dqn_update(*replay, dl, cfg_.dqn, update_rng);
      } else if (is_sibling_learner(cfg_.learner)) {
        const ActorPolicy pol{&pl.net.actor, pl.net.space, false};
        SrIteration si = sr_collect_iteration(pol, env, sr, collect_rng, cfg_.workers);
        std::size_t included = 0;
        double pair_sum = 0.0;
        for (const auto& rec : si.pairs) {
          pair_sum += rec.sibling_distance;
          included += rec.closer_included;
        }
        sib_sum += pair_sum;
        sib_n += si.pairs.size();
        log.mean_sibling_distance = mean_or_nan(pair_sum, si.pairs.size());
        log.closer_included_fraction = mean_or_nan(static_cast<double>(included), si.pairs.size());
        std::vector<RewardedEpisode> eps;
        for (const auto& t : si.buffer.trajectories) {
          eps.push_back({&t, terminal_rewards(t, *t.terminal_reward), true, false});
          toggle_stats(t, discrete, toggles, actions);
        }
        update_policy(eps, pl, update_rng, log);
        result.env_steps += si.env_steps;
        successes = si.successes;
        dist = si.distance_sum;
        count = si.episodes;
      } else {
        const ActorPolicy pol{&pl.net.actor, pl.net.space, false};
        auto episodes = collect_rollouts(pol, env, singles, collect_rng, cfg_.workers);
        std::vector<RewardedEpisode> eps;
        for (const auto& t : episodes) {
          const RewardContext ctx{&task, t.goal, std::nullopt};
          RewardedEpisode e{&t, {}, false, false};
          switch (cfg_.learner) {
            case LearnerKind::ppo_icm: {
              e.rewards = icm_episode_rewards(icm, t, cfg_.icm);
              e.rewards.back() += sparse_reward(t.terminal, ctx);
              e.bootstrap_final = !t.success;
              break;
            }
            case LearnerKind::ppo_grid_oracle:
              e.rewards = terminal_rewards(t, sparse_reward(t.terminal, ctx) + grid_oracle_bonus(t, task, cfg_.grid));
              break;
            default:
              e.rewards = terminal_rewards(t, naive_shaped_reward(t.terminal, ctx));
          }
          eps.push_back(std::move(e));
          toggle_stats(t, discrete, toggles, actions);
          successes += t.success;
          dist += t.terminal_distance;
          result.env_steps += t.length();
          ++count;
        }
        update_policy(eps, pl, update_rng, log);
        if (cfg_.learner == LearnerKind::ppo_icm) {
          std::vector<const Trajectory*> ptrs;
          for (const auto& t : episodes) ptrs.push_back(&t);
          icm_update(icm, ptrs, cfg_.icm, update_rng);
        }
      }

      result.episodes += is_sibling_learner(cfg_.learner) ? 2 * static_cast<std::uint64_t>(sr.pairs_per_update)
                                                          : static_cast<std::uint64_t>(singles);
      log.episodes = result.episodes;
      log.env_steps = result.env_steps;
      log.train_success_rate = count ? static_cast<double>(successes) / static_cast<double>(count) : 0.0;
      log.mean_train_distance = count ? dist / static_cast<double>(count) : 0.0;
      if (actions) log.toggle_fraction = static_cast<double>(toggles) / static_cast<double>(actions);
      result.iterations.push_back(log);

      if (it % cfg_.eval_every == 0) evaluate(it);
    }
    if (it > 0 && last_eval != it) evaluate(it);

    result.checkpoint = make_checkpoint(it, dqn, pl, dl);
    if (opts_.write_files) nn::write_checkpoint_file(cfg_.output_dir + "/checkpoint.bin", result.checkpoint);
    return result;
  }

 private:
  void update_policy(const std::vector<RewardedEpisode>& eps, PolicyLearner& pl, Rng& rng, IterationLog& log) {
    auto batch = build_policy_batch(eps, pl.net.critic, cfg_.ppo);
    const PpoStats st = is_a2c_learner(cfg_.learner) ? a2c_update(std::move(batch), pl, cfg_.ppo)
                                                     : ppo_update(std::move(batch), pl, cfg_.ppo, rng);
    log.policy_entropy = st.entropy;
  }

  nn::Checkpoint make_checkpoint(int it, bool dqn, const PolicyLearner& pl, const DqnLearner& dl) const {
    nn::Checkpoint ck;
    ck.config_hash = config_hash(cfg_);
    ck.seed = cfg_.seed;
    ck.iteration = static_cast<std::uint64_t>(it);
    for (const auto& [k, v] : config_items(cfg_))
      if (k != "output_dir") ck.extra["cfg." + k] = v;
    if (dqn) {
      ck.networks = {{"q", dl.q}, {"target", dl.target}};
      ck.optimizers = {{"q", dl.opt}};
    } else {
      ck.networks = {{"actor", pl.net.actor}, {"critic", pl.net.critic}};
      ck.optimizers = {{"actor", pl.actor_opt}, {"critic", pl.critic_opt}};
    }
    return ck;
  }

  ExperimentConfig cfg_;
  RunOptions opts_;
};

}  // namespace detail

/// Runs the configured experiment to completion. With write_files the
/// output directory receives config.json, metrics.csv (one row per
/// evaluation), terminals.csv (first snapshot_checkpoints evaluations) and
/// checkpoint.bin. Rows are flushed as they are produced, so a failed run
/// leaves its partial log behind.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate_config(cfg);
  const AnyEnv env = make_env(cfg);
  detail::Runner runner(cfg, opts);
  return std::visit([&](const auto& e) { return runner.run(e); }, env);
}

/// Evaluation of a saved checkpoint in the run's eval mode, or greedily.
inline EvalResult eval_saved_checkpoint(const nn::Checkpoint& ck, int episodes, std::uint64_t seed,
                                        std::optional<bool> greedy = std::nullopt) {
  ExperimentConfig cfg = config_from_checkpoint(ck);
  if (greedy) cfg.eval_greedy = *greedy;
  const AnyEnv env = make_env(cfg);
  Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(Stream::eval)});
  return std::visit(
      [&](const auto& e) {
        if (cfg.learner == LearnerKind::dqn_her)
          return eval_checkpoint(QPolicy{&ck.network("q"), 0.0}, e, episodes, rng);
        return eval_checkpoint(ActorPolicy{&ck.network("actor"), e.spec().action, cfg.eval_greedy}, e, episodes, rng);
      },
      env);
}

}  // namespace srl
