// srlab: train, evaluate, sweep and plot goal-reaching experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "srl/harness/config.hpp"
#include "srl/harness/plot.hpp"
#include "srl/harness/run.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "Experiment seed");
  cmd->add_option("--workers", f.workers, "Rollout worker threads");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--set", f.sets, "Override a config key, key=value (repeatable)");
}

srl::ExperimentConfig resolve(const CommonFlags& f) {
  std::map<std::string, std::string> overrides;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw srl::ConfigError("--set expects key=value, got '" + s + "'");
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (f.seed) overrides["seed"] = std::to_string(f.seed);
  if (f.workers) overrides["workers"] = std::to_string(f.workers);
  if (!f.out.empty()) overrides["output_dir"] = f.out;
  if (f.config.empty()) return srl::resolve_config(overrides);
  return srl::load_config(f.config, overrides);
}

int cmd_train(const CommonFlags& f) {
  const auto cfg = resolve(f);
  srl::RunOptions opts;
  opts.progress = &std::cerr;
  const auto r = srl::run_experiment(cfg, opts);
  std::cout << "wrote " << r.rows.size() << " evaluation rows to " << cfg.output_dir << "/metrics.csv\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed, const std::string& mode) {
  const auto ck = srl::nn::read_checkpoint_file(checkpoint);
  std::optional<bool> greedy;
  if (mode == "greedy") greedy = true;
  else if (mode == "sample") greedy = false;
  else if (!mode.empty()) throw srl::ConfigError("--mode expects 'sample' or 'greedy'");
  const auto ev = srl::eval_saved_checkpoint(ck, episodes, seed ? seed : ck.seed, greedy);
  std::cout << "iteration=" << ck.iteration << " episodes=" << episodes << " success_rate=" << ev.success_rate
            << " mean_distance=" << ev.mean_distance << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::vector<double>& epsilons, int seeds) {
  auto base = resolve(f);
  if (!srl::is_sibling_learner(base.learner))
    throw srl::ConfigError("sweep varies the inclusion threshold and needs a sibling learner (ppo_sr or a2c_sr)");
  const std::string root = base.output_dir;
  fs::create_directories(root);
  std::ofstream csv(root + "/sweep.csv");
  csv << "epsilon,seed,iteration,episodes,success_rate,mean_sibling_distance\n";
  std::vector<std::vector<double>> heat;
  for (double eps : epsilons) {
    std::vector<std::vector<double>> per_seed;
    for (int s = 0; s < seeds; ++s) {
      auto cfg = base;
      cfg.sr.epsilon = eps;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      std::ostringstream dir;
      dir << root << "/eps_" << eps << "_seed_" << cfg.seed;
      cfg.output_dir = dir.str();
      srl::RunOptions opts;
      opts.progress = &std::cerr;
      const auto r = srl::run_experiment(cfg, opts);
      std::vector<double> dists;
      for (const auto& row : r.rows) {
        csv << srl::detail::format_double(eps) << ',' << cfg.seed << ',' << row.iteration << ',' << row.episodes << ','
            << row.success_rate << ',' << srl::detail::csv_number(row.mean_sibling_distance) << '\n';
        dists.push_back(row.mean_sibling_distance);
      }
      per_seed.push_back(std::move(dists));
    }
    std::vector<double> mean(per_seed.front().size(), 0.0);
    for (const auto& d : per_seed)
      for (std::size_t i = 0; i < mean.size() && i < d.size(); ++i) mean[i] += d[i] / seeds;
    heat.push_back(std::move(mean));
  }
  std::ofstream(root + "/sweep_heatmap.svg") << srl::sweep_heatmap_svg(epsilons, heat, "distance to anti-goal");
  std::cout << "wrote " << root << "/sweep.csv and " << root << "/sweep_heatmap.svg\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& out) {
  if (dirs.empty()) throw std::runtime_error("plot needs at least one run directory");
  std::map<std::string, srl::LabeledRuns> groups;
  std::vector<std::string> order;
  for (const auto& d : dirs) {
    const auto cfg = srl::load_config(d + "/config.json", {}, false);
    std::string label = srl::enum_name(srl::learner_names(), cfg.learner);
    if (srl::is_sibling_learner(cfg.learner)) label += " eps=" + srl::detail::format_double(cfg.sr.epsilon);
    if (!groups.count(label)) {
      order.push_back(label);
      groups[label].label = label;
    }
    groups[label].runs.push_back(srl::read_metrics_csv(d + "/metrics.csv"));

    const auto pts = srl::read_terminals_csv(d + "/terminals.csv");
    const auto env = srl::make_env(cfg);
    const std::string scatter = std::visit(
        [&](const auto& e) -> std::string {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, srl::PointMazeEnv>)
            return srl::terminal_scatter_svg(pts, e.spec().arena, &e.layout(), "terminal states");
          else
            return srl::terminal_scatter_svg(pts, e.spec().arena, nullptr, "terminal states");
        },
        env);
    std::ofstream(d + "/terminals.svg") << scatter;
  }
  std::vector<srl::LabeledRuns> ordered;
  for (const auto& l : order) ordered.push_back(groups[l]);
  fs::create_directories(out);
  std::ofstream(out + "/learning_curve.svg") << srl::learning_curve_svg(ordered, "success rate (mean +- SD)");
  std::cout << "wrote " << out << "/learning_curve.svg and a terminals.svg in each run directory\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sibling-rivalry goal-reaching lab"};
  app.require_subcommand(1);

  CommonFlags train_flags, sweep_flags;
  auto* train = app.add_subcommand("train", "Run one experiment");
  add_common(train, train_flags);

  std::string checkpoint;
  int episodes = 32;
  std::uint64_t eval_seed = 0;
  std::string eval_mode;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin from a run")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes");
  eval->add_option("--seed", eval_seed, "Evaluation seed (default: the run seed)");
  eval->add_option("--mode", eval_mode, "sample or greedy (default: the run's eval_mode)");

  std::vector<double> epsilons{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int seeds = 1;
  auto* sweep = app.add_subcommand("sweep", "Train once per inclusion threshold");
  add_common(sweep, sweep_flags);
  sweep->add_option("--epsilons", epsilons, "Thresholds to run")->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds per threshold");

  std::vector<std::string> run_dirs;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plot", "Render SVG figures from run directories");
  plot->add_option("runs", run_dirs, "Run directories")->required();
  plot->add_option("--out", plot_out, "Directory for the combined figures");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_flags);
    if (*eval) return cmd_eval(checkpoint, episodes, eval_seed, eval_mode);
    if (*sweep) return cmd_sweep(sweep_flags, epsilons, seeds);
    if (*plot) return cmd_plot(run_dirs, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "srlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
