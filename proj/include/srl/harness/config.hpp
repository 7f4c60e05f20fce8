#pragma once

// Experiment configuration: presets, flat dotted keys, JSON files and
// environment-variable overrides.

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/env/track.hpp"
#include "srl/learners/grid_oracle.hpp"
#include "srl/learners/her_dqn.hpp"
#include "srl/learners/icm.hpp"
#include "srl/learners/ppo.hpp"
#include "srl/numerics/checkpoint.hpp"
#include "srl/sibling_rivalry.hpp"

namespace srl {

enum class EnvKind { track, point_maze, corridor, umaze, bitgrid };
enum class LearnerKind { ppo, ppo_sr, a2c, a2c_sr, ppo_icm, dqn_her, ppo_grid_oracle };
enum class CountMode { pairs, rollouts };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::pair<EnvKind, std::string>>& env_names() {
  static const std::vector<std::pair<EnvKind, std::string>> v{{EnvKind::track, "track"},
                                                             {EnvKind::point_maze, "point_maze"},
                                                             {EnvKind::corridor, "corridor"},
                                                             {EnvKind::umaze, "umaze"},
                                                             {EnvKind::bitgrid, "bitgrid"}};
  return v;
}

inline const std::vector<std::pair<LearnerKind, std::string>>& learner_names() {
  static const std::vector<std::pair<LearnerKind, std::string>> v{
      {LearnerKind::ppo, "ppo"},         {LearnerKind::ppo_sr, "ppo_sr"},   {LearnerKind::a2c, "a2c"},
      {LearnerKind::a2c_sr, "a2c_sr"},   {LearnerKind::ppo_icm, "ppo_icm"}, {LearnerKind::dqn_her, "dqn_her"},
      {LearnerKind::ppo_grid_oracle, "ppo_grid_oracle"}};
  return v;
}

template <class E>
std::string enum_name(const std::vector<std::pair<E, std::string>>& table, E e) {
  for (const auto& [k, n] : table)
    if (k == e) return n;
  throw std::logic_error("unnamed enum value");
}

template <class E>
E enum_parse(const std::vector<std::pair<E, std::string>>& table, const std::string& s, const std::string& what) {
  for (const auto& [k, n] : table)
    if (n == s) return k;
  std::string known;
  for (const auto& [k, n] : table) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown " + what + " '" + s + "' (expected one of: " + known + ")");
}

inline bool is_sibling_learner(LearnerKind l) { return l == LearnerKind::ppo_sr || l == LearnerKind::a2c_sr; }
inline bool is_a2c_learner(LearnerKind l) { return l == LearnerKind::a2c || l == LearnerKind::a2c_sr; }
inline bool is_spatial_env(EnvKind e) { return e != EnvKind::bitgrid; }

struct ExperimentConfig {
  EnvKind env = EnvKind::point_maze;
  LearnerKind learner = LearnerKind::ppo_sr;
  SrConfig sr;
  PpoConfig ppo;
  IcmConfig icm;
  DqnHerConfig dqn;
  GridOracleConfig grid;
  NetworkShape network;

  int maze_side = 10;
  std::uint64_t maze_seed = 1525;
  int corridor_length = 10;
  int bitgrid_side = 13;
  int bitgrid_walk = 20;
  TrackConfig track;

  CountMode count_mode = CountMode::pairs;
  int workers = 20;
  int iterations = 100;
  std::uint64_t max_env_steps = 0;  // 0: no step budget
  int eval_every = 25;
  int eval_episodes = 32;
  bool eval_greedy = false;  // false: sample actions as in training
  int dispersion_samples = 8;
  int snapshot_checkpoints = 15;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  bool log_wall_clock = false;
};

/// Table-driven defaults for an (environment, learner) combination.
inline ExperimentConfig preset(EnvKind env, LearnerKind learner) {
  ExperimentConfig c;
  c.env = env;
  c.learner = learner;
  c.ppo = PpoConfig{};
  if (env == EnvKind::bitgrid) {
    c.sr.epsilon = std::numeric_limits<double>::infinity();
    if (learner == LearnerKind::ppo_sr || learner == LearnerKind::a2c_sr) c.ppo.entropy_coef = 0.0;
  } else if (env == EnvKind::track) {
    c.sr.epsilon = 0.0;
    c.ppo.learning_rate = 3e-3;
    c.ppo.entropy_coef = 0.0;
  } else {
    c.sr.epsilon = 5.0;
  }
  if (learner == LearnerKind::ppo_icm) {
    c.ppo.gamma = 0.98;
    c.ppo.bootstrap_value = true;
  }
  if (is_a2c_learner(learner)) {
    c.ppo.epochs_per_update = 1;
    c.ppo.minibatches_per_epoch = 1;
    c.ppo.gae_lambda = 1.0;
  }
  return c;
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline double parse_double(const std::string& key, const std::string& s) {
  std::string t;
  for (char ch : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (t == "inf" || t == "infinity" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(key + ": '" + s + "' is not a number");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key + ": '" + s + "' is not an integer");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(key + ": '" + s + "' is not a boolean");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_int<int>(key, item));
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline std::vector<Field> make_fields() {
  std::vector<Field> f;
  auto dbl = [&f](std::string key, auto access) {
    f.push_back({key, [access](const ExperimentConfig& c) { return format_double(access(const_cast<ExperimentConfig&>(c))); },
                 [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_double(key, v); }});
  };
  auto integer = [&f](std::string key, auto access) {
    f.push_back({key, [access](const ExperimentConfig& c) { return std::to_string(access(const_cast<ExperimentConfig&>(c))); },
                 [access, key](ExperimentConfig& c, const std::string& v) {
                   using T = std::remove_reference_t<decltype(access(c))>;
                   access(c) = parse_int<T>(key, v);
                 }});
  };
  auto boolean = [&f](std::string key, auto access) {
    f.push_back({key, [access](const ExperimentConfig& c) { return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); },
                 [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(key, v); }});
  };

  f.push_back({"env", [](const ExperimentConfig& c) { return enum_name(env_names(), c.env); },
               [](ExperimentConfig& c, const std::string& v) { c.env = enum_parse(env_names(), v, "env"); }});
  f.push_back({"learner", [](const ExperimentConfig& c) { return enum_name(learner_names(), c.learner); },
               [](ExperimentConfig& c, const std::string& v) { c.learner = enum_parse(learner_names(), v, "learner"); }});
  integer("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; });
  integer("workers", [](ExperimentConfig& c) -> int& { return c.workers; });
  integer("iterations", [](ExperimentConfig& c) -> int& { return c.iterations; });
  integer("max_env_steps", [](ExperimentConfig& c) -> std::uint64_t& { return c.max_env_steps; });
  integer("eval_every", [](ExperimentConfig& c) -> int& { return c.eval_every; });
  integer("eval_episodes", [](ExperimentConfig& c) -> int& { return c.eval_episodes; });
  f.push_back({"eval_mode", [](const ExperimentConfig& c) { return std::string(c.eval_greedy ? "greedy" : "sample"); },
               [](ExperimentConfig& c, const std::string& v) {
                 if (v == "greedy") c.eval_greedy = true;
                 else if (v == "sample") c.eval_greedy = false;
                 else throw ConfigError("eval_mode: expected 'sample' or 'greedy', got '" + v + "'");
               }});
  integer("dispersion_samples", [](ExperimentConfig& c) -> int& { return c.dispersion_samples; });
  integer("snapshot_checkpoints", [](ExperimentConfig& c) -> int& { return c.snapshot_checkpoints; });
  f.push_back({"output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
               [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }});
  boolean("log_wall_clock", [](ExperimentConfig& c) -> bool& { return c.log_wall_clock; });
  f.push_back({"count_mode", [](const ExperimentConfig& c) { return std::string(c.count_mode == CountMode::pairs ? "pairs" : "rollouts"); },
               [](ExperimentConfig& c, const std::string& v) {
                 if (v == "pairs") c.count_mode = CountMode::pairs;
                 else if (v == "rollouts") c.count_mode = CountMode::rollouts;
                 else throw ConfigError("count_mode: expected 'pairs' or 'rollouts', got '" + v + "'");
               }});

  integer("maze.side", [](ExperimentConfig& c) -> int& { return c.maze_side; });
  integer("maze.seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.maze_seed; });
  integer("corridor.length", [](ExperimentConfig& c) -> int& { return c.corridor_length; });
  integer("bitgrid.side", [](ExperimentConfig& c) -> int& { return c.bitgrid_side; });
  integer("bitgrid.walk_length", [](ExperimentConfig& c) -> int& { return c.bitgrid_walk; });
  dbl("track.theta_start", [](ExperimentConfig& c) -> double& { return c.track.theta_start; });
  dbl("track.theta_goal", [](ExperimentConfig& c) -> double& { return c.track.theta_goal; });
  dbl("track.action_bound", [](ExperimentConfig& c) -> double& { return c.track.action_bound; });
  dbl("track.threshold", [](ExperimentConfig& c) -> double& { return c.track.threshold; });
  integer("track.horizon", [](ExperimentConfig& c) -> int& { return c.track.horizon; });

  dbl("sr.epsilon", [](ExperimentConfig& c) -> double& { return c.sr.epsilon; });
  boolean("sr.independent_start", [](ExperimentConfig& c) -> bool& { return c.sr.independent_start; });
  integer("sr.pairs_per_update", [](ExperimentConfig& c) -> int& { return c.sr.pairs_per_update; });

  dbl("ppo.clip_ratio", [](ExperimentConfig& c) -> double& { return c.ppo.clip_ratio; });
  integer("ppo.epochs", [](ExperimentConfig& c) -> int& { return c.ppo.epochs_per_update; });
  integer("ppo.minibatches", [](ExperimentConfig& c) -> int& { return c.ppo.minibatches_per_epoch; });
  dbl("ppo.entropy_coef", [](ExperimentConfig& c) -> double& { return c.ppo.entropy_coef; });
  dbl("ppo.gae_lambda", [](ExperimentConfig& c) -> double& { return c.ppo.gae_lambda; });
  dbl("ppo.gamma", [](ExperimentConfig& c) -> double& { return c.ppo.gamma; });
  boolean("ppo.bootstrap", [](ExperimentConfig& c) -> bool& { return c.ppo.bootstrap_value; });
  dbl("ppo.learning_rate", [](ExperimentConfig& c) -> double& { return c.ppo.learning_rate; });
  dbl("ppo.lr_decay", [](ExperimentConfig& c) -> double& { return c.ppo.lr_decay; });
  dbl("ppo.value_coef", [](ExperimentConfig& c) -> double& { return c.ppo.value_coef; });
  dbl("ppo.grad_clip", [](ExperimentConfig& c) -> double& { return c.ppo.grad_clip; });
  boolean("ppo.normalize_advantages", [](ExperimentConfig& c) -> bool& { return c.ppo.normalize_advantages; });

  dbl("icm.intrinsic_weight", [](ExperimentConfig& c) -> double& { return c.icm.intrinsic_weight; });
  dbl("icm.lr_scale", [](ExperimentConfig& c) -> double& { return c.icm.module_lr_scale; });
  integer("icm.feature_dim", [](ExperimentConfig& c) -> int& { return c.icm.feature_dim; });

  integer("dqn.replay_capacity", [](ExperimentConfig& c) -> std::size_t& { return c.dqn.replay_capacity; });
  integer("dqn.minibatches", [](ExperimentConfig& c) -> int& { return c.dqn.minibatches_per_update; });
  integer("dqn.batch_size", [](ExperimentConfig& c) -> int& { return c.dqn.batch_size; });
  dbl("dqn.learning_rate", [](ExperimentConfig& c) -> double& { return c.dqn.learning_rate; });
  dbl("dqn.polyak", [](ExperimentConfig& c) -> double& { return c.dqn.polyak; });
  dbl("dqn.epsilon_greedy", [](ExperimentConfig& c) -> double& { return c.dqn.epsilon_greedy; });
  dbl("dqn.gamma", [](ExperimentConfig& c) -> double& { return c.dqn.gamma; });
  f.push_back({"dqn.strategy", [](const ExperimentConfig& c) { return std::string(c.dqn.strategy == HerStrategy::final ? "final" : "future"); },
               [](ExperimentConfig& c, const std::string& v) {
                 if (v == "final") c.dqn.strategy = HerStrategy::final;
                 else if (v == "future") c.dqn.strategy = HerStrategy::future;
                 else throw ConfigError("dqn.strategy: expected 'final' or 'future', got '" + v + "'");
               }});
  integer("dqn.future_k", [](ExperimentConfig& c) -> int& { return c.dqn.future_k; });
  dbl("dqn.reward_scale", [](ExperimentConfig& c) -> double& { return c.dqn.reward_scale; });

  integer("grid.divisions", [](ExperimentConfig& c) -> int& { return c.grid.divisions; });
  dbl("grid.coefficient", [](ExperimentConfig& c) -> double& { return c.grid.coefficient; });

  f.push_back({"network.hidden",
               [](const ExperimentConfig& c) {
                 std::string s;
                 for (int h : c.network.hidden) s += (s.empty() ? "" : ",") + std::to_string(h);
                 return s;
               },
               [](ExperimentConfig& c, const std::string& v) { c.network.hidden = parse_int_list("network.hidden", v); }});
  dbl("network.actor_output_scale", [](ExperimentConfig& c) -> double& { return c.network.actor_output_scale; });
  return f;
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = make_fields();
  return f;
}

inline const Field& field(const std::string& key) {
  for (const auto& fl : fields())
    if (fl.key == key) return fl;
  throw ConfigError("unknown config key '" + key + "'");
}

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto& v = it.value();
    if (v.is_object()) {
      flatten_json(v, key, out);
    } else if (v.is_string()) {
      out[key] = v.get<std::string>();
    } else if (v.is_boolean()) {
      out[key] = v.get<bool>() ? "true" : "false";
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      out[key] = v.dump();
    } else if (v.is_number_float()) {
      out[key] = format_double(v.get<double>());
    } else if (v.is_array()) {
      std::string s;
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw ConfigError(key + ": arrays must hold integers");
        s += (s.empty() ? "" : ",") + e.dump();
      }
      out[key] = s;
    } else {
      throw ConfigError(key + ": unsupported value type");
    }
  }
}

/// "sr.epsilon" <-> "SRLAB_SR_EPSILON".
inline std::string env_var_name(const std::string& key) {
  std::string s = "SRLAB_";
  for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace detail

/// Every key with its current value, in registry order.
inline std::vector<std::pair<std::string, std::string>> config_items(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::fields()) out.emplace_back(f.key, f.get(c));
  return out;
}

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  detail::field(key).set(c, value);
}

/// Rejects out-of-range values and unsupported learner/env pairs.
inline void validate_config(const ExperimentConfig& c) {
  try {
    c.sr.validate();
    c.ppo.validate();
    c.icm.validate();
    c.dqn.validate();
    c.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.learner == LearnerKind::dqn_her && c.env != EnvKind::bitgrid)
    throw ConfigError("learner dqn_her needs discrete actions and is only supported on env bitgrid");
  if (c.learner == LearnerKind::ppo_grid_oracle && !is_spatial_env(c.env))
    throw ConfigError("learner ppo_grid_oracle needs a spatial navigation env, not " + enum_name(env_names(), c.env));
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.iterations < 0) throw ConfigError("iterations must be non-negative");
  if (c.eval_every < 1) throw ConfigError("eval_every must be positive");
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
  if (c.dispersion_samples != 0 && c.dispersion_samples < 2)
    throw ConfigError("dispersion_samples must be 0 or at least 2");
  if (c.count_mode == CountMode::rollouts && c.sr.pairs_per_update < 2)
    throw ConfigError("count_mode rollouts needs sr.pairs_per_update >= 2");
  if (c.maze_side < 2) throw ConfigError("maze.side must be at least 2");
  if (c.corridor_length < 2) throw ConfigError("corridor.length must be at least 2");
  if (c.bitgrid_side < 2 || c.bitgrid_walk < 1) throw ConfigError("bitgrid sizes out of range");
  if (c.network.hidden.empty()) throw ConfigError("network.hidden must list at least one layer");
}

/// Builds a config: preset for the env/learner named in `values` (or the
/// defaults), then every key of `values` in order, then SRLAB_* environment
/// variables, then validation.
inline ExperimentConfig resolve_config(const std::map<std::string, std::string>& values,
                                       bool read_environment = true) {
  std::map<std::string, std::string> merged = values;
  if (read_environment) {
    for (const auto& f : detail::fields())
      if (const char* v = std::getenv(detail::env_var_name(f.key).c_str())) merged[f.key] = v;
  }
  for (const auto& [k, v] : merged) (void)detail::field(k);
  const ExperimentConfig base;
  const EnvKind env = merged.count("env") ? enum_parse(env_names(), merged.at("env"), "env") : base.env;
  const LearnerKind learner =
      merged.count("learner") ? enum_parse(learner_names(), merged.at("learner"), "learner") : base.learner;
  ExperimentConfig c = preset(env, learner);
  for (const auto& [k, v] : merged) set_config_value(c, k, v);
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config_json(const std::string& text, std::map<std::string, std::string> overrides = {},
                                          bool read_environment = true) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  std::map<std::string, std::string> values;
  detail::flatten_json(j, "", values);
  for (auto& [k, v] : overrides) values[k] = v;
  return resolve_config(values, read_environment);
}

inline ExperimentConfig load_config(const std::string& path, std::map<std::string, std::string> overrides = {},
                                    bool read_environment = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str(), std::move(overrides), read_environment);
}

/// Nested JSON form of the config; parses back to the same config.
inline std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config_items(c)) {
    nlohmann::ordered_json* node = &j;
    std::string rest = key;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*node)[rest] = value;
  }
  return j.dump(2) + "\n";
}

/// Hash of the canonical key=value listing; independent of output_dir.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::string text;
  for (const auto& [k, v] : config_items(c))
    if (k != "output_dir" && k != "workers") text += k + "=" + v + "\n";
  return nn::detail::fnv1a(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace srl
