#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "adeu/agents.hpp"
#include "adeu/env.hpp"
#include "adeu/policy.hpp"

namespace adeu {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvSpec {
  std::string kind = "path_grid";  // path_grid | chain | point_mass
  int side = 8;
  double reward_scale = 1.0;
  std::uint64_t layout_seed = 0;
  int chain_length = 10;
  double arena_half_width = 10.0;
  double unsafe_band = 0.5;
  int max_steps = 0;  // 0: 2 * path length for grids, 200 for point mass, 4 * length for chains

  bool continuous() const { return kind == "point_mass"; }
};

struct AgentSpec {
  std::string learner = "auto";  // auto | tabular | ensemble; auto picks the ensemble for ucb and ensemble_std
  double alpha = 0.1;
  double gamma = 0.1;
  std::size_t ensemble_size = 5;
  double p_update = 0.5;
  double init_noise = 1.0;
  // TD3-lite
  std::size_t hidden = 64;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 64;
  int policy_delay = 2;
  double soft_rate = 0.005;
  double td3_gamma = 0.98;
  double actor_lr = 3e-4;
  double critic_lr = 3e-2;
  double target_noise = 0.2;
  double noise_clip = 0.5;
  long warmup_steps = 0;     // uniform random actions before the actor takes over
};

struct StrategySpec {
  std::string name = "adeu_count";
  Strategy kind = Strategy::kAdeu;
  std::string mechanism = "count";
  Family family = Family::kCategorical;
  double c = 0.2;
  double rho = 0.1;
  double tau_max = 1.0;
  double beta = 0.5;
  double unseen_multiplier = 4.0;
  double lambda = 1.0;
  double epsilon = 0.1;
  double im_scale = 1.0;
  std::string im_source = "count";
  double rnd_lr = 0.05;
  std::size_t rnd_hidden = 32;
  std::size_t rnd_output = 8;
  double count_cell = 0.25;
  double td_decay = 0.9;
  double ez_mu = 2.0;
  std::size_t ez_max = 128;
  double session_threshold = 1.0;
  std::size_t session_length = 10;
  double f_high = 10.0;
};

struct RunSpec {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  long training_episodes = 1000;
  long eval_every = 100;
  std::string out = "adeu_out";
  bool trace = false;
  long trace_every = 0;  // 0: same as eval_every
  unsigned threads = 0;  // 0: one per seed, capped by the hardware
};

struct ExperimentConfig {
  EnvSpec env;
  AgentSpec agent;
  StrategySpec strategy;
  RunSpec run;
};

inline const std::vector<std::string>& known_strategies() {
  static const std::vector<std::string> names{
      "eps_greedy",       "im",           "ucb",          "adeu_constant",  "adeu_count",
      "adeu_rnd",         "adeu_ensemble_std", "adeu_td_error", "adeu_ez_option", "adeu_session",
      "adeu_go_binary"};
  return names;
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    if (ch == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else if (ch != ' ' && ch != '\t') {
      current += ch;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& token : split_list(text)) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + token + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

inline Family parse_family(const std::string& s) {
  if (s == "categorical") return Family::kCategorical;
  if (s == "bernoulli") return Family::kBernoulliSwitch;
  if (s == "gaussian") return Family::kDiagonalGaussian;
  throw ConfigError("unknown distribution family '" + s + "'");
}

/// Applies a roster name (eps_greedy, im, ucb, adeu_<mechanism>) on top of
/// the hyperparameters already in `spec`.
inline StrategySpec resolve_strategy(const std::string& name, StrategySpec spec) {
  spec.name = name;
  if (name == "eps_greedy") {
    spec.kind = Strategy::kEpsGreedy;
  } else if (name == "im") {
    spec.kind = Strategy::kGreedyIm;
  } else if (name == "ucb") {
    spec.kind = Strategy::kUcb;
  } else if (name.rfind("adeu_", 0) == 0) {
    spec.kind = Strategy::kAdeu;
    spec.mechanism = name.substr(5);
    bool known = false;
    for (auto m : kMechanismNames) known = known || m == spec.mechanism;
    if (!known) throw ConfigError("unknown strategy '" + name + "'");
  } else if (name == "adeu") {
    spec.kind = Strategy::kAdeu;
    spec.name = "adeu_" + spec.mechanism;
  } else {
    throw ConfigError("unknown strategy '" + name + "'");
  }
  return spec;
}

namespace detail {

using boost::property_tree::ptree;

template <class T>
void read(const ptree& section, const char* key, T& field) {
  if (const auto v = section.get_optional<std::string>(key)) {
    std::istringstream in(*v);
    T parsed{};
    if (!(in >> parsed) || !(in >> std::ws).eof()) throw ConfigError(std::string("invalid value for '") + key + "'");
    field = parsed;
  }
}

inline void read(const ptree& section, const char* key, std::string& field) {
  if (const auto v = section.get_optional<std::string>(key)) field = *v;
}

inline void read(const ptree& section, const char* key, bool& field) {
  if (const auto v = section.get_optional<std::string>(key)) {
    if (*v == "true" || *v == "1" || *v == "yes") field = true;
    else if (*v == "false" || *v == "0" || *v == "no") field = false;
    else throw ConfigError(std::string("invalid boolean for '") + key + "'");
  }
}

inline void check_keys(const ptree& section, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, child] : section)
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  if (c.run.seeds.empty()) throw ConfigError("at least one seed is required");
  if (c.run.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (c.run.training_episodes < 0) throw ConfigError("training_episodes must be >= 0");
  if (c.env.kind != "path_grid" && c.env.kind != "chain" && c.env.kind != "point_mass")
    throw ConfigError("unknown environment kind '" + c.env.kind + "'");
  if (!(c.strategy.c > 0.0)) throw ConfigError("c must be positive");
  if (!(c.strategy.rho >= 0.0 && c.strategy.rho <= 1.0)) throw ConfigError("rho must be in [0, 1]");
  if (!(c.strategy.epsilon >= 0.0 && c.strategy.epsilon <= 1.0)) throw ConfigError("epsilon must be in [0, 1]");
  if (c.strategy.im_source != "count" && c.strategy.im_source != "rnd")
    throw ConfigError("im_source must be count or rnd");
  if (c.agent.learner != "auto" && c.agent.learner != "tabular" && c.agent.learner != "ensemble")
    throw ConfigError("learner must be auto, tabular or ensemble");
  const bool wants_ensemble = c.strategy.kind == Strategy::kUcb ||
                              (c.strategy.kind == Strategy::kAdeu && c.strategy.mechanism == "ensemble_std");
  if (wants_ensemble && c.agent.learner == "tabular")
    throw ConfigError("strategy '" + c.strategy.name + "' needs the ensemble learner");
}

/// Parses the key=value config. Sections: [env], [agent], [strategy], [run].
inline ExperimentConfig parse_config(std::istream& in) {
  using detail::read;
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message());
  }
  ExperimentConfig c;
  const boost::property_tree::ptree empty;
  for (const auto& [name, section] : tree)
    if (name != "env" && name != "agent" && name != "strategy" && name != "run")
      throw ConfigError("unknown section [" + name + "]");

  const auto& env = tree.get_child("env", empty);
  detail::check_keys(env, "env", {"kind", "side", "reward_scale", "layout_seed", "chain_length", "arena_half_width",
                                  "unsafe_band", "max_steps"});
  read(env, "kind", c.env.kind);
  read(env, "side", c.env.side);
  read(env, "reward_scale", c.env.reward_scale);
  read(env, "layout_seed", c.env.layout_seed);
  read(env, "chain_length", c.env.chain_length);
  read(env, "arena_half_width", c.env.arena_half_width);
  read(env, "unsafe_band", c.env.unsafe_band);
  read(env, "max_steps", c.env.max_steps);

  const auto& agent = tree.get_child("agent", empty);
  detail::check_keys(agent, "agent", {"learner", "alpha", "gamma", "ensemble_size", "p_update", "init_noise", "hidden",
                                      "replay_capacity", "batch_size", "policy_delay", "soft_rate", "td3_gamma",
                                      "actor_lr", "critic_lr", "target_noise", "noise_clip", "warmup_steps"});
  read(agent, "learner", c.agent.learner);
  read(agent, "alpha", c.agent.alpha);
  read(agent, "gamma", c.agent.gamma);
  read(agent, "ensemble_size", c.agent.ensemble_size);
  read(agent, "p_update", c.agent.p_update);
  read(agent, "init_noise", c.agent.init_noise);
  read(agent, "hidden", c.agent.hidden);
  read(agent, "replay_capacity", c.agent.replay_capacity);
  read(agent, "batch_size", c.agent.batch_size);
  read(agent, "policy_delay", c.agent.policy_delay);
  read(agent, "soft_rate", c.agent.soft_rate);
  read(agent, "td3_gamma", c.agent.td3_gamma);
  read(agent, "actor_lr", c.agent.actor_lr);
  read(agent, "critic_lr", c.agent.critic_lr);
  read(agent, "target_noise", c.agent.target_noise);
  read(agent, "noise_clip", c.agent.noise_clip);
  read(agent, "warmup_steps", c.agent.warmup_steps);

  const auto& strat = tree.get_child("strategy", empty);
  detail::check_keys(strat, "strategy",
                     {"name", "mechanism", "family", "c", "rho", "tau_max", "beta", "unseen_multiplier", "lambda",
                      "epsilon", "im_scale", "im_source", "rnd_lr", "rnd_hidden", "rnd_output", "count_cell",
                      "td_decay", "ez_mu", "ez_max", "session_threshold", "session_length", "f_high"});
  std::string name = "adeu_count";
  std::string family = "categorical";
  read(strat, "name", name);
  read(strat, "mechanism", c.strategy.mechanism);
  read(strat, "family", family);
  c.strategy.family = parse_family(family);
  read(strat, "c", c.strategy.c);
  read(strat, "rho", c.strategy.rho);
  read(strat, "tau_max", c.strategy.tau_max);
  read(strat, "beta", c.strategy.beta);
  read(strat, "unseen_multiplier", c.strategy.unseen_multiplier);
  read(strat, "lambda", c.strategy.lambda);
  read(strat, "epsilon", c.strategy.epsilon);
  read(strat, "im_scale", c.strategy.im_scale);
  read(strat, "im_source", c.strategy.im_source);
  read(strat, "rnd_lr", c.strategy.rnd_lr);
  read(strat, "rnd_hidden", c.strategy.rnd_hidden);
  read(strat, "rnd_output", c.strategy.rnd_output);
  read(strat, "count_cell", c.strategy.count_cell);
  read(strat, "td_decay", c.strategy.td_decay);
  read(strat, "ez_mu", c.strategy.ez_mu);
  read(strat, "ez_max", c.strategy.ez_max);
  read(strat, "session_threshold", c.strategy.session_threshold);
  read(strat, "session_length", c.strategy.session_length);
  read(strat, "f_high", c.strategy.f_high);
  c.strategy = resolve_strategy(name, c.strategy);

  const auto& run = tree.get_child("run", empty);
  detail::check_keys(run, "run", {"seeds", "training_episodes", "eval_every", "out", "trace", "trace_every", "threads"});
  if (const auto seeds = run.get_optional<std::string>("seeds")) c.run.seeds = parse_seed_list(*seeds);
  read(run, "training_episodes", c.run.training_episodes);
  read(run, "eval_every", c.run.eval_every);
  read(run, "out", c.run.out);
  read(run, "trace", c.run.trace);
  read(run, "trace_every", c.run.trace_every);
  read(run, "threads", c.run.threads);

  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in);
}

}  // namespace adeu
