#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "adeu/agents.hpp"
#include "adeu/env.hpp"
#include "adeu/harness/config.hpp"
#include "adeu/policy.hpp"
#include "adeu/rng.hpp"
#include "adeu/uncertainty.hpp"

namespace adeu {

struct EvalPoint {
  long episode = 0;
  double reward = 0.0;
  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct TraceRow {
  long episode = 0;
  long step = 0;
  std::uint64_t state = 0;
  double f = 0.0;
  double g_of_f = 0.0;
  std::vector<double> policy_action;
  std::vector<double> sampled_action;
  EpisodeMode mode = EpisodeMode::kNormal;
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EvalPoint> eval_points;
  std::vector<TraceRow> trace;
  double seconds = 0.0;
  std::optional<long> episodes_to_first_max;
};

/// Episode index of the first evaluation attaining the series maximum.
inline long episodes_to_max(const std::vector<EvalPoint>& points) {
  if (points.empty()) throw std::invalid_argument("episodes_to_max: empty series");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].reward > points[best].reward) best = i;
  return points[best].episode;
}

inline long episodes_to_max(const RunRecord& record) { return episodes_to_max(record.eval_points); }

// ---------------------------------------------------------------------------
// Construction helpers
// ---------------------------------------------------------------------------

inline PathGrid make_path_grid(const EnvSpec& spec) {
  PathGridConfig cfg;
  cfg.side = spec.side;
  cfg.beta_reward_scale = spec.reward_scale;
  cfg.layout_seed = spec.layout_seed;
  cfg.max_steps = spec.max_steps > 0 ? spec.max_steps
                                     : static_cast<int>(2 * serpentine_length(static_cast<std::size_t>(std::max(spec.side, 0))));
  return PathGrid(cfg);
}

inline ChainWalk make_chain(const EnvSpec& spec) {
  return ChainWalk(spec.chain_length, spec.max_steps > 0 ? spec.max_steps : 4 * spec.chain_length);
}

inline PointMass make_point_mass(const EnvSpec& spec) {
  return PointMass(spec.arena_half_width, spec.unsafe_band, spec.max_steps > 0 ? spec.max_steps : 200);
}

/// Builds the mechanism named by `kind` from strategy hyperparameters.
inline Mechanism make_mechanism(const std::string& kind, const StrategySpec& s, std::size_t dense_states,
                                std::size_t feature_dim, std::uint64_t seed) {
  if (kind == "constant") return ConstantMechanism(s.c);
  if (kind == "count") return CountMechanism(s.beta, s.unseen_multiplier, dense_states);
  if (kind == "rnd") return RndMechanism::create(feature_dim, {s.rnd_hidden}, s.rnd_output, s.rnd_lr, seed);
  if (kind == "ensemble_std") return EnsembleStdMechanism(s.lambda);
  if (kind == "td_error") return TdErrorMechanism(s.td_decay, s.f_high);
  if (kind == "ez_option") return EzOptionMechanism(s.epsilon, s.ez_mu, s.ez_max, seed);
  if (kind == "session") return SessionMechanism(s.session_threshold, s.session_length, s.f_high);
  if (kind == "go_binary") return GoBinaryMechanism(s.f_high);
  throw ConfigError("unknown mechanism '" + kind + "'");
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string("run aborted: non-finite ") + what);
}

// ---------------------------------------------------------------------------
// Discrete trainer
// ---------------------------------------------------------------------------

/// Owns one seeded run on a discrete environment: learner, exploration
/// mechanism, optional intrinsic source, and the random streams.
template <class Env>
class DiscreteTrainer {
 public:
  DiscreteTrainer(const ExperimentConfig& config, Env env, std::uint64_t seed)
      : config_(config), env_(std::move(env)),
        encoder_(env_.geometry().rows, env_.geometry().cols, derive_seed(seed, "encoder")),
        learner_(make_learner(config, env_, seed)),
        agent_rng_(derive_seed(seed, "agent")), explore_rng_(derive_seed(seed, "explore")) {
    const auto& s = config.strategy;
    const std::size_t states = env_.state_count();
    act_.strategy = s.kind;
    act_.adeu = AdeuSettings{s.c, s.tau_max, s.family};
    act_.epsilon = s.epsilon;
    act_.lambda = s.lambda;
    if (s.family == Family::kDiagonalGaussian) throw ConfigError("gaussian family needs a continuous environment");
    if (s.kind == Strategy::kAdeu) {
      mechanism_ = make_mechanism(s.mechanism, s, states, encoder_.dimension(), derive_seed(seed, "mechanism"));
      if (needs_ensemble(*mechanism_) && !std::holds_alternative<EnsembleQ>(learner_))
        throw ConfigError("ensemble_std mechanism needs an ensemble learner");
    }
    if (s.kind == Strategy::kGreedyIm)
      im_source_ = make_mechanism(s.im_source, s, states, encoder_.dimension(), derive_seed(seed, "intrinsic"));
  }

  static DiscreteLearner make_learner(const ExperimentConfig& config, const Env& env, std::uint64_t seed) {
    const auto& a = config.agent;
    const bool ensemble =
        a.learner == "ensemble" ||
        (a.learner == "auto" && (config.strategy.kind == Strategy::kUcb ||
                                 (config.strategy.kind == Strategy::kAdeu && config.strategy.mechanism == "ensemble_std")));
    if (ensemble)
      return EnsembleQ(env.state_count(), env.action_count(), a.alpha, a.gamma, a.ensemble_size, a.p_update,
                       a.init_noise, derive_seed(seed, "agent-init"));
    return TabularQ(env.state_count(), env.action_count(), a.alpha, a.gamma);
  }

  /// One learning episode; returns its extrinsic return.
  double train_episode(long episode, std::vector<TraceRow>* trace = nullptr) {
    const EpisodeMode mode =
        act_.strategy == Strategy::kAdeu ? episode_mode(config_.strategy.rho, explore_rng_) : EpisodeMode::kNormal;
    std::size_t state = env_.reset().index;
    double total = 0.0;
    std::size_t greedy_prefix = 0;
    bool prefix_open = true;
    for (long step = 0;; ++step) {
      policy_snapshot(learner_, state, q_row_);
      const Probe probe = make_probe(state, static_cast<std::size_t>(step), argmax(q_row_));
      Mechanism* mech = mechanism_ ? &*mechanism_ : nullptr;
      const DiscreteDecision d = agent_act(learner_, q_row_, mech, probe, state, mode, act_, explore_rng_);

      const auto result = env_.step(d.action);
      require_finite(result.reward, "reward");
      Transition t{state, d.action, result.reward, result.next_state.index, result.terminated};
      if (im_source_) {
        Probe im_probe;
        im_probe.key = state;
        if (needs_features(*im_source_)) {
          im_features_ = encoder_.encode(state);
          im_probe.features = im_features_;
        }
        t = im_augment(t, *im_source_, im_probe, config_.strategy.im_scale);
      }
      const double td = learner_update(learner_, t, agent_rng_);
      require_finite(td, "td error");
      if (mechanism_) update(*mechanism_, Experience{probe.key, probe.features, td});

      if (trace != nullptr) {
        trace->push_back(TraceRow{episode, step, state, d.f, d.spread.value, {static_cast<double>(d.policy_action)},
                                  {static_cast<double>(d.action)}, mode});
      }
      total += result.reward;
      if (prefix_open && d.action == d.policy_action && !result.terminated) ++greedy_prefix;
      else prefix_open = false;
      state = result.next_state.index;
      if (result.terminated || result.truncated) break;
    }
    if (mechanism_) end_episode(*mechanism_, EpisodeOutcome{greedy_prefix});
    return total;
  }

  /// Greedy episode with no learning and no mechanism updates.
  double evaluate() {
    std::size_t state = env_.reset().index;
    double total = 0.0;
    for (;;) {
      policy_snapshot(learner_, state, q_row_);
      const auto result = env_.step(argmax(q_row_));
      total += result.reward;
      state = result.next_state.index;
      if (result.terminated || result.truncated) break;
    }
    return total;
  }

  const DiscreteLearner& learner() const noexcept { return learner_; }
  DiscreteLearner& learner() noexcept { return learner_; }
  const std::optional<Mechanism>& mechanism() const noexcept { return mechanism_; }
  std::optional<Mechanism>& mechanism() noexcept { return mechanism_; }
  const Env& env() const noexcept { return env_; }

 private:
  Probe make_probe(std::size_t state, std::size_t step, int policy_action) {
    Probe p;
    p.key = state;
    p.episode_step = step;
    features_.clear();
    if (mechanism_ && needs_features(*mechanism_)) {
      features_ = encoder_.encode(state);
      p.features = features_;
    }
    if (mechanism_ && needs_ensemble(*mechanism_)) {
      std::get<EnsembleQ>(learner_).member_values(state, policy_action, ensemble_values_);
      p.ensemble_values = ensemble_values_;
    }
    return p;
  }

  ExperimentConfig config_;
  Env env_;
  DiscreteEncoder encoder_;
  DiscreteLearner learner_;
  std::optional<Mechanism> mechanism_;
  std::optional<Mechanism> im_source_;
  ActSettings act_;
  Rng agent_rng_;
  Rng explore_rng_;
  std::vector<double> q_row_;
  std::vector<double> features_;
  std::vector<double> im_features_;
  std::vector<double> ensemble_values_;
};

// ---------------------------------------------------------------------------
// Continuous trainer
// ---------------------------------------------------------------------------

inline Td3Config make_td3_config(const AgentSpec& a, const PointMass& env) {
  Td3Config c;
  const auto low = env.action_low();
  const auto high = env.action_high();
  const auto scale = env.observation_scale();
  c.action_low.assign(low.begin(), low.end());
  c.action_high.assign(high.begin(), high.end());
  c.observation_scale.assign(scale.begin(), scale.end());
  c.hidden = a.hidden;
  c.replay_capacity = a.replay_capacity;
  c.batch_size = a.batch_size;
  c.policy_delay = a.policy_delay;
  c.soft_rate = a.soft_rate;
  c.gamma = a.td3_gamma;
  c.actor_lr = a.actor_lr;
  c.critic_lr = a.critic_lr;
  c.target_noise = a.target_noise;
  c.noise_clip = a.noise_clip;
  return c;
}

/// TD3-lite on the point-mass task. Supports ADEU (any mechanism that does
/// not need an ensemble) and the intrinsic-motivation baseline, which keeps
/// TD3's fixed Gaussian noise of width c.
class ContinuousTrainer {
 public:
  ContinuousTrainer(const ExperimentConfig& config, PointMass env, std::uint64_t seed)
      : config_(config), env_(std::move(env)),
        encoder_({-env_.arena_half_width(), -env_.unsafe_band(), -PointMass::kMaxSpeed, -PointMass::kMaxSpeed},
                 {env_.arena_half_width(), env_.unsafe_band(), PointMass::kMaxSpeed, PointMass::kMaxSpeed}),
        agent_(make_td3_config(config.agent, env_), derive_seed(seed, "agent")),
        agent_rng_(derive_seed(seed, "agent")), explore_rng_(derive_seed(seed, "explore")) {
    const auto& s = config.strategy;
    settings_ = AdeuSettings{s.c, s.tau_max, Family::kDiagonalGaussian};
    if (s.kind == Strategy::kAdeu) {
      if (s.mechanism == "ensemble_std") throw ConfigError("ensemble_std is not available for the continuous agent");
      mechanism_ = make_mechanism(s.mechanism, s, 0, encoder_.dimension(), derive_seed(seed, "mechanism"));
    } else if (s.kind == Strategy::kGreedyIm) {
      im_source_ = make_mechanism(s.im_source, s, 0, encoder_.dimension(), derive_seed(seed, "intrinsic"));
    } else {
      throw ConfigError("strategy '" + s.name + "' is not available for the continuous agent");
    }
  }

  double train_episode(long episode, std::vector<TraceRow>* trace = nullptr) {
    const EpisodeMode mode =
        mechanism_ ? episode_mode(config_.strategy.rho, explore_rng_) : EpisodeMode::kNormal;
    auto state = env_.reset().vector;
    double total = 0.0;
    const auto low = agent_.action_low();
    const auto high = agent_.action_high();
    for (long step = 0;; ++step) {
      const auto mean = agent_.act(state);
      Probe probe;
      probe.key = grid_key(std::span<const double>(state).first(2), config_.strategy.count_cell);
      probe.episode_step = static_cast<std::size_t>(step);
      const Mechanism* source = mechanism_ ? &*mechanism_ : (im_source_ ? &*im_source_ : nullptr);
      if (source != nullptr && needs_features(*source)) {
        features_ = encoder_.encode(state);
        probe.features = features_;
      }

      ContinuousDecision d;
      if (steps_taken_ < config_.agent.warmup_steps) {
        // Same uniform warm-up for every strategy; the mechanism still sees the states.
        d.policy_action = mean;
        d.action.resize(mean.size());
        for (std::size_t i = 0; i < mean.size(); ++i) d.action[i] = explore_rng_.uniform(low[i], high[i]);
      } else if (mechanism_) {
        d = adeu_select(mean, low, high, *mechanism_, probe, mode, settings_, explore_rng_);
      } else {
        d.policy_action = mean;
        d.spread = Spread{config_.strategy.c, 0.0, config_.strategy.c};
        d.action = select_action_gaussian(mean, config_.strategy.c, low, high, explore_rng_);
      }

      ++steps_taken_;
      const auto result = env_.step(d.action);
      require_finite(result.reward, "reward");
      ContinuousTransition t{state, d.action, result.reward, result.next_state.vector, result.terminated};
      if (im_source_) {
        t.reward += config_.strategy.im_scale * adeu::evaluate(*im_source_, probe);
        update(*im_source_, Experience{probe.key, probe.features, std::nullopt});
      }
      agent_.remember(std::move(t));
      const auto report = agent_.update(agent_rng_);
      require_finite(report.critic1_loss, "critic loss");
      if (mechanism_) update(*mechanism_, Experience{probe.key, probe.features, std::nullopt});

      if (trace != nullptr)
        trace->push_back(TraceRow{episode, step, probe.key, d.f, d.spread.value, d.policy_action, d.action, mode});
      total += result.reward;
      state = result.next_state.vector;
      if (result.terminated || result.truncated) break;
    }
    return total;
  }

  double evaluate() {
    auto state = env_.reset().vector;
    double total = 0.0;
    for (;;) {
      const auto result = env_.step(agent_.act(state));
      total += result.reward;
      state = result.next_state.vector;
      if (result.terminated || result.truncated) break;
    }
    return total;
  }

  Td3Lite& agent() noexcept { return agent_; }
  const std::optional<Mechanism>& mechanism() const noexcept { return mechanism_; }

 private:
  ExperimentConfig config_;
  PointMass env_;
  ContinuousEncoder encoder_;
  Td3Lite agent_;
  std::optional<Mechanism> mechanism_;
  std::optional<Mechanism> im_source_;
  AdeuSettings settings_;
  Rng agent_rng_;
  Rng explore_rng_;
  std::vector<double> features_;
  long steps_taken_ = 0;
};

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

template <class Trainer>
RunRecord drive(Trainer& trainer, const ExperimentConfig& config, std::uint64_t seed) {
  RunRecord record;
  record.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  const long trace_every = config.run.trace_every > 0 ? config.run.trace_every : config.run.eval_every;
  for (long e = 1; e <= config.run.training_episodes; ++e) {
    const bool traced = config.run.trace && e % trace_every == 0;
    trainer.train_episode(e, traced ? &record.trace : nullptr);
    if (e % config.run.eval_every == 0) {
      const double r = trainer.evaluate();
      require_finite(r, "evaluation return");
      record.eval_points.push_back({e, r});
    }
  }
  if (!record.eval_points.empty()) record.episodes_to_first_max = episodes_to_max(record);
  record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

/// Trains one seed end to end. Deterministic given (config, seed).
inline RunRecord run_one(const ExperimentConfig& config, std::uint64_t seed) {
  validate(config);
  if (config.env.kind == "path_grid") {
    DiscreteTrainer<PathGrid> trainer(config, make_path_grid(config.env), seed);
    return drive(trainer, config, seed);
  }
  if (config.env.kind == "chain") {
    DiscreteTrainer<ChainWalk> trainer(config, make_chain(config.env), seed);
    return drive(trainer, config, seed);
  }
  ContinuousTrainer trainer(config, make_point_mass(config.env), seed);
  return drive(trainer, config, seed);
}

/// Runs every configured seed, one worker per seed up to `threads`
/// (0: hardware concurrency). Results come back in seed order.
inline std::vector<RunRecord> run_seeds(const ExperimentConfig& config, unsigned threads = 0) {
  const auto& seeds = config.run.seeds;
  std::vector<RunRecord> records(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  if (threads == 0) threads = config.run.threads;
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(seeds.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        records[i] = run_one(config, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

}  // namespace adeu
