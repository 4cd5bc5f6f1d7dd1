#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "adeu/neural.hpp"
#include "adeu/policy.hpp"
#include "adeu/rng.hpp"
#include "adeu/uncertainty.hpp"

namespace adeu {

struct Transition {
  std::size_t state = 0;
  int action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminated = false;
};

// ---------------------------------------------------------------------------
// Tabular Q-learning
// ---------------------------------------------------------------------------

class TabularQ {
 public:
  TabularQ(std::size_t states, int actions, double alpha, double gamma)
      : states_(states), actions_(actions), alpha_(alpha), gamma_(gamma),
        q_(states * static_cast<std::size_t>(actions), 0.0) {
    if (states == 0 || actions <= 0) throw std::invalid_argument("tabular q: empty table");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("tabular q: alpha must be in (0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("tabular q: gamma must be in [0, 1]");
  }

  std::size_t state_count() const noexcept { return states_; }
  int action_count() const noexcept { return actions_; }
  double alpha() const noexcept { return alpha_; }
  double gamma() const noexcept { return gamma_; }

  std::span<const double> row(std::size_t s) const { return {q_.data() + offset(s), static_cast<std::size_t>(actions_)}; }
  std::span<double> row(std::size_t s) { return {q_.data() + offset(s), static_cast<std::size_t>(actions_)}; }
  double value(std::size_t s, int a) const { return row(s)[static_cast<std::size_t>(a)]; }
  int greedy(std::size_t s) const { return argmax(row(s)); }

  /// q(s,a) += alpha * (r + gamma * max_a' q(s',a') * (1 - terminated) - q(s,a)).
  /// Returns the TD error before the update.
  double q_update(const Transition& t) {
    double target = t.reward;
    if (!t.terminated) {
      const auto next = row(t.next_state);
      target += gamma_ * *std::max_element(next.begin(), next.end());
    }
    double& q = row(t.state)[static_cast<std::size_t>(t.action)];
    const double td = target - q;
    q += alpha_ * td;
    return td;
  }

  /// Plain "state,action,value" dump of every entry.
  void dump(std::ostream& out) const {
    out << "state,action,value\n";
    for (std::size_t s = 0; s < states_; ++s)
      for (int a = 0; a < actions_; ++a) out << s << ',' << a << ',' << value(s, a) << '\n';
  }

 private:
  std::size_t offset(std::size_t s) const {
    if (s >= states_) throw std::out_of_range("tabular q: state index");
    return s * static_cast<std::size_t>(actions_);
  }

  std::size_t states_;
  int actions_;
  double alpha_;
  double gamma_;
  std::vector<double> q_;
};

// ---------------------------------------------------------------------------
// Ensemble of tabular learners
// ---------------------------------------------------------------------------

struct EnsembleStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

/// K independent Q-tables. Each starts from its own uniform noise in
/// [-init_noise, init_noise], re-centred so the members average to zero, and
/// receives a given transition with probability p_update.
class EnsembleQ {
 public:
  EnsembleQ(std::size_t states, int actions, double alpha, double gamma, std::size_t members, double p_update,
            double init_noise, std::uint64_t seed)
      : p_update_(p_update) {
    if (members < 2) throw std::invalid_argument("ensemble q: need at least two members");
    if (!(p_update > 0.0 && p_update <= 1.0)) throw std::invalid_argument("ensemble q: p_update must be in (0, 1]");
    if (!(init_noise >= 0.0)) throw std::invalid_argument("ensemble q: init noise must be >= 0");
    members_.reserve(members);
    for (std::size_t k = 0; k < members; ++k) members_.emplace_back(states, actions, alpha, gamma);
    if (init_noise > 0.0) {
      // Draws are centred per (s, a): the ensemble mean starts at exactly
      // zero and only the disagreement carries the optimism.
      std::vector<Rng> streams;
      for (std::size_t k = 0; k < members; ++k) streams.emplace_back(derive_seed(seed, "member") + k);
      std::vector<double> draw(members);
      for (std::size_t s = 0; s < states; ++s) {
        for (int a = 0; a < actions; ++a) {
          double mean = 0.0;
          for (std::size_t k = 0; k < members; ++k) mean += draw[k] = streams[k].uniform(-init_noise, init_noise);
          mean /= static_cast<double>(members);
          for (std::size_t k = 0; k < members; ++k)
            members_[k].row(s)[static_cast<std::size_t>(a)] = draw[k] - mean;
        }
      }
    }
  }

  /// Wraps existing members (used to build identical or hand-set ensembles).
  EnsembleQ(std::vector<TabularQ> members, double p_update) : p_update_(p_update), members_(std::move(members)) {
    if (members_.size() < 2) throw std::invalid_argument("ensemble q: need at least two members");
  }

  std::size_t size() const noexcept { return members_.size(); }
  std::size_t state_count() const noexcept { return members_.front().state_count(); }
  int action_count() const noexcept { return members_.front().action_count(); }
  const TabularQ& member(std::size_t k) const { return members_.at(k); }
  TabularQ& member(std::size_t k) { return members_.at(k); }

  void mean_row(std::size_t s, std::vector<double>& out) const {
    const auto n = static_cast<std::size_t>(action_count());
    out.assign(n, 0.0);
    for (const auto& m : members_) {
      const auto r = m.row(s);
      for (std::size_t a = 0; a < n; ++a) out[a] += r[a];
    }
    for (double& v : out) v /= static_cast<double>(members_.size());
  }

  EnsembleStats stats(std::size_t s) const {
    EnsembleStats st;
    mean_row(s, st.mean);
    // Spread is taken on offsets from member 0, so identical members give
    // exactly zero whatever the rounding of the mean.
    const std::size_t n = st.mean.size();
    const auto k = static_cast<double>(members_.size());
    const auto base = members_.front().row(s);
    std::vector<double> shift(n, 0.0);
    for (const auto& m : members_) {
      const auto r = m.row(s);
      for (std::size_t a = 0; a < n; ++a) shift[a] += r[a] - base[a];
    }
    for (double& v : shift) v /= k;
    st.std.assign(n, 0.0);
    for (const auto& m : members_) {
      const auto r = m.row(s);
      for (std::size_t a = 0; a < n; ++a) {
        const double d = r[a] - base[a] - shift[a];
        st.std[a] += d * d;
      }
    }
    for (double& v : st.std) v = std::sqrt(v / k);
    return st;
  }

  /// Q_k(s, a) for every member k.
  void member_values(std::size_t s, int a, std::vector<double>& out) const {
    out.resize(members_.size());
    for (std::size_t k = 0; k < members_.size(); ++k) out[k] = members_[k].value(s, a);
  }

  /// Masked update; returns the TD error of the ensemble mean before the update.
  double update(const Transition& t, Rng& rng) {
    double td_sum = 0.0;
    for (auto& m : members_) {
      const bool take = rng.uniform() < p_update_;
      if (take) {
        td_sum += m.q_update(t);
      } else {
        double target = t.reward;
        if (!t.terminated) {
          const auto next = m.row(t.next_state);
          target += m.gamma() * *std::max_element(next.begin(), next.end());
        }
        td_sum += target - m.value(t.state, t.action);
      }
    }
    return td_sum / static_cast<double>(members_.size());
  }

 private:
  double p_update_;
  std::vector<TabularQ> members_;
};

/// argmax_a mean(s,a) + lambda * std(s,a); ties go to the lowest index.
inline int ucb_select(const EnsembleQ& agent, std::size_t state, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("ucb: lambda must be >= 0");
  const auto st = agent.stats(state);
  std::vector<double> score(st.mean.size());
  for (std::size_t a = 0; a < score.size(); ++a) score[a] = st.mean[a] + lambda * st.std[a];
  return argmax(score);
}

// ---------------------------------------------------------------------------
// Intrinsic motivation
// ---------------------------------------------------------------------------

/// reward' = reward + scale * f(state); the source mechanism is then updated
/// on the state. `probe` must describe t's state.
inline Transition im_augment(Transition t, Mechanism& source, const Probe& probe, double scale) {
  if (!std::holds_alternative<CountMechanism>(source) && !std::holds_alternative<RndMechanism>(source))
    throw std::invalid_argument("im: intrinsic source must be a count or rnd mechanism");
  if (!(scale >= 0.0)) throw std::invalid_argument("im: scale must be >= 0");
  t.reward += scale * evaluate(source, probe);
  update(source, Experience{probe.key, probe.features, std::nullopt});
  return t;
}

// ---------------------------------------------------------------------------
// Discrete strategies
// ---------------------------------------------------------------------------

enum class Strategy { kAdeu, kUcb, kGreedyIm, kEpsGreedy };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kAdeu: return "adeu";
    case Strategy::kUcb: return "ucb";
    case Strategy::kGreedyIm: return "greedy_im";
    case Strategy::kEpsGreedy: return "eps_greedy";
  }
  return "?";
}

using DiscreteLearner = std::variant<TabularQ, EnsembleQ>;

/// pi(s) as a row over actions: the Q-row, or the ensemble mean.
inline void policy_snapshot(const DiscreteLearner& learner, std::size_t state, std::vector<double>& out) {
  if (const auto* q = std::get_if<TabularQ>(&learner)) {
    const auto r = q->row(state);
    out.assign(r.begin(), r.end());
  } else {
    std::get<EnsembleQ>(learner).mean_row(state, out);
  }
}

inline double learner_update(DiscreteLearner& learner, const Transition& t, Rng& rng) {
  if (auto* q = std::get_if<TabularQ>(&learner)) return q->q_update(t);
  return std::get<EnsembleQ>(learner).update(t, rng);
}

struct ActSettings {
  Strategy strategy = Strategy::kAdeu;
  AdeuSettings adeu{};
  double epsilon = 0.1;
  double lambda = 1.0;
};

/// One action from a discrete learner under the configured strategy.
/// `q_row` must hold the learner's policy snapshot for `state`. For
/// non-ADEU strategies the decision's spread reports the strategy's own
/// exploration knob (epsilon, or zero for the greedy ones).
inline DiscreteDecision agent_act(const DiscreteLearner& learner, std::span<const double> q_row, Mechanism* mech,
                                  const Probe& probe, std::size_t state, EpisodeMode mode,
                                  const ActSettings& settings, Rng& rng) {
  switch (settings.strategy) {
    case Strategy::kAdeu:
      if (mech == nullptr) throw std::invalid_argument("agent: adeu strategy needs a mechanism");
      return adeu_select(q_row, *mech, probe, mode, settings.adeu, rng);
    case Strategy::kUcb: {
      const auto* ensemble = std::get_if<EnsembleQ>(&learner);
      if (ensemble == nullptr) throw std::invalid_argument("agent: ucb strategy needs an ensemble learner");
      DiscreteDecision d;
      d.policy_action = argmax(q_row);
      d.action = ucb_select(*ensemble, state, settings.lambda);
      return d;
    }
    case Strategy::kGreedyIm: {
      // Exploration comes only from the intrinsic bonus in the learner's values.
      DiscreteDecision d;
      d.policy_action = argmax(q_row);
      d.action = d.policy_action;
      return d;
    }
    case Strategy::kEpsGreedy: {
      DiscreteDecision d;
      d.policy_action = argmax(q_row);
      const auto draw = select_action_bernoulli(d.policy_action, settings.epsilon, static_cast<int>(q_row.size()), rng);
      d.action = draw.action;
      d.spread = Spread{settings.epsilon, 0.0, 0.0};
      return d;
    }
  }
  throw std::logic_error("agent: unknown strategy");
}

// ---------------------------------------------------------------------------
// TD3-lite
// ---------------------------------------------------------------------------

struct ContinuousTransition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminated = false;
};

/// Bounded FIFO; once full, the oldest transition is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: capacity must be positive");
  }

  void push(ContinuousTransition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

  /// i-th oldest stored transition.
  const ContinuousTransition& at(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }

  std::vector<const ContinuousTransition*> sample(std::size_t n, Rng& rng) const {
    std::vector<const ContinuousTransition*> out(n);
    for (auto& p : out) p = &items_[rng.uniform_index(items_.size())];
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<ContinuousTransition> items_;
};

struct Td3Config {
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::vector<double> observation_scale;  // divides raw observations before the networks
  std::size_t hidden = 64;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 64;
  int policy_delay = 2;
  double soft_rate = 0.005;
  double gamma = 0.99;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double target_noise = 0.2;  // fraction of the half range
  double noise_clip = 0.5;    // fraction of the half range
};

struct Td3Report {
  bool performed = false;  // false when the replay held fewer than batch_size transitions
  bool actor_updated = false;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_objective = 0.0;  // mean Q1(s, pi(s)) before the actor step
};

/// Twin-critic, delayed-actor deterministic policy gradient on small MLPs,
/// trained with plain SGD. The actor squashes with tanh into the bounds.
class Td3Lite {
 public:
  using Batch = std::vector<const ContinuousTransition*>;

  Td3Lite(Td3Config config, std::uint64_t seed) : config_(std::move(config)), replay_(config_.replay_capacity) {
    const std::size_t obs = config_.observation_scale.size();
    const std::size_t act = config_.action_low.size();
    if (obs == 0 || act == 0 || config_.action_high.size() != act)
      throw std::invalid_argument("td3: inconsistent dimensions");
    if (config_.replay_capacity < config_.batch_size) throw std::invalid_argument("td3: replay smaller than batch");
    if (config_.batch_size == 0 || config_.policy_delay <= 0) throw std::invalid_argument("td3: invalid schedule");
    for (std::size_t i = 0; i < act; ++i) {
      if (!(config_.action_high[i] > config_.action_low[i])) throw std::invalid_argument("td3: empty action range");
      center_.push_back(0.5 * (config_.action_high[i] + config_.action_low[i]));
      half_.push_back(0.5 * (config_.action_high[i] - config_.action_low[i]));
    }
    actor_ = Mlp::init({obs, config_.hidden, act}, derive_seed(seed, "actor"));
    // Output layer within +-3e-3 (the DDPG convention), so the first policy
    // is close to the zero action instead of a random push out of bounds.
    const double shrink = 3e-3 * std::sqrt(static_cast<double>(config_.hidden));
    for (double& w : actor_.weights(1)) w *= shrink;
    for (double& b : actor_.bias(1)) b *= shrink;
    critic1_ = Mlp::init({obs + act, config_.hidden, 1}, derive_seed(seed, "critic1"));
    critic2_ = Mlp::init({obs + act, config_.hidden, 1}, derive_seed(seed, "critic2"));
    actor_target_ = actor_;
    critic1_target_ = critic1_;
    critic2_target_ = critic2_;
  }

  const Td3Config& config() const noexcept { return config_; }
  std::size_t observation_dim() const noexcept { return config_.observation_scale.size(); }
  std::size_t action_dim() const noexcept { return half_.size(); }
  std::span<const double> action_low() const noexcept { return config_.action_low; }
  std::span<const double> action_high() const noexcept { return config_.action_high; }
  ReplayBuffer& replay() noexcept { return replay_; }
  const ReplayBuffer& replay() const noexcept { return replay_; }

  Mlp& actor() noexcept { return actor_; }
  Mlp& critic1() noexcept { return critic1_; }
  Mlp& critic2() noexcept { return critic2_; }
  const Mlp& actor_target() const noexcept { return actor_target_; }
  const Mlp& critic1_target() const noexcept { return critic1_target_; }
  const Mlp& critic2_target() const noexcept { return critic2_target_; }

  /// Deterministic policy pi(s), inside the action bounds.
  std::vector<double> act(std::span<const double> state) const { return squash(actor_.forward(scaled(state))); }

  void remember(ContinuousTransition t) { replay_.push(std::move(t)); }

  /// Bellman targets with clipped target-policy noise.
  std::vector<double> critic_targets(const Batch& batch, Rng& rng) const {
    std::vector<double> y(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto& t = *batch[j];
      y[j] = t.reward;
      if (t.terminated) {
        // Keep the noise stream aligned whether or not a bootstrap is needed.
        for (std::size_t i = 0; i < action_dim(); ++i) rng.normal();
        continue;
      }
      auto next_action = squash(actor_target_.forward(scaled(t.next_state)));
      for (std::size_t i = 0; i < next_action.size(); ++i) {
        const double noise = std::clamp(rng.normal() * config_.target_noise * half_[i],
                                        -config_.noise_clip * half_[i], config_.noise_clip * half_[i]);
        next_action[i] = std::clamp(next_action[i] + noise, config_.action_low[i], config_.action_high[i]);
      }
      const auto in = critic_input(t.next_state, next_action);
      const double q1 = critic1_target_.forward(in)[0];
      const double q2 = critic2_target_.forward(in)[0];
      y[j] += config_.gamma * std::min(q1, q2);
    }
    return y;
  }

  /// Mean of Q1(s, pi(s)) over the batch.
  double actor_objective(const Batch& batch) const {
    double total = 0.0;
    for (const auto* t : batch) total += critic1_.forward(critic_input(t->state, act(t->state)))[0];
    return total / static_cast<double>(batch.size());
  }

  /// Gradient of actor_objective with respect to the actor parameters.
  std::vector<double> actor_gradient(const Batch& batch) const {
    std::vector<double> grad(actor_.parameter_count(), 0.0);
    std::vector<double> critic_scratch(critic1_.parameter_count(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::size_t obs = observation_dim();
    for (const auto* t : batch) {
      const auto actor_tape = actor_.forward_tape(scaled(t->state));
      const auto raw = actor_tape.output();
      std::vector<double> action(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) action[i] = center_[i] + half_[i] * std::tanh(raw[i]);
      const auto critic_tape = critic1_.forward_tape(critic_input(t->state, action));
      std::vector<double> grad_in;
      const double one = inv_b;
      critic1_.backward(critic_tape, std::span<const double>(&one, 1), critic_scratch, &grad_in);
      std::vector<double> grad_raw(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const double th = std::tanh(raw[i]);
        // critic sees (a - center) / half, so dQ/da = dQ/dinput / half.
        grad_raw[i] = grad_in[obs + i] * (1.0 - th * th);
      }
      actor_.backward(actor_tape, grad_raw, grad);
    }
    return grad;
  }

  Td3Report update(Rng& rng) {
    Td3Report report;
    if (replay_.size() < config_.batch_size) return report;
    report.performed = true;
    const auto batch = replay_.sample(config_.batch_size, rng);
    const auto y = critic_targets(batch, rng);
    report.critic1_loss = critic_step(critic1_, batch, y);
    report.critic2_loss = critic_step(critic2_, batch, y);
    if (++updates_ % config_.policy_delay == 0) {
      report.actor_updated = true;
      report.actor_objective = actor_objective(batch);
      const auto grad = actor_gradient(batch);
      actor_.apply_gradient(grad, -config_.actor_lr);  // ascent
      actor_target_.soft_update_from(actor_, config_.soft_rate);
      critic1_target_.soft_update_from(critic1_, config_.soft_rate);
      critic2_target_.soft_update_from(critic2_, config_.soft_rate);
    }
    return report;
  }

  /// Critic loss 0.5 * mean (Q(s,a) - y)^2 gradient step; returns mean (Q - y)^2 before it.
  double critic_step(Mlp& critic, const Batch& batch, std::span<const double> y) {
    std::vector<double> grad(critic.parameter_count(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto tape = critic.forward_tape(critic_input(batch[j]->state, batch[j]->action));
      const double err = tape.output()[0] - y[j];
      loss += err * err;
      const double g = err * inv_b;
      critic.backward(tape, std::span<const double>(&g, 1), grad);
    }
    critic.apply_gradient(grad, config_.critic_lr);
    return loss * inv_b;
  }

  std::vector<double> critic_input(std::span<const double> state, std::span<const double> action) const {
    auto in = scaled(state);
    for (std::size_t i = 0; i < action.size(); ++i) in.push_back((action[i] - center_[i]) / half_[i]);
    return in;
  }

 private:
  std::vector<double> scaled(std::span<const double> state) const {
    if (state.size() != observation_dim()) throw std::invalid_argument("td3: observation dimension");
    std::vector<double> out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) out[i] = state[i] / config_.observation_scale[i];
    return out;
  }

  std::vector<double> squash(std::span<const double> raw) const {
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      out[i] = std::clamp(center_[i] + half_[i] * std::tanh(raw[i]), config_.action_low[i], config_.action_high[i]);
    return out;
  }

  Td3Config config_;
  std::vector<double> center_;
  std::vector<double> half_;
  Mlp actor_, critic1_, critic2_;
  Mlp actor_target_, critic1_target_, critic2_target_;
  ReplayBuffer replay_;
  long updates_ = 0;
};

}  // namespace adeu
