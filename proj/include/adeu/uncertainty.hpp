#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "adeu/neural.hpp"
#include "adeu/rng.hpp"

namespace adeu {

// ---------------------------------------------------------------------------
// Normalizer
// ---------------------------------------------------------------------------

/// g(f) = c * sigmoid(f), stored together with its complement c - g(f).
///
/// For large f the value rounds to c in double precision while the
/// complement c * sigmoid(-f) is still resolved, so ordering and the open
/// upper bound are decided on the complement.
struct Spread {
  double value = 0.0;
  double headroom = 0.0;
  double cap = 0.0;

  /// sigmoid(f), the fraction of the cap in use.
  double fraction() const noexcept { return cap > 0.0 ? value / cap : 0.0; }

  /// 2 * sigmoid(f) - 1 = tanh(f / 2): the switch probability used by the
  /// Bernoulli family, zero at f = 0 and approaching one as f grows.
  double switch_probability() const noexcept { return cap > 0.0 ? (value - headroom) / cap : 0.0; }

  friend bool operator<(const Spread& a, const Spread& b) noexcept { return a.headroom > b.headroom; }
  friend bool operator>(const Spread& a, const Spread& b) noexcept { return b < a; }
};

inline Spread normalize(double f, double c) {
  if (!std::isfinite(f)) throw std::invalid_argument("normalize: non-finite uncertainty");
  if (!(c > 0.0)) throw std::invalid_argument("normalize: c must be positive");
  const double e = std::exp(-std::abs(f));
  const double big = c / (1.0 + e);
  const double small = c * e / (1.0 + e);
  return f >= 0.0 ? Spread{big, small, c} : Spread{small, big, c};
}

/// Uncertainty used throughout a rollout episode: the constant c.
inline double rollout_value(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("rollout: c must be positive");
  return c;
}

// ---------------------------------------------------------------------------
// Inputs to mechanisms
// ---------------------------------------------------------------------------

/// What a mechanism may inspect for the current state.
struct Probe {
  std::uint64_t key = 0;                    // tabular id or discretized cell
  std::span<const double> features{};       // encoder output (RND)
  std::size_t episode_step = 0;
  std::span<const double> ensemble_values{};  // Q_k(s, pi(s)) per member
};

/// One step of experience, as far as mechanisms care.
struct Experience {
  std::uint64_t key = 0;
  std::span<const double> features{};
  std::optional<double> td_error;
};

struct EpisodeOutcome {
  std::size_t greedy_prefix = 0;  // leading steps that followed pi(s) and survived
};

// ---------------------------------------------------------------------------
// Mechanisms
// ---------------------------------------------------------------------------

class ConstantMechanism {
 public:
  explicit ConstantMechanism(double c) : c_(c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("constant mechanism: c must be >= 0");
  }
  double evaluate(const Probe&) const { return c_; }
  void update(const Experience&) {}
  double c() const noexcept { return c_; }

 private:
  double c_;
};

/// f(s) = 1 / (beta * sqrt(n(s))); unseen states report unseen_multiplier / beta.
class CountMechanism {
 public:
  CountMechanism(double beta, double unseen_multiplier = 4.0, std::size_t dense_capacity = 0)
      : beta_(beta), unseen_multiplier_(unseen_multiplier), dense_(dense_capacity, 0) {
    if (!(beta > 0.0)) throw std::invalid_argument("count mechanism: beta must be positive");
    if (!(unseen_multiplier > 0.0)) throw std::invalid_argument("count mechanism: unseen multiplier must be positive");
  }

  double evaluate(const Probe& probe) const { return value_for(count(probe.key)); }

  void update(const Experience& e) {
    if (e.key < dense_.size()) ++dense_[e.key];
    else ++sparse_[e.key];
  }

  double value_for(std::uint64_t n) const {
    if (n == 0) return unseen_multiplier_ / beta_;
    return 1.0 / (beta_ * std::sqrt(static_cast<double>(n)));
  }

  std::uint64_t count(std::uint64_t key) const {
    if (key < dense_.size()) return dense_[key];
    const auto it = sparse_.find(key);
    return it == sparse_.end() ? 0 : it->second;
  }

  void set_count(std::uint64_t key, std::uint64_t n) {
    if (key < dense_.size()) dense_[key] = n;
    else sparse_[key] = n;
  }

  double beta() const noexcept { return beta_; }
  double unseen_value() const noexcept { return unseen_multiplier_ / beta_; }

 private:
  double beta_;
  double unseen_multiplier_;
  std::vector<std::uint64_t> dense_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_;
};

/// Random network distillation: squared error between a trained predictor
/// and a frozen, randomly initialized target.
class RndMechanism {
 public:
  RndMechanism(std::shared_ptr<const Mlp> target, Mlp predictor, double learning_rate)
      : target_(std::move(target)), predictor_(std::move(predictor)), lr_(learning_rate) {
    if (!target_) throw std::invalid_argument("rnd: missing target network");
    if (target_->layer_sizes().front() != predictor_.layer_sizes().front() ||
        target_->layer_sizes().back() != predictor_.layer_sizes().back())
      throw std::invalid_argument("rnd: target and predictor shapes disagree");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("rnd: learning rate must be positive");
  }

  /// Target and predictor with the given hidden widths, seeded independently.
  static RndMechanism create(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim,
                             double learning_rate, std::uint64_t seed) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(output_dim);
    auto target = std::make_shared<const Mlp>(Mlp::init(sizes, derive_seed(seed, "rnd-target")));
    return RndMechanism(std::move(target), Mlp::init(sizes, derive_seed(seed, "rnd-predictor")), learning_rate);
  }

  double evaluate(const Probe& probe) const { return error(probe.features); }

  void update(const Experience& e) {
    const auto target = target_->forward(e.features);
    predictor_.train_mse(e.features, target, lr_);
  }

  double error(std::span<const double> features) const {
    if (features.size() != predictor_.input_size()) throw std::invalid_argument("rnd: feature dimension mismatch");
    const auto p = predictor_.forward(features);
    const auto t = target_->forward(features);
    double sq = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) sq += (p[k] - t[k]) * (p[k] - t[k]);
    if (!std::isfinite(sq)) throw std::runtime_error("rnd: non-finite prediction error");
    return sq;
  }

  const Mlp& predictor() const noexcept { return predictor_; }
  const std::shared_ptr<const Mlp>& target() const noexcept { return target_; }

 private:
  std::shared_ptr<const Mlp> target_;
  Mlp predictor_;
  double lr_;
};

/// lambda * population std over ensemble members of Q(s, pi(s)).
class EnsembleStdMechanism {
 public:
  explicit EnsembleStdMechanism(double lambda) : lambda_(lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("ensemble std: lambda must be >= 0");
  }

  double evaluate(const Probe& probe) const {
    const auto values = probe.ensemble_values;
    if (values.size() < 2) throw std::invalid_argument("ensemble std: agent view lacks ensemble values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return lambda_ * std::sqrt(var);
  }
  void update(const Experience&) {}
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// Value-difference emulation: per-state moving average of |TD error|.
class TdErrorMechanism {
 public:
  TdErrorMechanism(double decay, double initial) : decay_(decay), initial_(initial) {
    if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("td error: decay must be in [0, 1)");
    if (!(initial >= 0.0)) throw std::invalid_argument("td error: initial value must be >= 0");
  }

  double evaluate(const Probe& probe) const {
    const auto it = values_.find(probe.key);
    return it == values_.end() ? initial_ : it->second;
  }

  void update(const Experience& e) {
    if (!e.td_error) return;
    auto [it, inserted] = values_.try_emplace(e.key, initial_);
    it->second = decay_ * it->second + (1.0 - decay_) * std::abs(*e.td_error);
  }

 private:
  double decay_;
  double initial_;
  std::unordered_map<std::uint64_t, double> values_;
};

/// Truncated zeta law P(n) proportional to n^-mu on 1..n_max.
class ZetaLength {
 public:
  ZetaLength(double mu, std::size_t n_max) : mu_(mu) {
    if (!(mu > 1.0)) throw std::invalid_argument("zeta: exponent must exceed 1");
    if (n_max < 1) throw std::invalid_argument("zeta: n_max must be positive");
    cdf_.resize(n_max);
    double total = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) total += std::pow(static_cast<double>(n), -mu);
    double acc = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
      acc += std::pow(static_cast<double>(n), -mu) / total;
      cdf_[n - 1] = acc;
    }
    cdf_.back() = 1.0;
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::size_t>(it - cdf_.begin()) + 1;
  }

  std::size_t max_length() const noexcept { return cdf_.size(); }
  double mu() const noexcept { return mu_; }

 private:
  double mu_;
  std::vector<double> cdf_;
};

/// epsilon-z-greedy emulation. Outside an option the value is chosen so the
/// switch probability equals epsilon; while an option runs the value is 0
/// and the locked action is replayed.
class EzOptionMechanism {
 public:
  EzOptionMechanism(double epsilon, double mu, std::size_t n_max, std::uint64_t seed)
      : epsilon_(epsilon), lengths_(mu, n_max), rng_(seed) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("ez option: epsilon must be in (0, 1)");
    next_length_ = lengths_.sample(rng_);
  }

  double evaluate(const Probe&) const { return active() ? 0.0 : 2.0 * std::atanh(epsilon_); }

  void update(const Experience&) {
    if (remaining_ == 0) return;
    if (--remaining_ == 0) {
      locked_action_.reset();
      next_length_ = lengths_.sample(rng_);
    }
  }

  /// Starts replaying `action` for the pre-sampled option length.
  void begin_option(int action) {
    locked_action_ = action;
    remaining_ = next_length_;
  }

  bool active() const noexcept { return remaining_ > 0 && locked_action_.has_value(); }
  std::optional<int> locked_action() const noexcept { return active() ? locked_action_ : std::nullopt; }
  std::size_t remaining() const noexcept { return remaining_; }
  std::size_t next_length() const noexcept { return next_length_; }
  const ZetaLength& lengths() const noexcept { return lengths_; }

  void set_option(int action, std::size_t remaining) {
    locked_action_ = action;
    remaining_ = remaining;
  }

 private:
  double epsilon_;
  ZetaLength lengths_;
  Rng rng_;
  std::size_t remaining_ = 0;
  std::size_t next_length_ = 1;
  std::optional<int> locked_action_;
};

/// Signal-triggered exploration session: once |TD error| exceeds the trigger
/// threshold, report a high value for session_length steps.
class SessionMechanism {
 public:
  SessionMechanism(double trigger_threshold, std::size_t session_length, double high_value)
      : threshold_(trigger_threshold), length_(session_length), high_(high_value) {
    if (!(trigger_threshold >= 0.0)) throw std::invalid_argument("session: threshold must be >= 0");
    if (session_length == 0) throw std::invalid_argument("session: length must be positive");
  }

  double evaluate(const Probe&) const { return remaining_ > 0 ? high_ : 0.0; }

  void update(const Experience& e) {
    if (remaining_ > 0) {
      --remaining_;
      return;
    }
    if (e.td_error && std::abs(*e.td_error) > threshold_) remaining_ = length_;
  }

  std::size_t remaining() const noexcept { return remaining_; }

 private:
  double threshold_;
  std::size_t length_;
  double high_;
  std::size_t remaining_ = 0;
};

/// Go-explore emulation: certain for the first known_prefix steps of an
/// episode, uncertain afterwards.
class GoBinaryMechanism {
 public:
  explicit GoBinaryMechanism(double high_value) : high_(high_value) {}

  double evaluate(const Probe& probe) const { return probe.episode_step < known_prefix_ ? 0.0 : high_; }
  void update(const Experience&) {}
  void end_episode(const EpisodeOutcome& outcome) { known_prefix_ = std::max(known_prefix_, outcome.greedy_prefix); }
  std::size_t known_prefix_length() const noexcept { return known_prefix_; }

 private:
  double high_;
  std::size_t known_prefix_ = 0;
};

using Mechanism = std::variant<ConstantMechanism, CountMechanism, RndMechanism, EnsembleStdMechanism,
                               TdErrorMechanism, EzOptionMechanism, SessionMechanism, GoBinaryMechanism>;

inline constexpr std::string_view kMechanismNames[] = {"constant", "count", "rnd", "ensemble_std",
                                                       "td_error", "ez_option", "session", "go_binary"};

inline std::string_view mechanism_name(const Mechanism& m) { return kMechanismNames[m.index()]; }

inline double evaluate(const Mechanism& m, const Probe& probe) {
  const double f = std::visit([&](const auto& mech) { return mech.evaluate(probe); }, m);
  if (!std::isfinite(f) || f < 0.0) throw std::runtime_error("uncertainty: mechanism produced an invalid value");
  return f;
}

inline void update(Mechanism& m, const Experience& e) {
  std::visit([&](auto& mech) { mech.update(e); }, m);
}

inline void end_episode(Mechanism& m, const EpisodeOutcome& outcome) {
  if (auto* go = std::get_if<GoBinaryMechanism>(&m)) go->end_episode(outcome);
}

inline bool needs_features(const Mechanism& m) { return std::holds_alternative<RndMechanism>(m); }
inline bool needs_ensemble(const Mechanism& m) { return std::holds_alternative<EnsembleStdMechanism>(m); }

// ---------------------------------------------------------------------------
// State encoders
// ---------------------------------------------------------------------------

/// Discrete state -> (row/rows, col/cols) followed by a fixed random
/// projection of a hashed one-hot code.
class DiscreteEncoder {
 public:
  static constexpr std::size_t kBuckets = 4096;
  static constexpr std::size_t kProjection = 16;

  DiscreteEncoder(std::size_t rows, std::size_t cols, std::uint64_t seed) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("encoder: empty geometry");
    Rng rng(seed);
    projection_.resize(kBuckets * kProjection);
    for (double& w : projection_) w = rng.normal();
  }

  std::size_t dimension() const noexcept { return 2 + kProjection; }

  std::vector<double> encode(std::size_t index) const {
    std::vector<double> out(dimension());
    out[0] = static_cast<double>(index / cols_) / static_cast<double>(rows_);
    out[1] = static_cast<double>(index % cols_) / static_cast<double>(cols_);
    const std::size_t bucket = mix64(index) % kBuckets;
    for (std::size_t k = 0; k < kProjection; ++k) out[2 + k] = projection_[bucket * kProjection + k];
    return out;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> projection_;
};

/// Continuous state -> per-dimension min-max scaling to [0, 1].
class ContinuousEncoder {
 public:
  ContinuousEncoder(std::vector<double> low, std::vector<double> high) : low_(std::move(low)), high_(std::move(high)) {
    if (low_.size() != high_.size() || low_.empty()) throw std::invalid_argument("encoder: bounds mismatch");
    for (std::size_t i = 0; i < low_.size(); ++i)
      if (!(high_[i] > low_[i])) throw std::invalid_argument("encoder: empty range");
  }

  std::size_t dimension() const noexcept { return low_.size(); }

  std::vector<double> encode(std::span<const double> v) const {
    if (v.size() != low_.size()) throw std::invalid_argument("encoder: state dimension");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) throw std::invalid_argument("encoder: non-finite state");
      out[i] = (v[i] - low_[i]) / (high_[i] - low_[i]);
    }
    return out;
  }

 private:
  std::vector<double> low_;
  std::vector<double> high_;
};

/// Cell key for count-based mechanisms on continuous positions.
inline std::uint64_t grid_key(std::span<const double> position, double cell) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (double x : position) {
    const auto q = static_cast<std::int64_t>(std::floor(x / cell));
    h = mix64(h ^ static_cast<std::uint64_t>(q));
  }
  return h;
}

}  // namespace adeu
