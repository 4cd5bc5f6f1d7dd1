#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "adeu/rng.hpp"
#include "adeu/uncertainty.hpp"

namespace adeu {

enum class EpisodeMode { kNormal, kRollout };
enum class Family { kCategorical, kDiagonalGaussian, kBernoulliSwitch };

inline std::string_view to_string(EpisodeMode m) { return m == EpisodeMode::kNormal ? "normal" : "rollout"; }

/// Decided once per episode. Always consumes exactly one uniform draw.
inline EpisodeMode episode_mode(double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("episode mode: rho must be in [0, 1]");
  return rng.uniform() < rho ? EpisodeMode::kRollout : EpisodeMode::kNormal;
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

/// Diagonal Gaussian around `mean` with per-dimension standard deviation
/// spread * (high - low) / 2, clipped to the bounds.
inline std::vector<double> select_action_gaussian(std::span<const double> mean, double spread,
                                                  std::span<const double> low, std::span<const double> high,
                                                  Rng& rng) {
  if (mean.size() != low.size() || mean.size() != high.size())
    throw std::invalid_argument("gaussian: dimension mismatch");
  if (!(spread >= 0.0) || !std::isfinite(spread)) throw std::invalid_argument("gaussian: invalid spread");
  std::vector<double> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!std::isfinite(mean[i])) throw std::invalid_argument("gaussian: non-finite mean");
    if (!std::isfinite(low[i]) || !std::isfinite(high[i]) || !(high[i] >= low[i]))
      throw std::invalid_argument("gaussian: invalid bounds");
    const double sigma = spread * 0.5 * (high[i] - low[i]);
    const double z = rng.normal();
    out[i] = std::clamp(mean[i] + sigma * z, low[i], high[i]);
  }
  return out;
}

inline constexpr double kGreedyTemperature = 1e-8;

/// softmax(q / tau) with tau = tau_max * spread / c. Below 1e-8 the argmax
/// (lowest index on ties) is returned. One uniform is consumed either way.
inline int select_action_categorical(std::span<const double> q_row, double spread, double c, double tau_max,
                                     Rng& rng) {
  if (q_row.empty()) throw std::invalid_argument("categorical: empty row");
  if (!(c > 0.0)) throw std::invalid_argument("categorical: c must be positive");
  if (!(spread >= 0.0 && spread <= c)) throw std::invalid_argument("categorical: spread outside [0, c]");
  if (!(tau_max > 0.0)) throw std::invalid_argument("categorical: tau_max must be positive");
  const double u = rng.uniform();
  const double tau = tau_max * spread / c;
  const int best = argmax(q_row);
  if (tau < kGreedyTemperature) return best;

  const double top = q_row[static_cast<std::size_t>(best)];
  double weights[64];
  std::vector<double> heap;
  double* w = weights;
  if (q_row.size() > 64) {
    heap.resize(q_row.size());
    w = heap.data();
  }
  double total = 0.0;
  for (std::size_t i = 0; i < q_row.size(); ++i) {
    if (!std::isfinite(q_row[i])) throw std::invalid_argument("categorical: non-finite q value");
    w[i] = std::exp((q_row[i] - top) / tau);
    total += w[i];
  }
  double threshold = u * total;
  for (std::size_t i = 0; i < q_row.size(); ++i) {
    threshold -= w[i];
    if (threshold < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(q_row.size() - 1);
}

struct BernoulliDraw {
  int action = 0;
  bool explored = false;
};

/// With probability 1 - p_explore keep the policy action; otherwise replay
/// the locked action if any, else draw uniformly. The explore coin consumes
/// one uniform, the uniform action one more.
inline BernoulliDraw select_action_bernoulli(int policy_action, double p_explore, int action_count, Rng& rng,
                                             std::optional<int> locked_action = std::nullopt) {
  if (!(p_explore >= 0.0 && p_explore <= 1.0)) throw std::invalid_argument("bernoulli: p must be in [0, 1]");
  if (action_count <= 0) throw std::invalid_argument("bernoulli: empty action space");
  if (!(rng.uniform() < p_explore)) return {policy_action, false};
  if (locked_action) return {*locked_action, true};
  return {static_cast<int>(rng.uniform_index(static_cast<std::size_t>(action_count))), true};
}

// ---------------------------------------------------------------------------
// ADEU selection
// ---------------------------------------------------------------------------

struct AdeuSettings {
  double c = 0.2;
  double tau_max = 1.0;
  Family family = Family::kCategorical;
};

struct DiscreteDecision {
  int action = 0;
  int policy_action = 0;
  double f = 0.0;
  Spread spread{};
};

struct ContinuousDecision {
  std::vector<double> action;
  std::vector<double> policy_action;
  double f = 0.0;
  Spread spread{};
};

/// f for this step: the mechanism in normal episodes, the constant c in
/// rollout episodes.
inline double step_uncertainty(const Mechanism& mech, const Probe& probe, EpisodeMode mode, double c) {
  return mode == EpisodeMode::kRollout ? rollout_value(c) : evaluate(mech, probe);
}

/// a(s) ~ D(pi(s), g(f(s))) over a discrete action set, where pi(s) is the
/// argmax of `q_row`.
inline DiscreteDecision adeu_select(std::span<const double> q_row, Mechanism& mech, const Probe& probe,
                                    EpisodeMode mode, const AdeuSettings& settings, Rng& rng) {
  DiscreteDecision d;
  d.policy_action = argmax(q_row);
  d.f = step_uncertainty(mech, probe, mode, settings.c);
  d.spread = normalize(d.f, settings.c);
  const int n = static_cast<int>(q_row.size());
  switch (settings.family) {
    case Family::kCategorical:
      d.action = select_action_categorical(q_row, d.spread.value, settings.c, settings.tau_max, rng);
      break;
    case Family::kBernoulliSwitch: {
      auto* option = mode == EpisodeMode::kNormal ? std::get_if<EzOptionMechanism>(&mech) : nullptr;
      if (option != nullptr && option->active()) {
        d.action = select_action_bernoulli(d.policy_action, 1.0, n, rng, option->locked_action()).action;
        break;
      }
      const auto draw = select_action_bernoulli(d.policy_action, d.spread.switch_probability(), n, rng);
      d.action = draw.action;
      if (option != nullptr && draw.explored) option->begin_option(draw.action);
      break;
    }
    case Family::kDiagonalGaussian:
      throw std::invalid_argument("adeu: Gaussian family needs a continuous action space");
  }
  return d;
}

/// Continuous counterpart: Gaussian around the actor's action.
inline ContinuousDecision adeu_select(std::span<const double> mean_action, std::span<const double> low,
                                      std::span<const double> high, const Mechanism& mech, const Probe& probe,
                                      EpisodeMode mode, const AdeuSettings& settings, Rng& rng) {
  ContinuousDecision d;
  d.policy_action.assign(mean_action.begin(), mean_action.end());
  d.f = step_uncertainty(mech, probe, mode, settings.c);
  d.spread = normalize(d.f, settings.c);
  d.action = select_action_gaussian(mean_action, d.spread.value, low, high, rng);
  return d;
}

}  // namespace adeu
