#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "adeu/rng.hpp"
#include "adeu/uncertainty.hpp"

using namespace adeu;

namespace {

Probe at(std::uint64_t key, std::size_t step = 0) {
  Probe p;
  p.key = key;
  p.episode_step = step;
  return p;
}

Experience seen(std::uint64_t key, std::optional<double> td = std::nullopt) {
  Experience e;
  e.key = key;
  e.td_error = td;
  return e;
}

}  // namespace

TEST(Normalize, ZeroMapsToHalfTheCap) {
  const auto s = normalize(0.0, 0.2);
  EXPECT_EQ(s.value, 0.1);
  EXPECT_EQ(s.headroom, 0.1);
  EXPECT_EQ(s.fraction(), 0.5);
  EXPECT_EQ(s.switch_probability(), 0.0);
}

TEST(Normalize, MatchesSigmoidAtOne) {
  EXPECT_NEAR(normalize(1.0, 0.2).value, 0.2 / (1 + std::exp(-1.0)), 1e-16);
  EXPECT_NEAR(normalize(1.0, 0.2).value, 0.14621, 1e-5);
  EXPECT_NEAR(normalize(-1.0, 0.2).value + normalize(1.0, 0.2).value, 0.2, 1e-16);
}

TEST(Normalize, StrictlyIncreasingAndBelowTheCap) {
  Spread prev = normalize(0.0, 0.2);
  for (int i = 1; i < 1000; ++i) {
    const double f = 50.0 * i / 999.0;
    const auto s = normalize(f, 0.2);
    EXPECT_TRUE(prev < s) << f;
    EXPECT_GE(s.value, prev.value);
    EXPECT_LE(s.value, 0.2);
    EXPECT_GT(s.headroom, 0.0) << f;
    prev = s;
  }
}

TEST(Normalize, SwitchProbabilityIsTanhHalf) {
  for (double f : {0.0, 0.3, 1.0, 2.5, 8.0}) EXPECT_NEAR(normalize(f, 0.2).switch_probability(), std::tanh(f / 2), 1e-15);
}

TEST(Normalize, RejectsBadInput) {
  EXPECT_THROW(normalize(NAN, 0.2), std::invalid_argument);
  EXPECT_THROW(normalize(INFINITY, 0.2), std::invalid_argument);
  EXPECT_THROW(normalize(1.0, 0.0), std::invalid_argument);
}

TEST(Count, InverseSquareRootOfVisits) {
  CountMechanism m(1.0, 4.0, 16);
  EXPECT_EQ(m.evaluate(at(3)), 4.0);
  for (int i = 0; i < 4; ++i) m.update(seen(3));
  EXPECT_EQ(m.evaluate(at(3)), 0.5);
  EXPECT_EQ(m.count(3), 4U);
  // keys beyond the dense block go to the sparse map
  for (int i = 0; i < 9; ++i) m.update(seen(1'000'000));
  EXPECT_NEAR(m.evaluate(at(1'000'000)), 1.0 / 3.0, 1e-16);
  EXPECT_EQ(m.evaluate(at(5)), 4.0);
}

TEST(Count, DoublingBetaHalvesTheValue) {
  CountMechanism a(0.5), b(1.0);
  for (std::uint64_t n : {0U, 1U, 2U, 7U, 100U}) EXPECT_DOUBLE_EQ(a.value_for(n), 2 * b.value_for(n));
  EXPECT_THROW(CountMechanism(0.0), std::invalid_argument);
}

TEST(Count, NonIncreasingInVisits) {
  CountMechanism m(0.5);
  double prev = m.evaluate(at(9));
  for (int i = 0; i < 50; ++i) {
    m.update(seen(9));
    const double f = m.evaluate(at(9));
    EXPECT_LT(f, prev);
    prev = f;
  }
}

TEST(Rnd, VisitedStatesLookFamiliar) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DiscreteEncoder enc(20, 20, derive_seed(seed, "encoder"));
    auto rnd = RndMechanism::create(enc.dimension(), {32}, 8, 0.05, seed);
    Rng rng(derive_seed(seed, "pick"));
    std::vector<std::size_t> cells(400);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::size_t i = 0; i < 20; ++i) std::swap(cells[i], cells[i + rng.uniform_index(400 - i)]);
    std::vector<std::vector<double>> visited, held;
    for (std::size_t i = 0; i < 10; ++i) visited.push_back(enc.encode(cells[i]));
    for (std::size_t i = 10; i < 20; ++i) held.push_back(enc.encode(cells[i]));
    for (int k = 0; k < 2000; ++k) {
      Experience e;
      e.features = visited[static_cast<std::size_t>(k) % 10];
      rnd.update(e);
    }
    double fv = 0, fh = 0;
    for (const auto& x : visited) fv += rnd.error(x);
    for (const auto& x : held) fh += rnd.error(x);
    EXPECT_LT(fv, 0.2 * fh) << "seed " << seed;
  }
}

TEST(Rnd, LossDropsOnARepeatedState) {
  DiscreteEncoder enc(8, 8, 3);
  auto rnd = RndMechanism::create(enc.dimension(), {32}, 8, 0.01, 3);
  const auto x = enc.encode(17);
  const double initial = rnd.error(x);
  Experience e;
  e.features = x;
  for (int k = 0; k < 2000; ++k) rnd.update(e);
  EXPECT_LT(rnd.error(x), 0.1 * initial);
}

TEST(Rnd, RejectsWrongFeatureSize) {
  auto rnd = RndMechanism::create(4, {8}, 2, 0.1, 1);
  EXPECT_THROW(rnd.error(std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(EnsembleStd, PopulationStdTimesLambda) {
  EnsembleStdMechanism m(2.0);
  std::vector<double> same{1.5, 1.5, 1.5};
  Probe p;
  p.ensemble_values = same;
  EXPECT_EQ(m.evaluate(p), 0.0);
  std::vector<double> two{1.0, 3.0};
  p.ensemble_values = two;
  EXPECT_DOUBLE_EQ(m.evaluate(p), 2.0);
  std::vector<double> one{1.0};
  p.ensemble_values = one;
  EXPECT_THROW(m.evaluate(p), std::invalid_argument);
}

TEST(TdError, MovingAverageOfAbsoluteError) {
  TdErrorMechanism m(0.5, 10.0);
  EXPECT_EQ(m.evaluate(at(1)), 10.0);
  m.update(seen(1, -2.0));
  EXPECT_EQ(m.evaluate(at(1)), 6.0);
  m.update(seen(1, 2.0));
  EXPECT_EQ(m.evaluate(at(1)), 4.0);
  m.update(seen(1));  // no TD error: unchanged
  EXPECT_EQ(m.evaluate(at(1)), 4.0);
  EXPECT_EQ(m.evaluate(at(2)), 10.0);
}

TEST(Session, TriggersAndRunsOut) {
  SessionMechanism m(1.0, 3, 5.0);
  EXPECT_EQ(m.evaluate(at(0)), 0.0);
  m.update(seen(0, 0.5));
  EXPECT_EQ(m.evaluate(at(0)), 0.0);
  m.update(seen(0, -1.5));
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(m.evaluate(at(0)), 5.0);
    m.update(seen(0, 100.0));  // ignored while a session runs
  }
  EXPECT_EQ(m.evaluate(at(0)), 0.0);
}

TEST(GoBinary, KnownPrefixGrowsMonotonically) {
  GoBinaryMechanism m(7.0);
  EXPECT_EQ(m.evaluate(at(0, 0)), 7.0);
  m.end_episode({3});
  EXPECT_EQ(m.evaluate(at(0, 2)), 0.0);
  EXPECT_EQ(m.evaluate(at(0, 3)), 7.0);
  m.end_episode({1});
  EXPECT_EQ(m.known_prefix_length(), 3U);
}

TEST(EzOption, ValueMatchesEpsilonOutsideAnOption) {
  EzOptionMechanism m(0.1, 2.0, 16, 4);
  EXPECT_NEAR(normalize(m.evaluate(at(0)), 0.2).switch_probability(), 0.1, 1e-15);
  m.set_option(2, 3);
  EXPECT_EQ(m.evaluate(at(0)), 0.0);
  EXPECT_EQ(m.locked_action(), 2);
  m.update(seen(0));
  EXPECT_EQ(m.remaining(), 2U);
  m.update(seen(0));
  m.update(seen(0));
  EXPECT_FALSE(m.active());
  EXPECT_FALSE(m.locked_action().has_value());
}

TEST(EzOption, LengthsFollowTheTruncatedPowerLaw) {
  // Pearson chi-square with bins merged until each expects >= 5 counts.
  const double mu = 2.0;
  const std::size_t n_max = 100, draws = 100000;
  ZetaLength z(mu, n_max);
  Rng rng(2024);
  std::vector<double> observed(n_max, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto n = z.sample(rng);
    ASSERT_GE(n, 1U);
    ASSERT_LE(n, n_max);
    observed[n - 1] += 1;
  }
  double norm = 0;
  for (std::size_t n = 1; n <= n_max; ++n) norm += std::pow(static_cast<double>(n), -mu);
  double chi2 = 0, exp_acc = 0, obs_acc = 0;
  int bins = 0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    exp_acc += draws * std::pow(static_cast<double>(n), -mu) / norm;
    obs_acc += observed[n - 1];
    if (exp_acc >= 5 || n == n_max) {
      chi2 += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
      exp_acc = obs_acc = 0;
      ++bins;
    }
  }
  // Wilson-Hilferty upper 1% point of chi-square with k = bins - 1 dof.
  const double k = bins - 1;
  const double z99 = 2.3263478740408408;
  const double crit = k * std::pow(1 - 2 / (9 * k) + z99 * std::sqrt(2 / (9 * k)), 3);
  EXPECT_LT(chi2, crit) << "bins " << bins;
}

TEST(Mechanisms, EvaluateIsFiniteAndNonNegative) {
  std::vector<Mechanism> all;
  all.emplace_back(ConstantMechanism(0.2));
  all.emplace_back(CountMechanism(0.5));
  all.emplace_back(TdErrorMechanism(0.9, 1.0));
  all.emplace_back(EzOptionMechanism(0.1, 2.0, 32, 1));
  all.emplace_back(SessionMechanism(1.0, 5, 3.0));
  all.emplace_back(GoBinaryMechanism(3.0));
  Rng rng(5);
  for (auto& m : all) {
    for (int i = 0; i < 200; ++i) {
      const auto key = rng.uniform_index(20);
      const double f = evaluate(m, at(key, static_cast<std::size_t>(i % 30)));
      EXPECT_TRUE(std::isfinite(f));
      EXPECT_GE(f, 0.0);
      update(m, seen(key, rng.normal(0, 3)));
      if (i % 30 == 29) end_episode(m, {static_cast<std::size_t>(rng.uniform_index(30))});
    }
  }
  EXPECT_EQ(mechanism_name(all[1]), "count");
}

TEST(Encoders, DiscreteAndContinuous) {
  DiscreteEncoder d(4, 5, 1);
  const auto x = d.encode(7);
  EXPECT_EQ(x.size(), d.dimension());
  EXPECT_EQ(x[0], 1.0 / 4.0);
  EXPECT_EQ(x[1], 2.0 / 5.0);
  EXPECT_EQ(d.encode(7), DiscreteEncoder(4, 5, 1).encode(7));
  ContinuousEncoder c({-1, 0}, {1, 4});
  EXPECT_EQ(c.encode(std::vector<double>{0, 1}), (std::vector<double>{0.5, 0.25}));
  EXPECT_THROW(c.encode(std::vector<double>{0}), std::invalid_argument);
  EXPECT_EQ(grid_key(std::vector<double>{0.1, 0.1}, 0.25), grid_key(std::vector<double>{0.2, 0.0}, 0.25));
  EXPECT_NE(grid_key(std::vector<double>{0.1, 0.1}, 0.25), grid_key(std::vector<double>{0.3, 0.1}, 0.25));
}
