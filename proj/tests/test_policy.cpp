#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "adeu/policy.hpp"
#include "adeu/rng.hpp"

using namespace adeu;

TEST(Gaussian, MomentsMatchTheSpread) {
  Rng rng(11);
  const std::vector<double> mean{0.3, -1.0}, low{-10, -10}, high{10, 10};
  const int n = 100000;
  const double sigma = 0.2 * 10;
  std::vector<double> sum(2, 0), sq(2, 0);
  for (int i = 0; i < n; ++i) {
    const auto a = select_action_gaussian(mean, 0.2, low, high, rng);
    for (int d = 0; d < 2; ++d) {
      sum[d] += a[d];
      sq[d] += a[d] * a[d];
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double m = sum[d] / n;
    const double sd = std::sqrt(sq[d] / n - m * m);
    EXPECT_LT(std::abs(m - mean[d]), 3 * sigma / std::sqrt(n));
    EXPECT_LT(std::abs(sd - sigma), 3 * sigma / std::sqrt(2.0 * n));
  }
}

TEST(Gaussian, ZeroSpreadReturnsTheMeanAndClipsToBounds) {
  Rng rng(1);
  const std::vector<double> mean{0.25, -0.5}, low{-1, -1}, high{1, 1};
  for (int i = 0; i < 10000; ++i) EXPECT_EQ(select_action_gaussian(mean, 0.0, low, high, rng), mean);
  for (int i = 0; i < 1000; ++i) {
    const auto a = select_action_gaussian(mean, 5.0, low, high, rng);
    EXPECT_GE(a[0], -1.0);
    EXPECT_LE(a[1], 1.0);
  }
  EXPECT_THROW(select_action_gaussian(mean, -0.1, low, high, rng), std::invalid_argument);
  EXPECT_THROW(select_action_gaussian(std::vector<double>{NAN, 0}, 0.1, low, high, rng), std::invalid_argument);
}

TEST(Categorical, SoftmaxProbabilityAtFullSpread) {
  Rng rng(3);
  const std::vector<double> q{1.0, 0.0};
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += select_action_categorical(q, 0.2, 0.2, 1.0, rng) == 0;
  EXPECT_NEAR(static_cast<double>(first) / n, std::exp(1.0) / (1 + std::exp(1.0)), 0.005);
}

TEST(Categorical, ZeroSpreadIsArgmax) {
  Rng rng(4);
  const std::vector<double> q{0.1, 2.0, 2.0, -1.0};
  for (int i = 0; i < 10000; ++i) EXPECT_EQ(select_action_categorical(q, 0.0, 0.2, 1.0, rng), 1);
}

TEST(Categorical, ConsumesOneDrawEitherWay) {
  Rng a(9), b(9);
  const std::vector<double> q{0.0, 1.0, 0.5};
  select_action_categorical(q, 0.0, 0.2, 1.0, a);
  select_action_categorical(q, 0.15, 0.2, 1.0, a);
  b.uniform();
  b.uniform();
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Categorical, RejectsBadArguments) {
  Rng rng(1);
  const std::vector<double> q{0, 1};
  EXPECT_THROW(select_action_categorical({}, 0.1, 0.2, 1, rng), std::invalid_argument);
  EXPECT_THROW(select_action_categorical(q, 0.3, 0.2, 1, rng), std::invalid_argument);
  EXPECT_THROW(select_action_categorical(q, 0.1, 0.2, 0, rng), std::invalid_argument);
  EXPECT_THROW(select_action_categorical(std::vector<double>{0, NAN}, 0.1, 0.2, 1, rng), std::invalid_argument);
}

TEST(Categorical, HigherSpreadNeverLowersOffPolicyMass) {
  const std::vector<double> q{0.0, 1.5, 0.7};
  double prev = -1;
  for (double spread : {0.02, 0.05, 0.1, 0.15, 0.2}) {
    Rng rng(17);
    int off = 0;
    for (int i = 0; i < 20000; ++i) off += select_action_categorical(q, spread, 0.2, 1.0, rng) != 1;
    EXPECT_GE(off, prev);
    prev = off;
  }
}

TEST(Bernoulli, SwitchRateAndUniformFallback) {
  Rng rng(5);
  const int n = 100000;
  int explored = 0, kept = 0;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) {
    const auto d = select_action_bernoulli(2, 0.3, 4, rng);
    explored += d.explored;
    if (!d.explored) kept += d.action == 2;
    if (d.explored) ++counts[static_cast<std::size_t>(d.action)];
  }
  EXPECT_EQ(kept, n - explored);
  EXPECT_NEAR(static_cast<double>(explored) / n, 0.3, 3 * std::sqrt(0.21 / n));
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / explored, 0.25, 0.01);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_action_bernoulli(1, 0.0, 4, rng).action, 1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_action_bernoulli(1, 1.0, 4, rng, 3).action, 3);
}

TEST(EpisodeModes, RolloutFraction) {
  Rng rng(21);
  const int n = 10000;
  int rollouts = 0;
  for (int i = 0; i < n; ++i) rollouts += episode_mode(0.1, rng) == EpisodeMode::kRollout;
  EXPECT_NEAR(static_cast<double>(rollouts) / n, 0.1, 0.006);
  EXPECT_EQ(episode_mode(0.0, rng), EpisodeMode::kNormal);
  EXPECT_EQ(episode_mode(1.0, rng), EpisodeMode::kRollout);
  EXPECT_THROW(episode_mode(1.5, rng), std::invalid_argument);
}

TEST(AdeuSelect, RolloutIgnoresTheMechanism) {
  Mechanism count = CountMechanism(0.5);
  Probe p;
  p.key = 3;
  Rng rng(1);
  const std::vector<double> q{0.0, 1.0, 0.2, 0.4};
  const auto d = adeu_select(q, count, p, EpisodeMode::kRollout, {}, rng);
  EXPECT_EQ(d.f, 0.2);
  EXPECT_EQ(d.policy_action, 1);
  const auto n = adeu_select(q, count, p, EpisodeMode::kNormal, {}, rng);
  EXPECT_EQ(n.f, 8.0);
  EXPECT_TRUE(d.spread < n.spread);
}

TEST(AdeuSelect, EzOptionReplaysTheLockedAction) {
  Mechanism ez = EzOptionMechanism(0.999, 2.0, 8, 2);
  AdeuSettings s;
  s.family = Family::kBernoulliSwitch;
  Rng rng(6);
  const std::vector<double> q{1.0, 0.0, 0.0, 0.0};
  Probe p;
  // near-certain switch: an option begins on the first step
  auto first = adeu_select(q, ez, p, EpisodeMode::kNormal, s, rng);
  auto& opt = std::get<EzOptionMechanism>(ez);
  ASSERT_TRUE(opt.active());
  const int locked = first.action;
  const auto length = opt.remaining();
  for (std::size_t i = 0; i < length; ++i) {
    const auto d = adeu_select(q, ez, p, EpisodeMode::kNormal, s, rng);
    if (i + 1 < length) {
      EXPECT_EQ(d.f, 0.0);
    }
    EXPECT_EQ(d.action, locked);
    update(ez, Experience{});
  }
  EXPECT_FALSE(opt.active() && opt.remaining() == length);
}

TEST(AdeuSelect, ContinuousSpreadFollowsTheMechanism) {
  Mechanism constant = ConstantMechanism(0.0);
  Rng rng(8);
  const std::vector<double> mean{0.1}, low{-1}, high{1};
  const auto d = adeu_select(mean, low, high, constant, Probe{}, EpisodeMode::kNormal, {}, rng);
  EXPECT_EQ(d.spread.value, 0.1);
  EXPECT_EQ(d.policy_action, mean);
  EXPECT_GE(d.action[0], -1.0);
  EXPECT_LE(d.action[0], 1.0);
}
