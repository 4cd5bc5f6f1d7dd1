// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance            all twelve
//   acceptance 3 4 7      a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adeu/adeu.hpp"

namespace fs = std::filesystem;
using namespace adeu;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

ExperimentConfig source_config(const std::string& name) {
  return load_config((fs::path(ADEU_SOURCE_DIR) / "configs" / name).string());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 ---------------------------------------------------------------------------

Outcome frozen_lake_ordering() {
  auto base = source_config("frozen_lake_50.ini");
  const double optimum = solve_path_grid(make_path_grid(base.env)).optimal_return;
  std::map<std::string, SummaryRow> rows;
  std::ostringstream detail;
  for (const char* name : {"adeu_count", "eps_greedy", "im", "ucb"}) {
    auto c = base;
    c.strategy = resolve_strategy(name, base.strategy);
    rows[name] = aggregate(run_seeds(c), name);
    detail << name << " mean " << num(rows[name].mean) << " max " << num(rows[name].max) << " etm "
           << rows[name].episodes_to_max << "; ";
  }
  const auto& a = rows["adeu_count"];
  const auto& e = rows["eps_greedy"];
  const auto& i = rows["im"];
  const auto& u = rows["ucb"];
  const bool ratio = a.mean >= 5 * e.mean && a.mean >= 5 * i.mean;
  const bool optima = a.max == optimum && u.max == optimum && e.max < optimum && i.max < optimum;
  const bool speed = u.episodes_to_max >= 2 * a.episodes_to_max;
  detail << "optimum " << num(optimum) << "; (a) " << (ratio ? "ok" : "no") << " (b) " << (optima ? "ok" : "no")
         << " (c) " << (speed ? "ok" : "no") << " ratio " << num(static_cast<double>(u.episodes_to_max) / a.episodes_to_max);
  return {ratio && optima && speed, detail.str()};
}

// 2 ---------------------------------------------------------------------------

Outcome uncertainty_along_the_path() {
  auto c = parse_config_text("[env]\nside=20\n[strategy]\nname=adeu_count\n");
  DiscreteTrainer<PathGrid> t(c, make_path_grid(c.env), 1);
  const double optimum = solve_path_grid(t.env()).optimal_return;
  long e = 1;
  bool converged = false;
  for (; e <= 10000 && !converged; ++e) {
    t.train_episode(e);
    if (e % 100 == 0) converged = t.evaluate() == optimum;
  }
  if (!converged) return {false, "adeu_count did not reach the optimum on side 20 within 10000 episodes"};
  // The first normal-mode episode after convergence; rollout episodes use a flat f = c.
  std::vector<TraceRow> trace;
  for (int tries = 0; tries < 100; ++tries, ++e) {
    trace.clear();
    t.train_episode(e, &trace);
    if (trace.front().mode == EpisodeMode::kNormal) break;
  }
  const std::size_t n = trace.size();
  const std::size_t half = n / 2;
  const std::size_t tail = std::max<std::size_t>(1, (n + 9) / 10);
  double head_g = 0, tail_g = 0;
  std::size_t on_policy = 0;
  for (std::size_t k = 0; k < half; ++k) {
    head_g += trace[k].g_of_f;
    on_policy += trace[k].sampled_action == trace[k].policy_action;
  }
  for (std::size_t k = n - tail; k < n; ++k) tail_g += trace[k].g_of_f;
  head_g /= static_cast<double>(half);
  tail_g /= static_cast<double>(tail);
  const double agree = static_cast<double>(on_policy) / static_cast<double>(half);
  std::ostringstream d;
  d << "converged by episode " << e << ", traced " << n << " steps; mean g first half " << num(head_g)
    << ", last 10% " << num(tail_g) << "; on-policy first half " << num(100 * agree) << "%";
  return {head_g < tail_g && agree >= 0.9, d.str()};
}

// 3 ---------------------------------------------------------------------------

Outcome normalizer() {
  const bool half = normalize(0.0, 0.2).value == 0.1;
  bool increasing = true, bounded = true;
  Spread prev = normalize(0.0, 0.2);
  for (int i = 1; i < 1000; ++i) {
    const auto s = normalize(50.0 * i / 999.0, 0.2);
    increasing = increasing && prev < s && s.value >= prev.value;
    bounded = bounded && s.value <= 0.2 && s.headroom > 0.0;
    prev = s;
  }
  return {half && increasing && bounded, "g(0) = " + num(normalize(0.0, 0.2).value) + ", g(50) = 0.2 - " +
                                             num(normalize(50.0, 0.2).headroom)};
}

// 4 ---------------------------------------------------------------------------

Outcome sampling_moments() {
  Rng rng(derive_seed(4, "acceptance"));
  const int n = 100000;
  const std::vector<double> mean{0.25}, low{-10}, high{10};
  const double sigma = 0.2 * 10;
  double s = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double a = select_action_gaussian(mean, 0.2, low, high, rng)[0];
    s += a;
    sq += a * a;
  }
  const double m = s / n, sd = std::sqrt(sq / n - m * m);
  const bool gauss = std::abs(m - 0.25) < 3 * sigma / std::sqrt(n) && std::abs(sd - sigma) < 3 * sigma / std::sqrt(2.0 * n);

  int first = 0;
  const std::vector<double> q{1.0, 0.0};
  for (int i = 0; i < n; ++i) first += select_action_categorical(q, 0.2, 0.2, 1.0, rng) == 0;
  const double p = static_cast<double>(first) / n;
  const bool cat = std::abs(p - 0.7311) <= 0.005;

  bool exact = true;
  const std::vector<double> q4{0.1, 0.7, 0.7, -0.2};
  for (int i = 0; i < 10000; ++i) {
    exact = exact && select_action_categorical(q4, 0.0, 0.2, 1.0, rng) == 1;
    exact = exact && select_action_gaussian(mean, 0.0, low, high, rng) == mean;
  }
  return {gauss && cat && exact, "gaussian mean " + num(m) + " sd " + num(sd) + " (sigma " + num(sigma) +
                                     "); P(a0) " + num(p) + "; zero spread exact " + (exact ? "yes" : "no")};
}

// 5 ---------------------------------------------------------------------------

Outcome rollout_equivalence() {
  std::vector<std::string> mismatched;
  int compared = 0;
  for (const char* family : {"categorical", "bernoulli"}) {
    for (const char* mech : {"count", "rnd", "ensemble_std", "td_error", "ez_option", "session", "go_binary"}) {
      const std::string learner = std::string(mech) == "ensemble_std" ? "ensemble" : "tabular";
      std::ostringstream ini;
      ini << "[env]\nside=8\n[agent]\nlearner=" << learner << "\n[strategy]\nname=adeu_" << mech << "\nfamily=" << family
          << "\nrho=1\n[run]\nseeds=1\ntraining_episodes=300\neval_every=50\ntrace=true\ntrace_every=1\n";
      const auto c = parse_config_text(ini.str());
      auto reference = c;
      reference.strategy = resolve_strategy("adeu_constant", c.strategy);
      for (std::uint64_t seed : {1U, 2U}) {
        const auto a = run_one(c, seed), b = run_one(reference, seed);
        ++compared;
        if (a.trace != b.trace || a.eval_points != b.eval_points)
          mismatched.push_back(std::string(mech) + "/" + family + "/" + std::to_string(seed));
      }
    }
  }
  std::string d = std::to_string(compared) + " mechanism/family/seed runs vs constant";
  for (const auto& m : mismatched) d += "; differs: " + m;
  return {mismatched.empty(), d};
}

// 6 ---------------------------------------------------------------------------

Outcome rnd_visitation() {
  int ok = 0;
  std::string d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DiscreteEncoder enc(20, 20, derive_seed(seed, "encoder"));
    auto rnd = RndMechanism::create(enc.dimension(), {32}, 8, 0.05, derive_seed(seed, "mechanism"));
    Rng rng(derive_seed(seed, "states"));
    std::vector<std::size_t> cells(400);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::size_t i = 0; i < 20; ++i) std::swap(cells[i], cells[i + rng.uniform_index(400 - i)]);
    for (int k = 0; k < 2000; ++k) {
      const auto x = enc.encode(cells[static_cast<std::size_t>(k % 10)]);
      Experience e;
      e.features = x;
      rnd.update(e);
    }
    double fv = 0, fh = 0;
    for (std::size_t i = 0; i < 10; ++i) fv += rnd.error(enc.encode(cells[i]));
    for (std::size_t i = 10; i < 20; ++i) fh += rnd.error(enc.encode(cells[i]));
    ok += fv < 0.2 * fh;
    d += (seed > 1 ? ", " : "") + num(fv / fh);
  }
  return {ok == 5, std::to_string(ok) + "/5 seeds; visited/held-out ratios " + d};
}

// 7 ---------------------------------------------------------------------------

Outcome gradients() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto net = Mlp::init({2, 3, 1}, seed);
    Rng rng(derive_seed(seed, "gradient-data"));
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)}, y{rng.uniform(-1, 1)};
    const auto grad = net.mse_gradient(x, y);
    auto loss = [&] {
      const double e = net.forward(x)[0] - y[0];
      return 0.5 * e * e;
    };
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + 1e-5;
      const double up = loss();
      params[i] = keep - 1e-5;
      const double down = loss();
      params[i] = keep;
      const double fd = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-8}));
    }
  }
  return {worst < 1e-4, "worst relative error " + num(worst) + " over 5 nets x 13 parameters"};
}

// 8 ---------------------------------------------------------------------------

Outcome ucb_enumeration() {
  Rng rng(derive_seed(8, "acceptance"));
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(6);
    const int actions = 2 + static_cast<int>(rng.uniform_index(6));
    const double lambda = rng.uniform(0, 3);
    std::vector<TabularQ> members;
    for (std::size_t m = 0; m < k; ++m) {
      TabularQ q(1, actions, 0.5, 0.5);
      for (auto& v : q.row(0)) v = std::round(rng.uniform(-2, 2) * 4) / 4;
      members.push_back(q);
    }
    const EnsembleQ e(members, 1.0);
    int best = 0;
    double best_score = -INFINITY;
    for (int a = 0; a < actions; ++a) {
      std::vector<double> v;
      for (const auto& m : members) v.push_back(m.value(0, a));
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(k);
      double shift = 0, var = 0;
      for (double x : v) shift += x - v[0];
      shift /= static_cast<double>(k);
      for (double x : v) var += (x - v[0] - shift) * (x - v[0] - shift);
      const double score = mean + lambda * std::sqrt(var / static_cast<double>(k));
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    agree += ucb_select(e, 0, lambda) == best;
  }
  TabularQ q(1, 5, 0.5, 0.5);
  for (int a = 0; a < 5; ++a) q.row(0)[static_cast<std::size_t>(a)] = std::sin(a * 1.7);
  const EnsembleQ same({q, q, q, q}, 1.0);
  bool greedy = true;
  for (double lambda : {0.0, 0.3, 1.0, 7.0, 1e9}) {
    greedy = greedy && ucb_select(same, 0, lambda) == q.greedy(0);
    for (double s : same.stats(0).std) greedy = greedy && s == 0.0;
  }
  return {agree == 1000 && greedy, std::to_string(agree) + "/1000 instances agree; identical members greedy " +
                                       (greedy ? "yes" : "no")};
}

// 9 ---------------------------------------------------------------------------

Outcome tabular_oracle() {
  // 3-state chain: left (bump at 0) / right, entering state 2 pays 1 and ends.
  const double gamma = 0.9;
  TabularQ chain(3, 2, 0.5, gamma);
  for (int sweep = 0; sweep < 300; ++sweep)
    for (std::size_t s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) {
        const std::size_t next = a == 0 ? (s == 0 ? 0 : s - 1) : s + 1;
        chain.q_update({s, a, next == 2 ? 1.0 : 0.0, next, next == 2});
      }
  const double chain_err = std::max({std::abs(chain.value(1, 1) - 1.0), std::abs(chain.value(0, 1) - gamma),
                                     std::abs(chain.value(0, 0) - gamma * gamma),
                                     std::abs(chain.value(1, 0) - gamma * gamma)});

  // Side-6 grid seen from the agent's own frontier, a Markov model over cells.
  PathGridConfig cfg;
  cfg.side = 6;
  cfg.max_steps = 100;
  const PathGrid g(cfg);
  const std::size_t n = 36;
  auto step = [&](std::size_t s, int a) {
    const auto r = g.frontier_transition(s, a);
    return Transition{s, a, r.reward, r.next_state.index, r.terminated};
  };
  std::vector<double> dp(n * 4, 0.0);
  for (int it = 0; it < 3000; ++it) {
    auto next = dp;
    for (std::size_t s = 0; s < n; ++s) {
      if (!g.is_path(s)) continue;
      for (int a = 0; a < 4; ++a) {
        const auto t = step(s, a);
        double v = 0;
        if (!t.terminated) v = *std::max_element(dp.begin() + t.next_state * 4, dp.begin() + t.next_state * 4 + 4);
        next[s * 4 + a] = t.reward + gamma * v;
      }
    }
    dp.swap(next);
  }
  TabularQ q(n, 4, 0.5, gamma);
  for (int sweep = 0; sweep < 3000; ++sweep)
    for (std::size_t s = 0; s < n; ++s)
      if (g.is_path(s))
        for (int a = 0; a < 4; ++a) q.q_update(step(s, a));
  double grid_err = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (int a = 0; a < 4; ++a) grid_err = std::max(grid_err, std::abs(q.value(s, a) - dp[s * 4 + a]));
  return {chain_err <= 1e-6 && grid_err <= 1e-6,
          "max error chain " + num(chain_err) + ", side-6 grid " + num(grid_err)};
}

// 10 --------------------------------------------------------------------------

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "adeu_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> diffs;
  for (const char* name : {"adeu_count", "ucb", "adeu_rnd"}) {
    std::ostringstream ini;
    ini << "[env]\nside=10\n[strategy]\nname=" << name
        << "\n[run]\nseeds=1,2,3\ntraining_episodes=400\neval_every=50\ntrace=true\n";
    auto c = parse_config_text(ini.str());
    auto emit = [&](const std::string& tag, unsigned threads) {
      const auto records = run_seeds(c, threads);
      emit_outputs(records, aggregate(records, name), root / name / tag);
    };
    emit("first", 1);
    emit("second", 1);
    emit("parallel", 3);
    for (const char* f : {"evals.csv", "summary.csv", "trace_1.csv", "trace_2.csv", "trace_3.csv"}) {
      const auto a = slurp(root / name / "first" / f);
      if (a.empty()) diffs.push_back(std::string(name) + "/" + f + " missing");
      if (a != slurp(root / name / "second" / f)) diffs.push_back(std::string(name) + "/" + f + " repeat");
      if (a != slurp(root / name / "parallel" / f)) diffs.push_back(std::string(name) + "/" + f + " parallel");
    }
  }
  fs::remove_all(root);
  std::string d = "3 strategies x 3 seeds, repeat and 3-thread runs";
  for (const auto& x : diffs) d += "; " + x;
  return {diffs.empty(), d};
}

// 11 --------------------------------------------------------------------------

Outcome option_lengths() {
  const double mu = 2.0;
  const std::size_t n_max = 128, draws = 100000;
  EzOptionMechanism ez(0.1, mu, n_max, derive_seed(11, "acceptance"));
  std::vector<double> observed(n_max, 0.0);
  // Drive the mechanism itself: each option draws the next length on expiry.
  for (std::size_t i = 0; i < draws; ++i) {
    const auto len = ez.next_length();
    observed[len - 1] += 1;
    ez.begin_option(0);
    for (std::size_t k = 0; k < len; ++k) ez.update(Experience{});
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
  const double k = bins - 1;
  const double z99 = 2.3263478740408408;
  const double crit = k * std::pow(1 - 2 / (9 * k) + z99 * std::sqrt(2 / (9 * k)), 3);
  return {chi2 < crit, "chi2 " + num(chi2) + " on " + std::to_string(bins - 1) + " dof, 1% critical " + num(crit)};
}

// 12 --------------------------------------------------------------------------

Outcome continuous_sanity() {
  auto base = source_config("point_mass.ini");
  auto constant = base;
  base.strategy = resolve_strategy("adeu_count", base.strategy);
  constant.strategy = resolve_strategy("adeu_constant", base.strategy);
  const auto a = run_seeds(base), b = run_seeds(constant);
  int wins = 0;
  std::string d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto mean = [](const RunRecord& r) {
      double s = 0;
      for (const auto& p : r.eval_points) s += p.reward;
      return s / static_cast<double>(r.eval_points.size());
    };
    const double ma = mean(a[i]), mb = mean(b[i]);
    wins += ma >= mb;
    d += (i ? ", " : "") + num(ma) + " vs " + num(mb);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds count >= constant (mean eval return: " + d + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"frozen lake ordering on a 50x50 grid", frozen_lake_ordering},
      {"uncertainty low on the known path, high near the goal", uncertainty_along_the_path},
      {"normalizer exact, monotone and bounded", normalizer},
      {"sampling moments", sampling_moments},
      {"rollout episodes ignore the mechanism", rollout_equivalence},
      {"rnd tracks visitation", rnd_visitation},
      {"mlp gradients match finite differences", gradients},
      {"ucb selection matches enumeration", ucb_enumeration},
      {"tabular q-learning reaches the dp fixed point", tabular_oracle},
      {"byte-identical outputs, sequential and parallel", determinism},
      {"option lengths follow the truncated power law", option_lengths},
      {"point mass: counts at least as good as constant noise", continuous_sanity},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!wanted.empty() && !wanted.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first << " -- " << o.detail
              << " [" << num(std::round(secs * 10) / 10) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
