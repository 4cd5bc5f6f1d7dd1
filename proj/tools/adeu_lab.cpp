// adeu_lab: run, sweep, plot and oracle subcommands over the ADEU lab.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adeu/adeu.hpp"

namespace fs = std::filesystem;
using namespace adeu;

namespace {

void print_summary(const SummaryRow& s, std::size_t seeds, double seconds) {
  std::cout << s.strategy << ": mean " << fmt(s.mean) << ", max " << fmt(s.max) << ", episodes_to_max "
            << s.episodes_to_max << " (" << seeds << " seeds, " << fmt(std::round(seconds * 10) / 10) << " s)\n";
}

SummaryRow run_and_emit(const ExperimentConfig& config, const fs::path& out) {
  const auto records = run_seeds(config);
  const auto summary = aggregate(records, config.strategy.name);
  emit_outputs(records, summary, out);
  double seconds = 0;
  for (const auto& r : records) seconds += r.seconds;
  print_summary(summary, records.size(), seconds);
  return summary;
}

/// "side=6,layout_seed=3" or a config file path.
EnvSpec parse_env_spec(const std::string& text) {
  if (fs::is_regular_file(text)) return load_config(text).env;
  std::string ini = "[env]\n";
  for (const auto& item : split_list(text)) ini += item + "\n";
  return parse_config_text(ini).env;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADEU exploration lab"};
  app.require_subcommand(1);

  std::string config_path, out_flag, seeds_flag, strategies_flag, run_dir, env_spec;
  bool trace = false;

  auto* run = app.add_subcommand("run", "train every seed of one configured strategy");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seeds", seeds_flag, "comma-separated seeds, overriding the config");
  run->add_option("--out", out_flag, "output directory (default: ADEU_LAB_OUT, then the config)");
  run->add_flag("--trace", trace, "write per-step uncertainty traces");

  auto* sweep = app.add_subcommand("sweep", "run several strategies on one config");
  sweep->add_option("config", config_path, "config file")->required();
  sweep->add_option("--strategies", strategies_flag, "comma-separated strategy names")
      ->default_val("eps_greedy,adeu_count,im,ucb");
  sweep->add_option("--seeds", seeds_flag, "comma-separated seeds, overriding the config");
  sweep->add_option("--out", out_flag, "output directory");
  sweep->add_flag("--trace", trace, "write per-step uncertainty traces");

  auto* plot = app.add_subcommand("plot", "regenerate SVG plots from a run directory");
  plot->add_option("run-dir", run_dir, "directory holding evals.csv")->required();

  auto* oracle = app.add_subcommand("oracle", "print the optimal return of a grid");
  oracle->add_option("env-spec", env_spec, "config file, or key=value list such as side=6,layout_seed=1")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || sweep->parsed()) {
      auto config = load_config(config_path);
      if (!seeds_flag.empty()) config.run.seeds = parse_seed_list(seeds_flag);
      if (trace) config.run.trace = true;
      const fs::path out = resolve_out_dir(out_flag, config.run.out);
      if (run->parsed()) {
        run_and_emit(config, out);
      } else {
        const auto names = split_list(strategies_flag);
        if (names.empty()) throw ConfigError("no strategies given");
        std::vector<ExperimentConfig> configs;
        for (const auto& name : names) {
          auto c = config;
          c.strategy = resolve_strategy(name, config.strategy);
          validate(c);
          configs.push_back(std::move(c));
        }
        std::vector<SummaryRow> rows;
        for (const auto& c : configs) rows.push_back(run_and_emit(c, out / c.strategy.name));
        write_summary(out / "summary.csv", rows);
        std::vector<Series> series;
        for (const auto& r : rows) {
          Series s{r.strategy, {}};
          for (const auto& p : r.average_run) s.points.emplace_back(static_cast<double>(p.episode), p.reward);
          series.push_back(std::move(s));
        }
        write_text(out / "curves.svg", svg_line_chart(series, "average run per strategy", "episode",
                                                      "greedy episodic reward"));
      }
    } else if (plot->parsed()) {
      plot_dir(run_dir);
    } else if (oracle->parsed()) {
      const auto spec = parse_env_spec(env_spec);
      if (spec.kind != "path_grid") throw ConfigError("oracle needs a path_grid environment");
      const auto grid = make_path_grid(spec);
      const auto result = solve_path_grid(grid);
      std::cout << fmt(result.optimal_return) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
