#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adeu/harness/runner.hpp"

namespace adeu {

struct SummaryRow {
  std::string strategy;
  double mean = 0.0;
  double max = 0.0;
  long episodes_to_max = 0;
  std::vector<EvalPoint> average_run;
};

/// Pointwise mean across seeds, then mean and max over that average run.
inline SummaryRow aggregate(const std::vector<RunRecord>& records, std::string strategy = {}) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  const auto& first = records.front().eval_points;
  if (first.empty()) throw std::invalid_argument("aggregate: empty evaluation series");
  for (const auto& r : records) {
    if (r.eval_points.size() != first.size()) throw std::invalid_argument("aggregate: mismatched evaluation counts");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (r.eval_points[i].episode != first[i].episode)
        throw std::invalid_argument("aggregate: mismatched evaluation cadence");
  }
  SummaryRow row;
  row.strategy = std::move(strategy);
  row.average_run.resize(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    double sum = 0.0;
    for (const auto& r : records) sum += r.eval_points[i].reward;
    row.average_run[i] = {first[i].episode, sum / static_cast<double>(records.size())};
  }
  double total = 0.0;
  for (const auto& p : row.average_run) total += p.reward;
  row.mean = total / static_cast<double>(row.average_run.size());
  row.episodes_to_max = episodes_to_max(row.average_run);
  row.max = -HUGE_VAL;
  for (const auto& p : row.average_run) row.max = std::max(row.max, p.reward);
  return row;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view text, const std::string& where) {
  T value{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size())
    throw std::runtime_error(where + ": cannot parse '" + std::string(text) + "'");
  return value;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline constexpr std::string_view kEvalsHeader = "seed,episode,reward";
inline constexpr std::string_view kSummaryHeader = "strategy,mean,max,episodes_to_max";
inline constexpr std::string_view kTraceHeader = "episode,step,state,f,g_of_f,policy_action,sampled_action,mode";

inline std::string join_action(const std::vector<double>& a) {
  std::string s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ';';
    s += fmt(a[i]);
  }
  return s;
}

inline void write_evals(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  auto out = open_out(path);
  out << kEvalsHeader << '\n';
  for (const auto& r : records)
    for (const auto& p : r.eval_points) out << r.seed << ',' << p.episode << ',' << fmt(p.reward) << '\n';
  close_out(out, path);
}

inline void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& s : rows)
    out << s.strategy << ',' << fmt(s.mean) << ',' << fmt(s.max) << ',' << s.episodes_to_max << '\n';
  close_out(out, path);
}

inline void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  auto out = open_out(path);
  out << kTraceHeader << '\n';
  for (const auto& t : rows) {
    out << t.episode << ',' << t.step << ',' << t.state << ',' << fmt(t.f) << ',' << fmt(t.g_of_f) << ','
        << join_action(t.policy_action) << ',' << join_action(t.sampled_action) << ',' << to_string(t.mode) << '\n';
  }
  close_out(out, path);
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  if (!std::getline(in, line) || line != header) throw std::runtime_error(path.string() + ": unexpected header");
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

/// Re-reads evals.csv into per-seed records, in first-appearance order.
inline std::vector<RunRecord> read_evals(const std::filesystem::path& path) {
  std::vector<RunRecord> records;
  std::map<std::uint64_t, std::size_t> index;
  for (const auto& line : read_lines(path, kEvalsHeader)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw std::runtime_error(path.string() + ": bad row '" + line + "'");
    const auto seed = parse_number<std::uint64_t>(cells[0], path.string());
    auto [it, inserted] = index.try_emplace(seed, records.size());
    if (inserted) records.push_back(RunRecord{seed, {}, {}, 0.0, std::nullopt});
    records[it->second].eval_points.push_back(
        {parse_number<long>(cells[1], path.string()), parse_number<double>(cells[2], path.string())});
  }
  for (auto& r : records)
    if (!r.eval_points.empty()) r.episodes_to_first_max = episodes_to_max(r);
  return records;
}

inline std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
  std::vector<SummaryRow> rows;
  for (const auto& line : read_lines(path, kSummaryHeader)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw std::runtime_error(path.string() + ": bad row '" + line + "'");
    SummaryRow row;
    row.strategy = std::string(cells[0]);
    row.mean = parse_number<double>(cells[1], path.string());
    row.max = parse_number<double>(cells[2], path.string());
    row.episodes_to_max = parse_number<long>(cells[3], path.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Trace rows; actions come back as their ';'-separated components.
inline std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  auto parse_action = [&](std::string_view cell) {
    std::vector<double> a;
    std::size_t start = 0;
    for (;;) {
      const auto semi = cell.find(';', start);
      a.push_back(parse_number<double>(cell.substr(start, semi == std::string_view::npos ? semi : semi - start),
                                       path.string()));
      if (semi == std::string_view::npos) break;
      start = semi + 1;
    }
    return a;
  };
  std::vector<TraceRow> rows;
  for (const auto& line : read_lines(path, kTraceHeader)) {
    const auto c = split_csv_line(line);
    if (c.size() != 8) throw std::runtime_error(path.string() + ": bad row '" + line + "'");
    TraceRow t;
    t.episode = parse_number<long>(c[0], path.string());
    t.step = parse_number<long>(c[1], path.string());
    t.state = parse_number<std::uint64_t>(c[2], path.string());
    t.f = parse_number<double>(c[3], path.string());
    t.g_of_f = parse_number<double>(c[4], path.string());
    t.policy_action = parse_action(c[5]);
    t.sampled_action = parse_action(c[6]);
    if (c[7] == "normal") t.mode = EpisodeMode::kNormal;
    else if (c[7] == "rollout") t.mode = EpisodeMode::kRollout;
    else throw std::runtime_error(path.string() + ": bad mode '" + std::string(c[7]) + "'");
    rows.push_back(std::move(t));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Minimal line chart: axes, min/max tick labels, one polyline per series.
inline std::string svg_line_chart(const std::vector<Series>& series, std::string_view title, std::string_view x_label,
                                  std::string_view y_label) {
  constexpr double W = 720, H = 420, L = 70, R = 170, T = 40, B = 50;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                            "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << x_label
      << "</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << y_label << "</text>\n"
      << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(x0) << "</text>\n"
      << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(x1) << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << fmt(y0) << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << fmt(y1) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].points) svg << px(x) << ',' << py(y) << ' ';
    svg << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(i);
    svg << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << series[i].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  close_out(out, path);
}

/// Per-seed curves plus the average run, from evals.csv.
inline void plot_curves(const std::filesystem::path& dir, std::string_view title = "evaluation return") {
  const auto records = read_evals(dir / "evals.csv");
  std::vector<Series> series;
  for (const auto& r : records) {
    Series s{"seed " + std::to_string(r.seed), {}};
    for (const auto& p : r.eval_points) s.points.emplace_back(static_cast<double>(p.episode), p.reward);
    series.push_back(std::move(s));
  }
  if (records.size() > 1) {
    try {
      Series avg{"average", {}};
      for (const auto& p : aggregate(records).average_run) avg.points.emplace_back(static_cast<double>(p.episode), p.reward);
      series.push_back(std::move(avg));
    } catch (const std::invalid_argument&) {
      // mismatched cadences: per-seed curves only
    }
  }
  write_text(dir / "curves.svg", svg_line_chart(series, title, "episode", "greedy episodic reward"));
}

/// g(f) against cumulative traced step, one line per seed. Episodes are
/// concatenated so the x-axis stays monotone in episode order.
inline void plot_uncertainty(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("trace_") && name.ends_with(".csv")) files.push_back(entry.path());
  }
  if (files.empty()) return;
  std::sort(files.begin(), files.end());
  std::vector<Series> series;
  for (const auto& f : files) {
    Series s{f.stem().string().substr(6), {}};
    double x = 0;
    for (const auto& t : read_trace(f)) s.points.emplace_back(x++, t.g_of_f);
    series.push_back(std::move(s));
  }
  write_text(dir / "uncertainty.svg", svg_line_chart(series, "uncertainty g(f) over traced steps", "traced step", "g(f)"));
}

inline void plot_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "evals.csv")) throw std::runtime_error("no evals.csv in " + dir.string());
  plot_curves(dir);
  plot_uncertainty(dir);
}

/// Output precedence: explicit flag, then ADEU_LAB_OUT, then the config.
inline std::filesystem::path resolve_out_dir(const std::string& flag, const std::string& configured) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ADEU_LAB_OUT"); env != nullptr && *env != '\0') return env;
  return configured;
}

/// Writes evals.csv, summary.csv, trace files (only when any trace rows
/// exist), and the SVG plots.
inline void emit_outputs(const std::vector<RunRecord>& records, const SummaryRow& summary,
                         const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_evals(dir / "evals.csv", records);
  write_summary(dir / "summary.csv", {summary});
  for (const auto& r : records)
    if (!r.trace.empty()) write_trace(dir / ("trace_" + std::to_string(r.seed) + ".csv"), r.trace);
  plot_curves(dir, summary.strategy);
  plot_uncertainty(dir);
}

}  // namespace adeu
