#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrpr/errors.hpp"
#include "lrpr/experiment.hpp"

namespace lrpr {

enum class ReportAxis { rank, measurements };

// A parsed results row. Strings for algo/init are kept verbatim so the
// report tolerates future algorithm names.
struct ResultRow {
  std::string algo;
  std::string init;
  std::uint64_t seed = 0;
  int trial = 0;
  long n = 0, m = 0, p = 0, r = 0;
  int iters = 0;
  bool converged = false;
  std::optional<double> re;
  bool success = false;
  double runtime_ms = 0.0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

template <typename T>
T parse_field(const std::string& text, const char* column) {
  std::istringstream ss(text);
  T value{};
  ss >> value;
  if (ss.fail() || !ss.eof())
    throw SchemaError(std::string("cannot parse column '") + column +
                      "': '" + text + "'");
  return value;
}

inline bool parse_bool_field(const std::string& text, const char* column) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw SchemaError(std::string("cannot parse column '") + column + "': '" +
                    text + "'");
}

}  // namespace detail

// Reads a results CSV produced by run_sweep. The header must match exactly;
// a malformed field names its column in the error.
inline std::vector<ResultRow> read_results_csv(
    const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader)
    throw SchemaError("unexpected header: '" + line + "'");

  std::vector<ResultRow> rows;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 13)
      throw SchemaError("row " + std::to_string(rows.size() + 2) +
                        ": expected 13 fields, got " +
                        std::to_string(fields.size()));
    ResultRow row;
    row.algo = fields[0];
    row.init = fields[1];
    row.seed = detail::parse_field<std::uint64_t>(fields[2], "seed");
    row.trial = detail::parse_field<int>(fields[3], "trial");
    row.n = detail::parse_field<long>(fields[4], "n");
    row.m = detail::parse_field<long>(fields[5], "m");
    row.p = detail::parse_field<long>(fields[6], "p");
    row.r = detail::parse_field<long>(fields[7], "r");
    row.iters = detail::parse_field<int>(fields[8], "iters");
    row.converged = detail::parse_bool_field(fields[9], "converged");
    if (!fields[10].empty())
      row.re = detail::parse_field<double>(fields[10], "re");
    row.success = detail::parse_bool_field(fields[11], "success");
    row.runtime_ms = detail::parse_field<double>(fields[12], "runtime_ms");
    rows.push_back(std::move(row));
  }
  return rows;
}

struct AggregateRow {
  long r = 0, p = 0;
  std::string algo;
  std::string init;
  double success_rate = 0.0;
  int n_trials = 0;

  std::string cell() const {
    return "r" + std::to_string(r) + "_p" + std::to_string(p);
  }
};

// Per-cell success rates; row order is (r, p, algo, init) ascending, which
// makes the aggregate independent of input row order.
inline std::vector<AggregateRow> aggregate_results(
    const std::vector<ResultRow>& rows) {
  std::map<std::tuple<long, long, std::string, std::string>,
           std::pair<int, int>>
      cells;  // -> (successes, trials)
  for (const auto& row : rows) {
    auto& cell = cells[{row.r, row.p, row.algo, row.init}];
    cell.first += row.success ? 1 : 0;
    cell.second += 1;
  }
  std::vector<AggregateRow> out;
  out.reserve(cells.size());
  for (const auto& [key, counts] : cells) {
    AggregateRow agg;
    agg.r = std::get<0>(key);
    agg.p = std::get<1>(key);
    agg.algo = std::get<2>(key);
    agg.init = std::get<3>(key);
    agg.n_trials = counts.second;
    agg.success_rate =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
    out.push_back(std::move(agg));
  }
  return out;
}

inline void write_aggregate_csv(const std::filesystem::path& path,
                                const std::vector<AggregateRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "cell,algo,init,success_rate,n_trials\n";
  char buf[32];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.success_rate);
    f << row.cell() << ',' << row.algo << ',' << row.init << ',' << buf << ','
      << row.n_trials << '\n';
  }
  if (!f) throw IoError("write failed: " + path.string());
}

namespace detail {

struct SeriesPoint {
  double x = 0.0;
  double rate = 0.0;
};

inline std::string svg_color(size_t index) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#ff7f0e", "#9467bd", "#8c564b"};
  return palette[index % 6];
}

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

// Static line chart: success rate in [0,1] against the chosen axis, one
// series per (algo, init). Trials from cells sharing the same axis value
// are pooled.
inline void write_report_svg(const std::filesystem::path& path,
                             const std::vector<ResultRow>& rows,
                             ReportAxis axis) {
  // (algo, init) -> x -> (successes, trials)
  std::map<std::pair<std::string, std::string>,
           std::map<long, std::pair<int, int>>>
      series;
  for (const auto& row : rows) {
    const long x = axis == ReportAxis::rank ? row.r : row.p;
    auto& cell = series[{row.algo, row.init}][x];
    cell.first += row.success ? 1 : 0;
    cell.second += 1;
  }

  const double width = 640, height = 440;
  const double left = 70, right = 620, top = 20, bottom = 380;

  double xmin = 0, xmax = 1;
  bool have_x = false;
  for (const auto& [name, points] : series)
    for (const auto& [x, counts] : points) {
      const double xd = static_cast<double>(x);
      if (!have_x) {
        xmin = xmax = xd;
        have_x = true;
      } else {
        xmin = std::min(xmin, xd);
        xmax = std::max(xmax, xd);
      }
    }
  if (xmax == xmin) {
    xmin -= 1.0;
    xmax += 1.0;
  }

  const auto x_pos = [&](double x) {
    return left + (x - xmin) / (xmax - xmin) * (right - left);
  };
  const auto y_pos = [&](double rate) {
    return bottom - rate * (bottom - top);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // Axes and grid.
  svg << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right
      << "\" y2=\"" << bottom << "\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << bottom << "\"/>\n";
  svg << "</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double rate = i / 5.0;
    const double y = y_pos(rate);
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << right
        << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">" << detail::fmt_num(rate) << "</text>\n";
  }

  // X ticks at the observed values.
  std::vector<long> xticks;
  for (const auto& [name, points] : series)
    for (const auto& [x, counts] : points) xticks.push_back(x);
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  for (long x : xticks) {
    const double xp = x_pos(static_cast<double>(x));
    svg << "<line x1=\"" << xp << "\" y1=\"" << bottom << "\" x2=\"" << xp
        << "\" y2=\"" << bottom + 4 << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << xp << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\">" << x << "</text>\n";
  }

  const std::string x_label =
      axis == ReportAxis::rank ? "rank r" : "measurements P";
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 38
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << (top + bottom) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (top + bottom) / 2 << ")\">success rate</text>\n";
  svg << "</g>\n";

  // Series.
  size_t color_index = 0;
  double legend_y = top + 14;
  for (const auto& [name, points] : series) {
    const std::string color = detail::svg_color(color_index++);
    std::vector<detail::SeriesPoint> pts;
    for (const auto& [x, counts] : points)
      pts.push_back({static_cast<double>(x),
                     static_cast<double>(counts.first) /
                         static_cast<double>(counts.second)});
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.x < b.x; });

    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& pt : pts)
      svg << x_pos(pt.x) << ',' << y_pos(pt.rate) << ' ';
    svg << "\"/>\n";
    for (const auto& pt : pts)
      svg << "<circle cx=\"" << x_pos(pt.x) << "\" cy=\"" << y_pos(pt.rate)
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";

    const std::string label = name.first + "+" + name.second;
    svg << "<line x1=\"" << right - 150 << "\" y1=\"" << legend_y
        << "\" x2=\"" << right - 126 << "\" y2=\"" << legend_y
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << right - 120 << "\" y=\"" << legend_y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">"
        << label << "</text>\n";
    legend_y += 18;
  }

  svg << "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << svg.str();
  if (!f) throw IoError("write failed: " + path.string());
}

// The `report` entry point: SVG chart plus the per-cell aggregate CSV.
inline void write_report(const std::filesystem::path& results_csv,
                         ReportAxis axis,
                         const std::filesystem::path& svg_path,
                         const std::filesystem::path& aggregate_path) {
  const auto rows = read_results_csv(results_csv);
  write_report_svg(svg_path, rows, axis);
  write_aggregate_csv(aggregate_path, aggregate_results(rows));
}

}  // namespace lrpr
