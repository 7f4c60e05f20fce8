#pragma once

// Minimal SVG rendering of learning curves, terminal-state scatters and
// epsilon-sweep heatmaps from the CSV files a run leaves behind.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/env/maze.hpp"
#include "srl/env/task.hpp"
#include "srl/harness/run.hpp"

namespace srl {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_csv_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing metrics file '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != metrics_header()) throw std::runtime_error("'" + path + "' does not start with the metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 8) throw std::runtime_error("malformed metrics row in '" + path + "': " + line);
    MetricsRow r;
    r.iteration = std::stoi(c[0]);
    r.episodes = std::stoull(c[1]);
    r.env_steps = std::stoull(c[2]);
    r.success_rate = parse_csv_number(c[3]);
    r.mean_distance = parse_csv_number(c[4]);
    r.mean_sibling_distance = parse_csv_number(c[5]);
    r.mean_dispersion = parse_csv_number(c[6]);
    r.wall_clock_seconds = parse_csv_number(c[7]);
    rows.push_back(r);
  }
  return rows;
}

struct TerminalPoint {
  int checkpoint = 0;
  double x = 0, y = 0;
};

inline std::vector<TerminalPoint> read_terminals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing terminal snapshot file '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "checkpoint,x,y") throw std::runtime_error("'" + path + "' is not a terminal snapshot file");
  std::vector<TerminalPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 3) throw std::runtime_error("malformed snapshot row: " + line);
    out.push_back({std::stoi(c[0]), std::stod(c[1]), std::stod(c[2])});
  }
  return out;
}

struct CurveBand {
  std::vector<double> x, mean, lo, hi;
};

/// Mean and mean +- SD of success rate across runs, row by row, clipped to
/// [0, 1]. Runs are truncated to the shortest; x is the mean episode count.
inline CurveBand success_band(const std::vector<std::vector<MetricsRow>>& runs) {
  CurveBand b;
  if (runs.empty()) return b;
  std::size_t n = runs.front().size();
  for (const auto& r : runs) n = std::min(n, r.size());
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0, x = 0;
    for (const auto& r : runs) {
      m += r[i].success_rate;
      x += static_cast<double>(r[i].episodes);
    }
    m /= static_cast<double>(runs.size());
    x /= static_cast<double>(runs.size());
    double v = 0;
    for (const auto& r : runs) v += (r[i].success_rate - m) * (r[i].success_rate - m);
    const double sd = runs.size() > 1 ? std::sqrt(v / static_cast<double>(runs.size())) : 0.0;
    b.x.push_back(x);
    b.mean.push_back(m);
    b.lo.push_back(std::clamp(m - sd, 0.0, 1.0));
    b.hi.push_back(std::clamp(m + sd, 0.0, 1.0));
  }
  return b;
}

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[i % 8];
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
        << w << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
  std::ostream& raw() { return os_; }
  void text(double x, double y, const std::string& s, int size = 12, const char* anchor = "middle") {
    os_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size << "\" font-family=\"sans-serif\" text-anchor=\""
        << anchor << "\">" << s << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "black", double width = 1) {
    os_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2 << "\" stroke=\"" << stroke
        << "\" stroke-width=\"" << width << "\"/>\n";
  }
  std::string str() {
    os_ << "</svg>\n";
    return os_.str();
  }
  double width() const { return w_; }
  double height() const { return h_; }

 private:
  double w_, h_;
  std::ostringstream os_;
};

}  // namespace detail

struct LabeledRuns {
  std::string label;
  std::vector<std::vector<MetricsRow>> runs;
};

/// Success rate against episodes, one line and one shaded band per group.
inline std::string learning_curve_svg(const std::vector<LabeledRuns>& groups, const std::string& title = "") {
  const double W = 640, H = 400, L = 60, R = 160, T = 30, B = 50;
  detail::Svg svg(W, H);
  double xmax = 1;
  std::vector<CurveBand> bands;
  for (const auto& g : groups) {
    bands.push_back(success_band(g.runs));
    if (!bands.back().x.empty()) xmax = std::max(xmax, bands.back().x.back());
  }
  auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto py = [&](double y) { return T + (H - T - B) * (1.0 - y); };
  svg.line(L, py(0), W - R, py(0));
  svg.line(L, py(0), L, py(1));
  for (int k = 0; k <= 4; ++k) {
    const double y = k / 4.0;
    svg.line(L - 4, py(y), L, py(y));
    std::ostringstream s;
    s << y;
    svg.text(L - 8, py(y) + 4, s.str(), 11, "end");
  }
  for (int k = 0; k <= 4; ++k) {
    const double x = xmax * k / 4.0;
    svg.line(px(x), py(0), px(x), py(0) + 4);
    std::ostringstream s;
    s << std::llround(x);
    svg.text(px(x), py(0) + 18, s.str(), 11);
  }
  svg.text((L + W - R) / 2, H - 10, "episodes");
  svg.raw() << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" font-family=\"sans-serif\" "
            << "text-anchor=\"middle\" transform=\"rotate(-90 15 " << (T + H - B) / 2 << ")\">success rate</text>\n";
  if (!title.empty()) svg.text(W / 2, 18, title, 14);
  for (std::size_t g = 0; g < bands.size(); ++g) {
    const auto& b = bands[g];
    if (b.x.empty()) continue;
    svg.raw() << "<polygon fill=\"" << detail::palette(g) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i) svg.raw() << px(b.x[i]) << ',' << py(b.hi[i]) << ' ';
    for (std::size_t i = b.x.size(); i-- > 0;) svg.raw() << px(b.x[i]) << ',' << py(b.lo[i]) << ' ';
    svg.raw() << "\"/>\n<polyline fill=\"none\" stroke=\"" << detail::palette(g) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i) svg.raw() << px(b.x[i]) << ',' << py(b.mean[i]) << ' ';
    svg.raw() << "\"/>\n";
    const double ly = T + 20 + 20 * static_cast<double>(g);
    svg.line(W - R + 10, ly, W - R + 30, ly, detail::palette(g), 3);
    svg.text(W - R + 36, ly + 4, groups[g].label, 12, "start");
  }
  return svg.str();
}

/// Terminal points coloured by checkpoint, over the maze walls when given.
inline std::string terminal_scatter_svg(const std::vector<TerminalPoint>& points, const Bounds2& arena,
                                        const MazeLayout* layout = nullptr, const std::string& title = "") {
  const double W = 480, H = 480, M = 30;
  detail::Svg svg(W, H);
  const double sx = (W - 2 * M) / (arena.x_max - arena.x_min), sy = (H - 2 * M) / (arena.y_max - arena.y_min);
  const double s = std::min(sx, sy);
  auto px = [&](double x) { return M + (x - arena.x_min) * s; };
  auto py = [&](double y) { return H - M - (y - arena.y_min) * s; };
  svg.raw() << "<rect x=\"" << px(arena.x_min) << "\" y=\"" << py(arena.y_max) << "\" width=\""
            << (arena.x_max - arena.x_min) * s << "\" height=\"" << (arena.y_max - arena.y_min) * s
            << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  if (layout) {
    for (int row = 0; row < layout->height(); ++row)
      for (int k = 1; k < layout->width(); ++k)
        if (layout->vertical_wall(k, row)) svg.line(px(k), py(row), px(k), py(row + 1), "black", 2);
    for (int col = 0; col < layout->width(); ++col)
      for (int k = 1; k < layout->height(); ++k)
        if (layout->horizontal_wall(k, col)) svg.line(px(col), py(k), px(col + 1), py(k), "black", 2);
  }
  int max_ck = 0;
  for (const auto& p : points) max_ck = std::max(max_ck, p.checkpoint);
  for (const auto& p : points) {
    const double f = max_ck > 0 ? static_cast<double>(p.checkpoint) / max_ck : 0.0;
    const int r = static_cast<int>(40 + 200 * f), b = static_cast<int>(220 - 180 * f);
    svg.raw() << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y) << "\" r=\"3\" fill=\"rgb(" << r << ",60," << b
              << ")\" fill-opacity=\"0.7\"/>\n";
  }
  if (!title.empty()) svg.text(W / 2, 18, title, 14);
  return svg.str();
}

/// Heatmap with one row per epsilon and one column per checkpoint.
inline std::string sweep_heatmap_svg(const std::vector<double>& epsilons, const std::vector<std::vector<double>>& values,
                                     const std::string& title = "") {
  const double cell = 24, L = 60, T = 40;
  std::size_t cols = 0;
  for (const auto& r : values) cols = std::max(cols, r.size());
  const double W = L + cell * static_cast<double>(cols) + 20, H = T + cell * static_cast<double>(values.size()) + 40;
  detail::Svg svg(W, H);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : values)
    for (double v : r)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (!(hi > lo)) hi = lo + 1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::ostringstream s;
    s << epsilons[i];
    svg.text(L - 8, T + cell * (static_cast<double>(i) + 0.65), s.str(), 11, "end");
    for (std::size_t j = 0; j < values[i].size(); ++j) {
      const double v = values[i][j];
      const double f = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const int shade = static_cast<int>(255 * (1.0 - f));
      svg.raw() << "<rect x=\"" << L + cell * static_cast<double>(j) << "\" y=\"" << T + cell * static_cast<double>(i)
                << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(255," << shade << ',' << shade
                << ")\"/>\n";
    }
  }
  svg.text(L / 2, T - 10, "epsilon", 11);
  svg.text(L + cell * static_cast<double>(cols) / 2, H - 12, "checkpoint", 11);
  if (!title.empty()) svg.text(W / 2, 18, title, 14);
  return svg.str();
}

}  // namespace srl
