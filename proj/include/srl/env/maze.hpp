#pragma once

// Grid mazes of unit cells with zero-thickness walls on the grid lines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srl/core/rng.hpp"

namespace srl {

struct Vec2 {
  double x = 0.0, y = 0.0;
  bool operator==(const Vec2&) const = default;
};

enum Direction : std::uint8_t { kNorth = 1, kEast = 2, kSouth = 4, kWest = 8 };

/// Per-cell open passages. Cell (col, row) spans [col, col+1] x [row, row+1];
/// row 0 is the bottom of the arena. The outer boundary is always closed.
class MazeLayout {
 public:
  MazeLayout() = default;
  MazeLayout(int width, int height, std::uint64_t seed = 0)
      : width_(width), height_(height), seed_(seed),
        open_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    if (width < 1 || height < 1) throw std::invalid_argument("maze dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int side() const { return width_ == height_ ? width_ : -1; }
  std::uint64_t seed() const { return seed_; }
  int cell_count() const { return width_ * height_; }

  bool in_bounds(int col, int row) const {
    return col >= 0 && row >= 0 && col < width_ && row < height_;
  }
  std::uint8_t passages(int col, int row) const { return open_[index(col, row)]; }

  /// Opens the passage between a cell and its neighbour in `dir`.
  void open(int col, int row, Direction dir) {
    auto [nc, nr] = neighbour(col, row, dir);
    if (!in_bounds(col, row) || !in_bounds(nc, nr))
      throw std::invalid_argument("cannot open a boundary wall");
    open_[index(col, row)] |= dir;
    open_[index(nc, nr)] |= opposite(dir);
  }

  bool is_open(int col, int row, Direction dir) const {
    return in_bounds(col, row) && (open_[index(col, row)] & dir) != 0;
  }

  /// Whether the unit wall segment on the vertical line x = k spanning
  /// y in [row, row + 1] is closed.
  bool vertical_wall(int k, int row) const {
    if (row < 0 || row >= height_) return false;
    if (k <= 0 || k >= width_) return k == 0 || k == width_;
    return !is_open(k - 1, row, kEast);
  }
  /// Whether the unit wall on the horizontal line y = k spanning x in
  /// [col, col + 1] is closed.
  bool horizontal_wall(int k, int col) const {
    if (col < 0 || col >= width_) return false;
    if (k <= 0 || k >= height_) return k == 0 || k == height_;
    return !is_open(col, k - 1, kNorth);
  }

  int open_internal_edges() const {
    int n = 0;
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c) {
        if (is_open(c, r, kEast)) ++n;
        if (is_open(c, r, kNorth)) ++n;
      }
    return n;
  }

  static std::pair<int, int> neighbour(int col, int row, Direction dir) {
    switch (dir) {
      case kNorth: return {col, row + 1};
      case kEast: return {col + 1, row};
      case kSouth: return {col, row - 1};
      case kWest: return {col - 1, row};
    }
    return {col, row};
  }
  static Direction opposite(Direction d) {
    switch (d) {
      case kNorth: return kSouth;
      case kEast: return kWest;
      case kSouth: return kNorth;
      case kWest: return kEast;
    }
    return d;
  }

  bool operator==(const MazeLayout& o) const {
    return width_ == o.width_ && height_ == o.height_ && open_ == o.open_;
  }

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0, height_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> open_;
};

/// Perfect maze by depth-first (recursive backtracker) carving from the
/// bottom-left cell. Every pair of cells is joined by exactly one path.
inline MazeLayout generate_maze(int side, std::uint64_t seed) {
  if (side < 2) throw std::invalid_argument("maze side must be at least 2");
  MazeLayout maze(side, side, seed);
  Rng rng(seed);
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(side * side), 0);
  auto at = [side](int c, int r) { return static_cast<std::size_t>(r * side + c); };

  std::vector<std::pair<int, int>> stack{{0, 0}};
  visited[at(0, 0)] = 1;
  constexpr std::array<Direction, 4> dirs{kNorth, kEast, kSouth, kWest};
  while (!stack.empty()) {
    auto [c, r] = stack.back();
    std::array<Direction, 4> options{};
    int n = 0;
    for (Direction d : dirs) {
      auto [nc, nr] = MazeLayout::neighbour(c, r, d);
      if (maze.in_bounds(nc, nr) && !visited[at(nc, nr)]) options[n++] = d;
    }
    if (n == 0) {
      stack.pop_back();
      continue;
    }
    const Direction d = options[rng.below(static_cast<std::uint64_t>(n))];
    maze.open(c, r, d);
    auto next = MazeLayout::neighbour(c, r, d);
    visited[at(next.first, next.second)] = 1;
    stack.push_back(next);
  }
  return maze;
}

/// Straight one-cell-wide hallway, `length` cells long.
inline MazeLayout corridor_layout(int length) {
  if (length < 2) throw std::invalid_argument("corridor length must be at least 2");
  MazeLayout maze(length, 1);
  for (int c = 0; c + 1 < length; ++c) maze.open(c, 0, kEast);
  return maze;
}

/// One-cell-wide hallway bent 180 degrees: the bottom row runs right, climbs
/// at the far end, and the top row runs back. `length` cells per arm.
inline MazeLayout umaze_layout(int length) {
  if (length < 2) throw std::invalid_argument("u-maze length must be at least 2");
  MazeLayout maze(length, 2);
  for (int c = 0; c + 1 < length; ++c) {
    maze.open(c, 0, kEast);
    maze.open(c, 1, kEast);
  }
  maze.open(length - 1, 0, kNorth);
  return maze;
}

/// Text form: "maze <width> <height>" then one line per closed internal
/// edge, "v <x> <row>" (segment on x = const) or "h <y> <col>".
inline void write_maze(std::ostream& out, const MazeLayout& m) {
  out << "maze " << m.width() << " " << m.height() << "\n";
  for (int k = 1; k < m.width(); ++k)
    for (int r = 0; r < m.height(); ++r)
      if (m.vertical_wall(k, r)) out << "v " << k << " " << r << "\n";
  for (int k = 1; k < m.height(); ++k)
    for (int c = 0; c < m.width(); ++c)
      if (m.horizontal_wall(k, c)) out << "h " << k << " " << c << "\n";
}

inline std::string maze_to_string(const MazeLayout& m) {
  std::ostringstream s;
  write_maze(s, m);
  return s.str();
}

inline MazeLayout read_maze(std::istream& in) {
  std::string tag;
  int w = 0, h = 0;
  if (!(in >> tag >> w >> h) || tag != "maze") throw std::invalid_argument("bad maze header");
  if (w < 1 || h < 1) throw std::invalid_argument("bad maze dimensions");
  std::vector<std::array<int, 3>> closed;
  while (in >> tag) {
    int k = 0, j = 0;
    if (!(in >> k >> j)) throw std::invalid_argument("bad maze edge line");
    if (tag == "v" && k > 0 && k < w && j >= 0 && j < h) closed.push_back({0, k, j});
    else if (tag == "h" && k > 0 && k < h && j >= 0 && j < w) closed.push_back({1, k, j});
    else throw std::invalid_argument("bad maze edge '" + tag + "'");
  }
  MazeLayout out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w &&
          std::find(closed.begin(), closed.end(), std::array<int, 3>{0, c + 1, r}) == closed.end())
        out.open(c, r, kEast);
      if (r + 1 < h &&
          std::find(closed.begin(), closed.end(), std::array<int, 3>{1, r + 1, c}) == closed.end())
        out.open(c, r, kNorth);
    }
  return out;
}

inline MazeLayout maze_from_string(const std::string& s) {
  std::istringstream in(s);
  return read_maze(in);
}

/// Cells on the unique path between two cells (inclusive), by BFS.
inline std::vector<std::pair<int, int>> maze_path(const MazeLayout& m, std::pair<int, int> from,
                                                  std::pair<int, int> to) {
  const int n = m.cell_count();
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  auto id = [&](int c, int r) { return r * m.width() + c; };
  std::vector<int> queue{id(from.first, from.second)};
  parent[static_cast<std::size_t>(queue[0])] = queue[0];
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const int cur = queue[qi];
    const int c = cur % m.width(), r = cur / m.width();
    for (Direction d : {kNorth, kEast, kSouth, kWest}) {
      if (!m.is_open(c, r, d)) continue;
      auto [nc, nr] = MazeLayout::neighbour(c, r, d);
      const int nid = id(nc, nr);
      if (parent[static_cast<std::size_t>(nid)] >= 0) continue;
      parent[static_cast<std::size_t>(nid)] = cur;
      queue.push_back(nid);
    }
  }
  std::vector<std::pair<int, int>> path;
  int cur = id(to.first, to.second);
  if (parent[static_cast<std::size_t>(cur)] < 0) return path;
  while (true) {
    path.emplace_back(cur % m.width(), cur / m.width());
    const int p = parent[static_cast<std::size_t>(cur)];
    if (p == cur) break;
    cur = p;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline constexpr double kCollisionMargin = 1e-3;

/// Moves from `from` toward `to`, stopping at the first closed wall the
/// segment touches and backing off by kCollisionMargin along the motion
/// direction. No sliding along walls.
inline Vec2 resolve_point_collision(const MazeLayout& m, Vec2 from, Vec2 to) {
  const double dx = to.x - from.x, dy = to.y - from.y;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return from;
  double t_hit = 2.0;

  // Crossings of vertical grid lines x = k.
  if (dx != 0.0) {
    const int k_lo = static_cast<int>(std::ceil(std::min(from.x, to.x)));
    const int k_hi = static_cast<int>(std::floor(std::max(from.x, to.x)));
    for (int k = k_lo; k <= k_hi; ++k) {
      const double t = (k - from.x) / dx;
      if (!(t > 0.0 && t <= 1.0) || t >= t_hit) continue;
      const double y = from.y + t * dy;
      const double fy = std::floor(y);
      const int row = static_cast<int>(fy);
      bool wall = m.vertical_wall(k, row);
      if (y == fy) wall = wall || m.vertical_wall(k, row - 1);
      if (wall) t_hit = t;
    }
  }
  // Crossings of horizontal grid lines y = k.
  if (dy != 0.0) {
    const int k_lo = static_cast<int>(std::ceil(std::min(from.y, to.y)));
    const int k_hi = static_cast<int>(std::floor(std::max(from.y, to.y)));
    for (int k = k_lo; k <= k_hi; ++k) {
      const double t = (k - from.y) / dy;
      if (!(t > 0.0 && t <= 1.0) || t >= t_hit) continue;
      const double x = from.x + t * dx;
      const double fx = std::floor(x);
      const int col = static_cast<int>(fx);
      bool wall = m.horizontal_wall(k, col);
      if (x == fx) wall = wall || m.horizontal_wall(k, col - 1);
      if (wall) t_hit = t;
    }
  }
  if (t_hit > 1.0) return to;
  const double t_back = std::max(0.0, t_hit - kCollisionMargin / len);
  return {from.x + t_back * dx, from.y + t_back * dy};
}

}  // namespace srl
