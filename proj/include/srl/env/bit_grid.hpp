#pragma once

// Location-dependent 2D bit flipping. The agent walks a side x side grid and
// toggles the bit under it; success is an exact match with the goal bitmap.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "srl/env/task.hpp"

namespace srl {

struct BitGridConfig {
  int side = 13;
  int walk_length = 20;
  int horizon = 50;
};

namespace bitgrid {
// Actions 0-7 move through the 8-neighbourhood (clockwise from north),
// 8 toggles the current cell, 9 does nothing. Off-grid moves are no-ops.
inline constexpr int kToggle = 8;
inline constexpr int kNoop = 9;
inline constexpr int kActionCount = 10;
inline constexpr std::array<std::array<int, 2>, 8> kMoves{
    {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};  // {drow, dcol}
}  // namespace bitgrid

/// Goal bitmaps from a wandering walker: random start cell and cardinal
/// heading, heading re-drawn every k ~ U{2..5} steps (or when it would
/// leave the grid), every entered cell toggled. Retries until a bit is on.
inline std::vector<std::uint8_t> generate_bitmap_goal(Rng& rng, int side = 13, int walk_length = 20) {
  if (side < 2 || walk_length < 1) throw std::invalid_argument("bad bitmap goal parameters");
  constexpr std::array<std::array<int, 2>, 4> headings{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
  const auto n = static_cast<std::size_t>(side * side);
  for (;;) {
    std::vector<std::uint8_t> bits(n, 0);
    int row = rng.uniform_int(0, side - 1), col = rng.uniform_int(0, side - 1);
    int h = rng.uniform_int(0, 3);
    int until_turn = rng.uniform_int(2, 5);
    for (int step = 0; step < walk_length; ++step) {
      if (until_turn == 0) {
        h = rng.uniform_int(0, 3);
        until_turn = rng.uniform_int(2, 5);
      }
      auto fits = [&](int hh) {
        const int r = row + headings[hh][0], c = col + headings[hh][1];
        return r >= 0 && c >= 0 && r < side && c < side;
      };
      while (!fits(h)) {
        h = rng.uniform_int(0, 3);
        until_turn = rng.uniform_int(2, 5);
      }
      row += headings[h][0];
      col += headings[h][1];
      bits[static_cast<std::size_t>(row * side + col)] ^= 1;
      --until_turn;
    }
    for (auto b : bits)
      if (b) return bits;
  }
}

class BitGridEnv {
 public:
  struct State {
    int row = 0, col = 0;
    std::vector<std::uint8_t> bits;
    bool operator==(const State&) const = default;
  };

  explicit BitGridEnv(BitGridConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.side < 2) throw std::invalid_argument("bit grid side must be at least 2");
    const int cells = cfg_.side * cfg_.side;
    spec_.name = "bitgrid";
    spec_.state_feature_dim = 2 * cells;
    spec_.goal_feature_dim = cells;
    spec_.goal_dim = cells;
    spec_.action = ActionSpace::discrete(bitgrid::kActionCount);
    spec_.goal_map = GoalMap::bitmap_channel;
    spec_.distance = DistanceKind::l1;
    spec_.threshold = 0.0;
    spec_.horizon = cfg_.horizon;
    spec_.spatial = false;
    spec_.arena = {0, 0, static_cast<double>(cfg_.side), static_cast<double>(cfg_.side)};
    spec_.validate();
  }

  const GoalTaskSpec& spec() const { return spec_; }
  const BitGridConfig& config() const { return cfg_; }
  int side() const { return cfg_.side; }

  /// Uniform cell, all bits off.
  State sample_start(Rng& rng) const {
    State s;
    s.row = rng.uniform_int(0, cfg_.side - 1);
    s.col = rng.uniform_int(0, cfg_.side - 1);
    s.bits.assign(static_cast<std::size_t>(cfg_.side * cfg_.side), 0);
    return s;
  }

  EpisodeInit<State> sample_init(Rng& rng) const {
    EpisodeInit<State> init;
    init.seed = rng();
    init.start = sample_start(rng);
    const auto bits = generate_bitmap_goal(rng, cfg_.side, cfg_.walk_length);
    init.goal.assign(bits.begin(), bits.end());
    return init;
  }

  State transition(const State& s, const Action& a) const {
    State next = s;
    if (a.index == bitgrid::kToggle) {
      next.bits[cell(s.row, s.col)] ^= 1;
    } else if (a.index >= 0 && a.index < bitgrid::kToggle) {
      const int r = s.row + bitgrid::kMoves[static_cast<std::size_t>(a.index)][0];
      const int c = s.col + bitgrid::kMoves[static_cast<std::size_t>(a.index)][1];
      if (r >= 0 && c >= 0 && r < cfg_.side && c < cfg_.side) {
        next.row = r;
        next.col = c;
      }
    }
    return next;
  }

  GoalVec achieved_goal(const State& s) const { return GoalVec(s.bits.begin(), s.bits.end()); }

  /// One-hot agent location followed by the current bitmap.
  std::vector<float> features(const State& s) const {
    const auto cells = static_cast<std::size_t>(cfg_.side * cfg_.side);
    std::vector<float> f(2 * cells, 0.0f);
    f[cell(s.row, s.col)] = 1.0f;
    for (std::size_t i = 0; i < cells; ++i) f[cells + i] = s.bits[i];
    return f;
  }

  std::vector<float> goal_features(const GoalVec& g) const {
    if (static_cast<int>(g.size()) != spec_.goal_dim) throw std::invalid_argument("bad bitmap goal size");
    return g;
  }

  std::array<double, 2> position(const State& s) const { return {s.col + 0.5, s.row + 0.5}; }

 private:
  std::size_t cell(int row, int col) const { return static_cast<std::size_t>(row * cfg_.side + col); }

  BitGridConfig cfg_;
  GoalTaskSpec spec_;
};

}  // namespace srl
