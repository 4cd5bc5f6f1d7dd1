#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "adeu/env.hpp"

namespace adeu {

struct GridOracleResult {
  double optimal_return = 0.0;      // undiscounted, from the start cell
  std::size_t path_length = 0;
  std::vector<int> frontier_policy;  // greedy action on tile i when tiles 0..i are visited
};

/// Exact undiscounted value iteration for a path grid over the augmented
/// state (cell, frontier). Uses the layout only; the reward rule is applied
/// here directly. The step limit must not bind (max_steps >= L - 1).
inline GridOracleResult solve_path_grid(const PathGrid& grid) {
  const std::size_t side = grid.side();
  const std::size_t length = grid.path_length();
  if (static_cast<std::size_t>(grid.max_steps()) + 1 < length)
    throw std::invalid_argument("oracle: max_steps shorter than the path; horizon would bind");

  const double scale = grid.config().beta_reward_scale;
  const auto mask = grid.mask();

  // Move outcome from path tile `from` (progress index) under `action`:
  // -2 hole, -1 bump (stay), otherwise progress of the destination tile.
  auto move = [&](std::size_t from, int action) -> long {
    const std::size_t cell = grid.cell_of(from);
    const std::size_t row = cell / side;
    const std::size_t col = cell % side;
    long r = static_cast<long>(row);
    long c = static_cast<long>(col);
    if (action == kUp) --r;
    else if (action == kDown) ++r;
    else if (action == kLeft) --c;
    else ++c;
    if (r < 0 || c < 0 || r >= static_cast<long>(side) || c >= static_cast<long>(side)) return -1;
    const std::size_t next = static_cast<std::size_t>(r) * side + static_cast<std::size_t>(c);
    if (mask[next] != PathGrid::kPath) return -2;
    return grid.progress_of(next);
  };

  // value[m][pos] for 0 <= pos <= m.
  std::vector<std::vector<double>> value(length);
  GridOracleResult out;
  out.path_length = length;
  out.frontier_policy.assign(length, 0);

  for (std::size_t mi = length; mi-- > 0;) {
    auto& v = value[mi];
    v.assign(mi + 1, 0.0);
    if (mi + 1 == length) continue;  // goal reached: terminal
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t pi = mi + 1; pi-- > 0;) {
        double best = 0.0;
        int best_action = 0;
        for (int a = 0; a < kGridActionCount; ++a) {
          const long q = move(pi, a);
          double candidate = 0.0;
          if (q == -2) {
            candidate = 0.0;
          } else if (q == -1) {
            candidate = v[pi];
          } else if (static_cast<std::size_t>(q) <= mi) {
            candidate = v[static_cast<std::size_t>(q)];
          } else if (static_cast<std::size_t>(q) == mi + 1) {
            const auto qi = static_cast<std::size_t>(q);
            candidate = scale * static_cast<double>(qi + 1);
            if (qi + 1 == length) candidate += scale * static_cast<double>(length);
            else candidate += value[qi][qi];
          } else {
            throw std::logic_error("oracle: layout is not a single corridor");
          }
          if (candidate > best) {
            best = candidate;
            best_action = a;
          }
        }
        if (best > v[pi]) {
          v[pi] = best;
          changed = true;
          // later sweeps tie with a bump that just re-reads v[pi]
          if (pi == mi) out.frontier_policy[mi] = best_action;
        }
      }
    }
  }
  out.optimal_return = value[0][0];
  return out;
}

/// Closed form of the same optimum for a full forward traversal.
inline double path_grid_closed_form(const PathGrid& grid) {
  const double length = static_cast<double>(grid.path_length());
  const double scale = grid.config().beta_reward_scale;
  return scale * (length * (length + 1.0) / 2.0 - 1.0 + length);
}

}  // namespace adeu
