// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace zext::geometry {

/// Disc obstacle of the fundamental cell [0,1) x [0,1). Its translates by
/// (l, k), l in Z (cylinder axis) and k in Z (torus wraparound), tile the table.
struct Obstacle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

/// Periodic obstacle geometry of the Lorentz gas.
struct BilliardTable {
  std::vector<Obstacle> obstacles;
  /// Certified bound on free flight; set by validate_finite_horizon.
  std::optional<double> horizon_bound;
  /// Collision search gives up beyond this many cell widths.
  double search_cap = 10.0;

  [[nodiscard]] double max_radius() const {
    double m = 0.0;
    for (const auto& o : obstacles) m = std::max(m, o.r);
    return m;
  }
};

struct DisjointnessReport {
  bool ok = true;
  std::string message;
  /// Smallest boundary-to-boundary distance between distinct translates.
  double min_gap = std::numeric_limits<double>::infinity();
};

/// Checks radius > 0, centers in the fundamental cell, and that the closures of
/// all translates are pairwise disjoint (offsets in {-1,0,1}^2 suffice for r < 1/2).
inline DisjointnessReport check_disjoint(const BilliardTable& table) {
  DisjointnessReport rep;
  const auto& obs = table.obstacles;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    if (!(o.r > 0.0)) {
      rep.ok = false;
      rep.message = "obstacle " + std::to_string(i) + " has non-positive radius";
      return rep;
    }
    if (o.cx < 0.0 || o.cx >= 1.0 || o.cy < 0.0 || o.cy >= 1.0) {
      rep.ok = false;
      rep.message = "obstacle " + std::to_string(i) + " center outside [0,1)^2";
      return rep;
    }
  }
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = i; j < obs.size(); ++j) {
      for (int l = -1; l <= 1; ++l) {
        for (int k = -1; k <= 1; ++k) {
          if (i == j && l == 0 && k == 0) continue;
          const double dx = obs[j].cx + l - obs[i].cx;
          const double dy = obs[j].cy + k - obs[i].cy;
          const double gap = std::hypot(dx, dy) - obs[i].r - obs[j].r;
          rep.min_gap = std::min(rep.min_gap, gap);
          if (!(gap > 0.0) && rep.ok) {
            rep.ok = false;
            rep.message = "obstacles " + std::to_string(i) + " and " + std::to_string(j) + " (offset " +
                          std::to_string(l) + "," + std::to_string(k) + ") overlap or touch";
          }
        }
      }
    }
  }
  return rep;
}

/// Two discs blocking every corridor direction; the standard finite-horizon test table.
inline BilliardTable two_disc_table() {
  BilliardTable t;
  t.obstacles = {{0.0, 0.0, 0.4}, {0.5, 0.5, 0.2}};
  return t;
}

}  // namespace zext::geometry
