// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/rng.hpp"
#include "zext/geometry/billiard.hpp"

#include <numbers>
#include <optional>
#include <string>

namespace zext::geometry {

/// Outcome of finite-horizon validation. Failure is a value, not an exception.
struct HorizonCertificate {
  bool ok = false;
  double max_flight = 0.0;
  /// max_flight inflated by kHorizonMargin; what gets stored in the table.
  double bound = 0.0;
  std::optional<PhasePoint<double>> witness;
  std::string message;
};

/// Relative slack added to the sampled free-flight maximum.
inline constexpr double kHorizonMargin = 0.05;

inline bool inside_any(const BilliardTable& table, double x, double y) {
  for (const auto& o : table.obstacles) {
    for (int l = -1; l <= 1; ++l) {
      for (int k = -1; k <= 1; ++k) {
        const double dx = x - (o.cx + l);
        const double dy = y - (o.cy + k);
        if (dx * dx + dy * dy <= o.r * o.r) return true;
      }
    }
  }
  return false;
}

/// Uniform boundary point with outgoing direction drawn from the cosine law,
/// i.e. a sample of the collision-invariant measure (arclength x cos(angle)).
inline BoundaryPoint<double> sample_boundary(const BilliardTable& table, Stream& rng) {
  double perimeter = 0.0;
  for (const auto& o : table.obstacles) perimeter += o.r;
  double pick = rng.uniform() * perimeter;
  std::size_t i = 0;
  for (; i + 1 < table.obstacles.size(); ++i) {
    if (pick < table.obstacles[i].r) break;
    pick -= table.obstacles[i].r;
  }
  BoundaryPoint<double> b;
  b.obstacle = static_cast<int>(i);
  b.cell = 0;
  b.angle = 2.0 * std::numbers::pi * rng.uniform();
  // sin(psi) uniform on (-1, 1) gives density cos(psi)/2 on (-pi/2, pi/2).
  const double psi = std::asin(2.0 * rng.uniform() - 1.0);
  const double dir = b.angle + psi;
  b.vx = std::cos(dir);
  b.vy = std::sin(dir);
  return b;
}

/// Sample-based finite-horizon check with a deterministic angular sweep.
///
/// Casts n_samples random rays from interior points and from boundary points,
/// then sweeps a fixed grid of positions and 64 directions (the axis and
/// diagonal directions included). Any ray flying farther than `cap` fails.
inline HorizonCertificate validate_finite_horizon(const BilliardTable& table, std::size_t n_samples, double cap,
                                                  std::uint64_t seed = 1) {
  HorizonCertificate cert;
  if (table.obstacles.empty()) {
    cert.message = "empty obstacle list: every ray is an infinite free flight";
    return cert;
  }
  if (auto dj = check_disjoint(table); !dj.ok) {
    cert.message = "table not disjoint: " + dj.message;
    return cert;
  }
  BilliardTable probe = table;
  probe.search_cap = cap;
  double max_flight = 0.0;

  auto cast = [&](const PhasePoint<double>& p) -> bool {
    try {
      auto ev = next_collision(p, probe);
      if (ev.time > cap) throw NoCollisionWithinBound("flight exceeds cap");
      max_flight = std::max(max_flight, ev.time);
      return true;
    } catch (const NoCollisionWithinBound&) {
      cert.witness = p;
      cert.message = "free flight longer than " + std::to_string(cap) + " from (" + std::to_string(p.qx()) + ", " +
                     std::to_string(p.qy) + ") along (" + std::to_string(p.vx) + ", " + std::to_string(p.vy) + ")";
      return false;
    }
  };

  constexpr int kDirections = 64;
  constexpr int kGrid = 12;
  for (int ix = 0; ix < kGrid; ++ix) {
    for (int iy = 0; iy < kGrid; ++iy) {
      const double x = (ix + 0.5) / kGrid;
      const double y = (iy + 0.5) / kGrid;
      if (inside_any(table, x, y)) continue;
      for (int a = 0; a < kDirections; ++a) {
        const double th = 2.0 * std::numbers::pi * a / kDirections;
        if (!cast(PhasePoint<double>::from_cylinder(x, y, std::cos(th), std::sin(th)))) return cert;
      }
    }
  }

  Stream rng(seed);
  for (std::size_t n = 0; n < n_samples; ++n) {
    double x;
    double y;
    do {
      x = rng.uniform();
      y = rng.uniform();
    } while (inside_any(table, x, y));
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    if (!cast(PhasePoint<double>::from_cylinder(x, y, std::cos(th), std::sin(th)))) return cert;
    if (!cast(to_phase_point(sample_boundary(table, rng), table))) return cert;
  }
  cert.ok = true;
  cert.max_flight = max_flight;
  cert.bound = max_flight * (1.0 + kHorizonMargin);
  cert.message = "finite horizon (sampled)";
  return cert;
}

}  // namespace zext::geometry
