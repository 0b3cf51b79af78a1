// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/dynsys/base.hpp"
#include "zext/dynsys/suspension.hpp"
#include "zext/geometry/billiard.hpp"
#include "zext/geometry/horizon.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace zext::dynsys {

/// Base point of the Sinai billiard (the Z-quotient of the collision map):
/// a boundary point of the fundamental cell with its next flight cached.
struct BilliardBasePoint {
  geometry::BoundaryPoint<double> at;
  geometry::BoundaryPoint<double> next;  ///< reduced to cell 0
  double tau = 0.0;
  int phi = 0;
};

/// The billiard collision map seen as a Z-extension over the Sinai billiard:
/// phi is the cell label increment of each flight, roof the flight time.
class BilliardBase {
 public:
  using point_type = BilliardBasePoint;

  explicit BilliardBase(geometry::BilliardTable table) : table_(std::move(table)) {
    auto dj = geometry::check_disjoint(table_);
    if (!dj.ok) throw ConfigError("billiard table: " + dj.message);
    roof_inf_ = dj.min_gap;
    if (!table_.horizon_bound) {
      auto cert = geometry::validate_finite_horizon(table_, 20000, table_.search_cap);
      if (!cert.ok) throw ConfigError("billiard table: " + cert.message);
      table_.horizon_bound = cert.bound;
    }
  }

  [[nodiscard]] const geometry::BilliardTable& table() const { return table_; }

  [[nodiscard]] BilliardBasePoint make(geometry::BoundaryPoint<double> b) const {
    b.cell = 0;
    auto [next, tau] = geometry::collision_map(b, table_);
    BilliardBasePoint w;
    w.at = b;
    w.phi = static_cast<int>(next.cell);
    next.cell = 0;
    w.next = next;
    w.tau = tau;
    return w;
  }

  [[nodiscard]] BilliardBasePoint step(const BilliardBasePoint& w) const { return make(w.next); }
  [[nodiscard]] int phi(const BilliardBasePoint& w) const { return w.phi; }
  [[nodiscard]] double roof(const BilliardBasePoint& w) const { return w.tau; }
  [[nodiscard]] double coordinate(const BilliardBasePoint& w) const {
    double u = w.at.angle / (2.0 * std::numbers::pi);
    u -= std::floor(u);
    return u;
  }
  [[nodiscard]] BilliardBasePoint sample(Stream& rng) const { return make(geometry::sample_boundary(table_, rng)); }
  [[nodiscard]] double roof_inf() const { return roof_inf_; }
  [[nodiscard]] double roof_sup() const { return *table_.horizon_bound; }
  [[nodiscard]] std::string name() const { return "billiard"; }

  /// Mean free path pi |Q| / |dQ| of the fundamental domain (the mean roof
  /// under the collision-invariant measure).
  [[nodiscard]] double mean_free_path() const {
    double area = 1.0;
    double perimeter = 0.0;
    for (const auto& o : table_.obstacles) {
      area -= std::numbers::pi * o.r * o.r;
      perimeter += 2.0 * std::numbers::pi * o.r;
    }
    return std::numbers::pi * area / perimeter;
  }

  /// Cylinder state of a suspension point.
  [[nodiscard]] geometry::PhasePoint<double> project(const SuspensionPoint<BilliardBasePoint>& p) const {
    auto b = p.base.at;
    b.cell = p.cell;
    return geometry::free_flight(geometry::to_phase_point(b, table_), p.height);
  }

  /// Suspension coordinates of a cylinder state: last impact and time since.
  [[nodiscard]] SuspensionPoint<BilliardBasePoint> lift(const geometry::PhasePoint<double>& p) const {
    auto back = geometry::next_collision(p.flipped(), table_);
    geometry::BoundaryPoint<double> b = back.boundary;
    b.vx = p.vx;
    b.vy = p.vy;
    const long cell = b.cell;
    return {make(b), cell, back.time};
  }

 private:
  geometry::BilliardTable table_;
  double roof_inf_ = 0.0;
};

}  // namespace zext::dynsys
