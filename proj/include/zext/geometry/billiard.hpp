// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"
#include "zext/geometry/table.hpp"
#include "zext/geometry/vec2.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <type_traits>
#include <utility>
#include <vector>

namespace zext::geometry {

/// Normal-velocity threshold below which an impact is treated as tangency.
inline constexpr double kGrazingTol = 1e-12;

/// State of the billiard flow on the cylinder R x T.
///
/// The unbounded axis coordinate is stored as an integer cell plus an offset in
/// [0, 1), so the deck transformation p -> p + (k, 0) is exact and every
/// operation commutes with it bit for bit.
template <class Real = double>
struct PhasePoint {
  long cell = 0;
  Real x{0};
  Real qy{0};
  Real vx{1};
  Real vy{0};

  [[nodiscard]] Real qx() const { return Real(cell) + x; }
  [[nodiscard]] Vec2<Real> velocity() const { return {vx, vy}; }

  /// Builds a point from cylinder coordinates, reducing qy modulo 1.
  static PhasePoint from_cylinder(const Real& qx, const Real& qy, const Real& vx, const Real& vy) {
    PhasePoint p;
    p.x = qx;
    p.qy = qy;
    p.vx = vx;
    p.vy = vy;
    p.normalize();
    return p;
  }

  [[nodiscard]] PhasePoint shifted(long k) const {
    PhasePoint p = *this;
    p.cell += k;
    return p;
  }

  [[nodiscard]] PhasePoint flipped() const {
    PhasePoint p = *this;
    p.vx = -p.vx;
    p.vy = -p.vy;
    return p;
  }

  void normalize() {
    using std::floor;
    const Real fx = floor(x);
    if (fx != 0) {
      cell += static_cast<long>(fx);
      x -= fx;
    }
    const Real fy = floor(qy);
    if (fy != 0) qy -= fy;
  }
};

/// A point on an obstacle boundary, stored by angle so it never drifts off the circle.
/// `cell` is the Z-label of the obstacle translate; (vx, vy) is the outgoing velocity.
template <class Real = double>
struct BoundaryPoint {
  int obstacle = 0;
  long cell = 0;
  Real angle{0};
  Real vx{0};
  Real vy{0};

  [[nodiscard]] Vec2<Real> normal() const {
    using std::cos;
    using std::sin;
    return {cos(angle), sin(angle)};
  }
};

template <class Real = double>
struct CollisionEvent {
  Real time{0};
  PhasePoint<Real> point;  ///< post-reflection state
  BoundaryPoint<Real> boundary;
  int obstacle_id = 0;
  long cell = 0;
};

inline long cell_index(double qx) { return static_cast<long>(std::floor(qx)); }

template <class Real>
long cell_index(const PhasePoint<Real>& p) {
  return p.cell;
}

template <class Real>
PhasePoint<Real> to_phase_point(const BoundaryPoint<Real>& b, const BilliardTable& table) {
  using std::cos;
  using std::floor;
  using std::sin;
  const auto& o = table.obstacles.at(static_cast<std::size_t>(b.obstacle));
  const Real px = Real(o.cx) + Real(o.r) * cos(b.angle);
  const Real py = Real(o.cy) + Real(o.r) * sin(b.angle);
  PhasePoint<Real> p;
  const Real fx = floor(px);
  p.cell = b.cell + static_cast<long>(fx);
  p.x = px - fx;
  p.qy = py - floor(py);
  p.vx = b.vx;
  p.vy = b.vy;
  return p;
}

/// Straight-line motion for time t (no obstacle check).
template <class Real>
PhasePoint<Real> free_flight(const PhasePoint<Real>& p, const Real& t) {
  PhasePoint<Real> q = p;
  q.x += t * p.vx;
  q.qy += t * p.vy;
  q.normalize();
  return q;
}

namespace detail {

/// Hit time of the ray (x, y) + t (vx, vy) with the disc at (cx, cy) of radius
/// r, or a negative value when the ray misses, starts inside, moves away, or
/// only grazes the disc.
template <class Real>
Real ray_disc_time(const Real& x, const Real& y, const Real& vx, const Real& vy, const Real& cx, const Real& cy,
                   const Real& r, const Real& grazing) {
  using std::sqrt;
  const Real dx = x - cx;
  const Real dy = y - cy;
  const Real b = vx * dx + vy * dy;
  if (!(b < 0)) return Real(-1);
  const Real c0 = dx * dx + dy * dy - r * r;
  if (c0 < 0) return Real(-1);
  const Real disc = b * b - c0;
  if (!(disc > 0)) return Real(-1);
  const Real sq = sqrt(disc);
  if (sq < grazing * r) return Real(-1);
  return c0 / (sq - b);
}

/// Visits translates (l, k) in square rings of growing Chebyshev radius L.
/// Ring L lies at distance at least L - 1 - r_max from a point of the
/// fundamental cell, so the search stops once `best()` beats that bound.
template <class Visit, class Best>
void ring_search(const BilliardTable& table, Visit&& visit, Best&& best) {
  const double r_max = table.max_radius();
  for (long L = 0;; ++L) {
    if (L == 0) {
      visit(0, 0);
    } else {
      for (long l = -L; l <= L; ++l) {
        visit(l, -L);
        visit(l, L);
      }
      for (long k = -L + 1; k <= L - 1; ++k) {
        visit(-L, k);
        visit(L, k);
      }
    }
    const double next_ring_lower = static_cast<double>(L) - r_max;
    const double b = best();
    if (b >= 0.0 && b <= next_ring_lower) return;
    if (next_ring_lower > table.search_cap) {
      if (b >= 0.0 && b <= table.search_cap) return;
      throw NoCollisionWithinBound("no collision within search cap");
    }
  }
}

struct Hit {
  int obstacle = -1;
  long l = 0;
  long k = 0;
};

}  // namespace detail

/// Earliest collision of the ray from p with any obstacle translate.
///
/// For extended-precision Real the translate is located by a double-precision
/// pass first, and only candidates whose double hit time is within 1e-6 of the
/// best are re-solved in Real. Tangent hits are ignored.
template <class Real>
CollisionEvent<Real> next_collision(const PhasePoint<Real>& p, const BilliardTable& table) {
  using std::atan2;
  if (table.obstacles.empty()) throw NoCollisionWithinBound("table has no obstacles");
  const Real grazing(kGrazingTol);

  Real best_t(-1);
  detail::Hit hit;

  auto full_search = [&] {
    detail::ring_search(
        table,
        [&](long l, long k) {
          for (std::size_t i = 0; i < table.obstacles.size(); ++i) {
            const auto& o = table.obstacles[i];
            const Real t = detail::ray_disc_time(p.x, p.qy, p.vx, p.vy, Real(o.cx) + Real(l), Real(o.cy) + Real(k),
                                                 Real(o.r), grazing);
            if (t >= 0 && (best_t < 0 || t < best_t)) {
              best_t = t;
              hit = {static_cast<int>(i), l, k};
            }
          }
        },
        [&] { return static_cast<double>(best_t); });
  };

  if constexpr (std::is_same_v<Real, double>) {
    full_search();
  } else {
    const double x = static_cast<double>(p.x);
    const double y = static_cast<double>(p.qy);
    const double vx = static_cast<double>(p.vx);
    const double vy = static_cast<double>(p.vy);
    struct Candidate {
      double t;
      detail::Hit hit;
    };
    std::vector<Candidate> cands;
    double best_d = -1.0;
    detail::ring_search(
        table,
        [&](long l, long k) {
          for (std::size_t i = 0; i < table.obstacles.size(); ++i) {
            const auto& o = table.obstacles[i];
            // Permissive double screen: no grazing cut, small tolerance on the start test.
            const double dx = x - (o.cx + static_cast<double>(l));
            const double dy = y - (o.cy + static_cast<double>(k));
            const double b = vx * dx + vy * dy;
            if (!(b < 1e-9)) continue;
            const double c0 = std::max(0.0, dx * dx + dy * dy - o.r * o.r);
            const double disc = b * b - c0;
            if (!(disc > -1e-9)) continue;
            const double t = c0 / (std::sqrt(std::max(0.0, disc)) - b + 1e-300);
            cands.push_back({t, {static_cast<int>(i), l, k}});
            if (best_d < 0.0 || t < best_d) best_d = t;
          }
        },
        [&] { return best_d; });
    for (const auto& c : cands) {
      if (c.t > best_d + 1e-6) continue;
      const auto& o = table.obstacles[static_cast<std::size_t>(c.hit.obstacle)];
      const Real t = detail::ray_disc_time(p.x, p.qy, p.vx, p.vy, Real(o.cx) + Real(c.hit.l),
                                           Real(o.cy) + Real(c.hit.k), Real(o.r), grazing);
      if (t >= 0 && (best_t < 0 || t < best_t)) {
        best_t = t;
        hit = c.hit;
      }
    }
    if (best_t < 0) full_search();
  }

  const auto& o = table.obstacles[static_cast<std::size_t>(hit.obstacle)];
  const Real hx = p.x + best_t * p.vx - (Real(o.cx) + Real(hit.l));
  const Real hy = p.qy + best_t * p.vy - (Real(o.cy) + Real(hit.k));
  BoundaryPoint<Real> bp;
  bp.obstacle = hit.obstacle;
  bp.cell = p.cell + hit.l;
  bp.angle = atan2(hy, hx);
  const Vec2<Real> n = bp.normal();
  const Vec2<Real> v = reflect(p.velocity(), n);
  bp.vx = v.x;
  bp.vy = v.y;

  CollisionEvent<Real> ev;
  ev.time = best_t;
  ev.boundary = bp;
  ev.point = to_phase_point(bp, table);
  ev.obstacle_id = hit.obstacle;
  ev.cell = bp.cell;
  return ev;
}

/// One step of the collision map: next boundary point and the flight time tau.
template <class Real>
std::pair<BoundaryPoint<Real>, Real> collision_map(const BoundaryPoint<Real>& b, const BilliardTable& table) {
  auto ev = next_collision(to_phase_point(b, table), table);
  return {ev.boundary, ev.time};
}

/// Billiard flow: free flights and specular reflections totalling time t.
/// After the first impact the orbit is advanced through collision_map, so a
/// flow orbit and its collision-map orbit share every floating-point step.
template <class Real>
PhasePoint<Real> evolve(const PhasePoint<Real>& p, const Real& t, const BilliardTable& table) {
  if (t < 0) throw Error("evolve: negative time");
  if (t == 0) return p;
  auto ev = next_collision(p, table);
  if (ev.time > t) return free_flight(p, t);
  Real remaining = t - ev.time;
  BoundaryPoint<Real> b = ev.boundary;
  for (;;) {
    auto [next, tau] = collision_map(b, table);
    if (tau > remaining) return free_flight(to_phase_point(b, table), remaining);
    remaining -= tau;
    b = next;
  }
}

/// Collision times and post-collision states along the orbit of p up to time t.
template <class Real>
std::vector<CollisionEvent<Real>> collisions_until(const PhasePoint<Real>& p, const Real& t,
                                                   const BilliardTable& table) {
  std::vector<CollisionEvent<Real>> out;
  auto ev = next_collision(p, table);
  Real clock = ev.time;
  while (clock <= t) {
    ev.time = clock;
    out.push_back(ev);
    auto [next, tau] = collision_map(ev.boundary, table);
    clock += tau;
    ev.boundary = next;
    ev.point = to_phase_point(next, table);
    ev.obstacle_id = next.obstacle;
    ev.cell = next.cell;
  }
  return out;
}

}  // namespace zext::geometry
