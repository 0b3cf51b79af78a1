// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"
#include "zext/dynsys/base.hpp"

#include <cmath>
#include <vector>

namespace zext::dynsys {

/// State (w, m, s) of the suspension flow over the Z-extension: base point,
/// integer cell, and height 0 <= s < roof(w).
template <class Point>
struct SuspensionPoint {
  Point base{};
  long cell = 0;
  double height = 0.0;
};

/// t_m = sum_{k<m} roof(T^k w), accumulated left to right.
template <ZExtensionBase B>
double roof_sum(const B& base, typename B::point_type w, long m) {
  double acc = 0.0;
  for (long k = 0; k < m; ++k) {
    acc += base.roof(w);
    w = base.step(w);
  }
  return acc;
}

/// n_t(w) = sup{n : t_n(w) <= t}. Uses the same accumulation order as
/// roof_sum, so t_{n_t} <= t < t_{n_t + 1} holds exactly in floating point.
template <ZExtensionBase B>
long n_t(const B& base, typename B::point_type w, double t) {
  if (t < 0.0) throw Error("n_t: negative time");
  long n = 0;
  double acc = 0.0;
  for (;;) {
    const double next = acc + base.roof(w);
    if (next > t) return n;
    acc = next;
    ++n;
    w = base.step(w);
  }
}

/// phi_t(w, m, s) = (T^n w, m + S_n phi(w), t + s - t_n) with n = n_{t+s}(w).
template <ZExtensionBase B>
SuspensionPoint<typename B::point_type> suspension_flow(const B& base,
                                                        const SuspensionPoint<typename B::point_type>& p,
                                                        double t) {
  if (t < 0.0) throw Error("suspension_flow: negative time");
  const double total = p.height + t;
  auto w = p.base;
  long cell = p.cell;
  double acc = 0.0;
  for (;;) {
    const double next = acc + base.roof(w);
    if (next > total) break;
    acc = next;
    cell += base.phi(w);
    w = base.step(w);
  }
  return {w, cell, total - acc};
}

/// One fiber segment of an orbit, in fast time.
template <class Point>
struct Segment {
  double t0 = 0.0;  ///< fast time at segment start
  double t1 = 0.0;  ///< fast time of the next roof crossing
  double s0 = 0.0;  ///< height at t0
  long cell = 0;
  FiberContext ctx;
  Point base{};
};

/// Walks the orbit of a suspension point fiber by fiber.
template <ZExtensionBase B>
class OrbitCursor {
 public:
  using point_type = typename B::point_type;

  OrbitCursor(const B& base, const SuspensionPoint<point_type>& start) : base_(&base) {
    seg_.base = start.base;
    seg_.cell = start.cell;
    seg_.s0 = start.height;
    seg_.t0 = 0.0;
    seg_.ctx = fiber_context(base, start.base);
    seg_.t1 = seg_.ctx.tau - start.height;
  }

  [[nodiscard]] const Segment<point_type>& segment() const { return seg_; }
  [[nodiscard]] long crossings() const { return crossings_; }

  void advance() {
    seg_.cell += seg_.ctx.phi;
    seg_.base = base_->step(seg_.base);
    seg_.ctx = fiber_context(*base_, seg_.base);
    seg_.t0 = seg_.t1;
    seg_.s0 = 0.0;
    seg_.t1 = seg_.t0 + seg_.ctx.tau;
    ++crossings_;
  }

  /// Advances until the current segment contains fast time t (t0 <= t < t1).
  void seek(double t) {
    while (seg_.t1 <= t) advance();
  }

 private:
  const B* base_;
  Segment<point_type> seg_;
  long crossings_ = 0;
};

/// Normalized displacement eps^{1/2} S_{n_{t/eps}} phi on a slow-time grid.
template <ZExtensionBase B>
PathSample displacement_path(const B& base, const SuspensionPoint<typename B::point_type>& start,
                             const std::vector<double>& grid, double eps) {
  if (!(eps > 0.0)) throw Error("displacement_path: eps must be positive");
  check_increasing(grid);
  PathSample out;
  out.meta.eps = eps;
  out.meta.model = base.name();
  OrbitCursor<B> cur(base, start);
  const double scale = std::sqrt(eps);
  for (double t : grid) {
    cur.seek(t / eps);
    Vec v(1);
    v[0] = scale * static_cast<double>(cur.segment().cell - start.cell);
    out.times.push_back(t);
    out.values.push_back(v);
  }
  return out;
}

/// Samples a start point: base from the invariant probability measure, cell 0,
/// height uniform on the fiber. This law is absolutely continuous w.r.t. the
/// infinite invariant measure of the flow.
template <ZExtensionBase B>
SuspensionPoint<typename B::point_type> sample_start(const B& base, Stream& rng) {
  SuspensionPoint<typename B::point_type> p;
  p.base = base.sample(rng);
  p.cell = 0;
  p.height = rng.uniform() * base.roof(p.base);
  return p;
}

}  // namespace zext::dynsys
