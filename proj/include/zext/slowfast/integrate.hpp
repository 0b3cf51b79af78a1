// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/quadrature.hpp"
#include "zext/core/types.hpp"
#include "zext/dynsys/suspension.hpp"
#include "zext/slowfast/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace zext::slowfast {

using dynsys::OrbitCursor;
using dynsys::Segment;
using dynsys::SuspensionPoint;
using dynsys::ZExtensionBase;

/// Classical fourth-order Runge-Kutta step for x' = f(t, x).
template <class State, class F>
State rk4_step(F&& f, double t, const State& x, double h) {
  const State k1 = f(t, x);
  const State k2 = f(t + 0.5 * h, State(x + (0.5 * h) * k1));
  const State k3 = f(t + 0.5 * h, State(x + (0.5 * h) * k2));
  const State k4 = f(t + h, State(x + h * k3));
  return State(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Fiber height at slow time u on a segment walked with time scale eps.
template <class P>
double height_at(const Segment<P>& seg, double u, double eps) {
  return seg.s0 + (u / eps - seg.t0);
}

/// Walks the fast orbit of `start` in slow time t = eps * (fast time), from 0
/// through every grid time. step(segment, t, h) is called for substeps of
/// length <= dt that never straddle a roof crossing (at slow time eps * t1)
/// nor a grid time; record(k, t, cursor) is called at grid time k.
template <ZExtensionBase B, class StepFn, class RecordFn>
void walk_orbit(const B& base, const SuspensionPoint<typename B::point_type>& start, double eps,
                const std::vector<double>& grid, double dt, StepFn&& step, RecordFn&& record) {
  check_increasing(grid);
  if (!grid.empty() && grid.front() < 0.0) throw GridMismatch("grid starts before time 0");
  if (!(dt > 0.0)) throw StepTooLarge("step size must be positive");
  OrbitCursor<B> cur(base, start);
  double t = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double g = grid[k];
    while (t < g) {
      const double tc = eps * cur.segment().t1;
      const double tn = std::min({t + dt, g, tc});
      if (tn > t) {
        step(cur.segment(), t, tn - t);
        t = tn;
      }
      if (t >= tc) cur.advance();
    }
    record(k, t, cur);
  }
}

inline void check_step(double dt, double eps, double roof_inf) {
  if (!(eps > 0.0)) throw Error("eps must be positive");
  if (!(dt > 0.0) || dt > 0.25 * eps * roof_inf * (1.0 + 1e-12)) {
    throw StepTooLarge("dt must satisfy 0 < dt <= eps * inf(tau) / 4");
  }
}

/// Uniform output grid on [0, S] whose spacing does not exceed dt.
inline std::vector<double> grid_for(double S, double dt) {
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(S / dt - 1e-9)));
  return uniform_grid(S, n);
}

/// X^eps on `grid`: dX/dt = f(X, phi_{t/eps}(start)) + fbar(X), X_0 = x0.
template <ZExtensionBase B>
PathSample integrate_perturbed(const PerturbationSpec& spec, const B& base, const Vec& x0,
                               const SuspensionPoint<typename B::point_type>& start, double eps,
                               const std::vector<double>& grid, double dt) {
  check_step(dt, eps, base.roof_inf());
  PathSample out;
  out.meta.eps = eps;
  out.meta.model = base.name();
  out.times = grid;
  out.values.resize(grid.size());
  Vec x = x0;
  walk_orbit(
      base, start, eps, grid, dt,
      [&](const auto& seg, double t, double h) {
        const FiberField field(spec, seg.cell, seg.ctx);
        auto rhs = [&](double u, const Vec& y) -> Vec { return field(y, height_at(seg, u, eps)) + spec.fbar(y); };
        x = rk4_step<Vec>(rhs, t, x, h);
      },
      [&](std::size_t k, double, const auto&) { out.values[k] = x; });
  return out;
}

template <ZExtensionBase B>
PathSample integrate_perturbed(const PerturbationSpec& spec, const B& base, const Vec& x0,
                               const SuspensionPoint<typename B::point_type>& start, double eps, double S,
                               double dt) {
  return integrate_perturbed(spec, base, x0, start, eps, grid_for(S, dt), dt);
}

/// W on `grid`: dW/dt = fbar(W), W_0 = x0, by RK4 with steps <= dt.
inline PathSample integrate_averaged(const PerturbationSpec& spec, const Vec& x0, const std::vector<double>& grid,
                                     double dt) {
  check_increasing(grid);
  if (!(dt > 0.0)) throw StepTooLarge("step size must be positive");
  PathSample out;
  out.meta.model = "averaged";
  out.times = grid;
  out.values.reserve(grid.size());
  auto rhs = [&](double, const Vec& y) -> Vec { return spec.fbar(y); };
  Vec w = x0;
  double t = 0.0;
  for (double g : grid) {
    while (t < g) {
      const double h = std::min(dt, g - t);
      w = rk4_step<Vec>(rhs, t, w, h);
      t = (g - t <= dt) ? g : t + h;
    }
    out.values.push_back(w);
  }
  return out;
}

inline PathSample integrate_averaged(const PerturbationSpec& spec, const Vec& x0, double S, double dt) {
  return integrate_averaged(spec, x0, grid_for(S, dt), dt);
}

/// eps^{-gamma} (X - W) on the common grid.
inline PathSample error_path(const PathSample& X, const PathSample& W, double gamma, double eps) {
  if (X.size() != W.size()) throw GridMismatch("error_path: grids differ in length");
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (std::abs(X.times[k] - W.times[k]) > 1e-12 * std::max(1.0, std::abs(X.times[k]))) {
      throw GridMismatch("error_path: grids differ at index " + std::to_string(k));
    }
  }
  const double scale = std::pow(eps, -gamma);
  PathSample out;
  out.times = X.times;
  out.meta = X.meta;
  out.values.reserve(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) out.values.push_back(scale * (X.values[k] - W.values[k]));
  return out;
}

inline double sup_norm(const PathSample& p) {
  double m = 0.0;
  for (const auto& v : p.values) m = std::max(m, v.norm());
  return m;
}

/// Raw error E^eps = X - W at the grid times together with sup |E| over every
/// internal step on [0, grid.back()]. X and W share the same substeps.
struct ErrorTrace {
  std::vector<Vec> error;  ///< X - W at each grid time
  double sup = 0.0;
};

template <ZExtensionBase B>
ErrorTrace error_trace(const PerturbationSpec& spec, const B& base, const Vec& x0,
                       const SuspensionPoint<typename B::point_type>& start, double eps,
                       const std::vector<double>& grid, double dt) {
  check_step(dt, eps, base.roof_inf());
  ErrorTrace out;
  out.error.resize(grid.size());
  Vec x = x0;
  Vec w = x0;
  auto rhs_w = [&](double, const Vec& y) -> Vec { return spec.fbar(y); };
  walk_orbit(
      base, start, eps, grid, dt,
      [&](const auto& seg, double t, double h) {
        const FiberField field(spec, seg.cell, seg.ctx);
        auto rhs = [&](double u, const Vec& y) -> Vec { return field(y, height_at(seg, u, eps)) + spec.fbar(y); };
        x = rk4_step<Vec>(rhs, t, x, h);
        w = rk4_step<Vec>(rhs_w, t, w, h);
        out.sup = std::max(out.sup, (x - w).norm());
      },
      [&](std::size_t k, double, const auto&) { out.error[k] = x - w; });
  return out;
}

//---------------------------------------------------------------------------//
// Birkhoff integrals
//---------------------------------------------------------------------------//

enum class Normalization {
  None,        ///< raw integral
  InvSqrt,     ///< T^{-1/2}
  InvQuarter,  ///< T^{-1/4}
};

inline double normalization_factor(Normalization n, double T) {
  switch (n) {
    case Normalization::None: return 1.0;
    case Normalization::InvSqrt: return 1.0 / std::sqrt(T);
    case Normalization::InvQuarter: return 1.0 / std::sqrt(std::sqrt(T));
  }
  return 1.0;
}

/// int_0^T g(phi_s(start)) ds at each T in `horizons`, normalized per T, by
/// Gauss-Legendre on each fiber piece. g(segment, height) -> double. Pieces
/// are at most `piece` long in fast time.
template <ZExtensionBase B, class G>
PathSample birkhoff_path(G&& g, const B& base, const SuspensionPoint<typename B::point_type>& start,
                         const std::vector<double>& horizons, Normalization norm,
                         double piece = std::numeric_limits<double>::infinity()) {
  PathSample out;
  out.meta.model = base.name();
  out.times = horizons;
  out.values.resize(horizons.size());
  double acc = 0.0;
  walk_orbit(
      base, start, 1.0, horizons, piece,
      [&](const auto& seg, double t, double h) {
        const double s = height_at(seg, t, 1.0);
        acc += GaussLegendre8::integrate([&](double u) { return static_cast<double>(g(seg, u)); }, s, s + h);
      },
      [&](std::size_t k, double T, const auto&) {
        Vec v(1);
        v[0] = T > 0.0 ? acc * normalization_factor(norm, T) : acc;
        out.values[k] = v;
      });
  return out;
}

template <ZExtensionBase B, class G>
double birkhoff_integral(G&& g, const B& base, const SuspensionPoint<typename B::point_type>& start, double T,
                         Normalization norm, double piece = std::numeric_limits<double>::infinity()) {
  if (!(T > 0.0)) throw Error("birkhoff_integral: T must be positive");
  return birkhoff_path(std::forward<G>(g), base, start, std::vector<double>{T}, norm, piece).values[0][0];
}

/// u^eps_t = eps^{1/4} int_0^{t/eps} f(x0 + eps s (1,...,1), phi_s) ds on `grid`.
/// Computed in slow time as eps^{-3/4} int_0^t f(x0 + u (1,...,1), phi_{u/eps}) du.
template <ZExtensionBase B>
PathSample perturbed_birkhoff(const PerturbationSpec& spec, const B& base, const Vec& x0,
                              const SuspensionPoint<typename B::point_type>& start, double eps,
                              const std::vector<double>& grid, double piece = std::numeric_limits<double>::infinity()) {
  if (!(eps > 0.0)) throw Error("perturbed_birkhoff: eps must be positive");
  PathSample out;
  out.meta.eps = eps;
  out.meta.model = base.name();
  out.times = grid;
  out.values.resize(grid.size());
  const double scale = std::pow(eps, -0.75);
  const Vec ones = Vec::Ones(spec.dim);
  Vec acc = Vec::Zero(spec.dim);
  walk_orbit(
      base, start, eps, grid, piece,
      [&](const auto& seg, double t, double h) {
        const FiberField field(spec, seg.cell, seg.ctx);
        acc += GaussLegendre8::integrate(
            [&](double u) -> Vec { return field(Vec(x0 + u * ones), height_at(seg, u, eps)); }, t, t + h);
      },
      [&](std::size_t k, double, const auto&) { out.values[k] = scale * acc; });
  return out;
}

//---------------------------------------------------------------------------//
// Comparison with the discrete-time ODEs
//---------------------------------------------------------------------------//

struct DiscreteComparison {
  PathSample xtilde;     ///< x~ at slow times eps * k
  PathSample wtilde;     ///< w~ at slow times eps * k
  double sup_gap = 0.0;  ///< sup_t |X_t - x~_{eps n_{t/eps}}| over the internal steps of X
};

/// Solves dx~/dt = F(x~, T^{floor(t/eps)} w) + tau(T^{floor(t/eps)} w) fbar(x~) and
/// dw~/dt = tau(T^{floor(t/eps)} w) fbar(w~) with one RK4 step per unit of
/// discrete time, then measures the gap to X^eps at its own step times.
template <ZExtensionBase B>
DiscreteComparison discrete_comparison(const PerturbationSpec& spec, const B& base, const Vec& x0,
                                       const SuspensionPoint<typename B::point_type>& start, double eps, double S,
                                       double dt) {
  check_step(dt, eps, base.roof_inf());
  DiscreteComparison out;
  out.xtilde.meta.eps = out.wtilde.meta.eps = eps;
  out.xtilde.meta.model = out.wtilde.meta.model = base.name();

  // Enough fibers to cover [0, S] in the time of X.
  const auto K = static_cast<std::size_t>(std::ceil(S / (eps * base.roof_inf()))) + 2;
  Vec xt = x0;
  Vec wt = x0;
  auto w = start.base;
  long cell = start.cell;
  for (std::size_t k = 0; k <= K; ++k) {
    out.xtilde.times.push_back(eps * static_cast<double>(k));
    out.wtilde.times.push_back(eps * static_cast<double>(k));
    out.xtilde.values.push_back(xt);
    out.wtilde.values.push_back(wt);
    const auto ctx = dynsys::fiber_context(base, w);
    auto rhs_x = [&](double, const Vec& y) -> Vec { return fiber_integral(spec, y, cell, ctx) + ctx.tau * spec.fbar(y); };
    auto rhs_w = [&](double, const Vec& y) -> Vec { return ctx.tau * spec.fbar(y); };
    xt = rk4_step<Vec>(rhs_x, 0.0, xt, eps);
    wt = rk4_step<Vec>(rhs_w, 0.0, wt, eps);
    cell += ctx.phi;
    w = base.step(w);
  }

  Vec x = x0;
  std::size_t crossings = 0;
  double seen_t0 = 0.0;
  walk_orbit(
      base, start, eps, std::vector<double>{S}, dt,
      [&](const auto& seg, double t, double h) {
        if (seg.t0 != seen_t0) {
          ++crossings;
          seen_t0 = seg.t0;
        }
        const FiberField field(spec, seg.cell, seg.ctx);
        auto rhs = [&](double u, const Vec& y) -> Vec { return field(y, height_at(seg, u, eps)) + spec.fbar(y); };
        x = rk4_step<Vec>(rhs, t, x, h);
        // A step that ends on a roof crossing is compared against the next fiber.
        const std::size_t n = crossings + (t + h >= eps * seg.t1 ? 1 : 0);
        out.sup_gap = std::max(out.sup_gap, (x - out.xtilde.values[std::min(n, K)]).norm());
      },
      [](std::size_t, double, const auto&) {});
  return out;
}

//---------------------------------------------------------------------------//
// Gronwall bound
//---------------------------------------------------------------------------//

struct GronwallReport {
  double lhs = 0.0;            ///< sup_[0,S] |X - x0|
  double drive_sup = 0.0;      ///< sup_[0,S] |int_0^t ftilde(x0, phi_{s/eps}) ds|
  double lipschitz_int = 0.0;  ///< int_0^S [ftilde](phi_{s/eps}) ds
  double rhs = 0.0;            ///< drive_sup * exp(lipschitz_int)
  bool holds = false;
};

/// Evaluates both sides of the Gronwall estimate along one orbit on the same
/// substeps. ftilde = f + fbar; its Lipschitz constant on a fiber is bounded by
/// the fiber sup of [f] plus [fbar]. `holds` allows only floating-point slack.
template <ZExtensionBase B>
GronwallReport gronwall_check(const PerturbationSpec& spec, const B& base, const Vec& x0,
                              const SuspensionPoint<typename B::point_type>& start, double eps, double S, double dt) {
  check_step(dt, eps, base.roof_inf());
  GronwallReport r;
  Vec x = x0;
  Vec drive = Vec::Zero(spec.dim);
  const double lip_bar = spec.lipschitz_fbar();
  walk_orbit(
      base, start, eps, std::vector<double>{S}, dt,
      [&](const auto& seg, double t, double h) {
        const FiberField field(spec, seg.cell, seg.ctx);
        auto rhs = [&](double u, const Vec& y) -> Vec { return field(y, height_at(seg, u, eps)) + spec.fbar(y); };
        x = rk4_step<Vec>(rhs, t, x, h);
        drive += GaussLegendre8::integrate([&](double u) -> Vec { return rhs(u, x0); }, t, t + h);
        r.lipschitz_int += (field.lipschitz() + lip_bar) * h;
        r.lhs = std::max(r.lhs, (x - x0).norm());
        r.drive_sup = std::max(r.drive_sup, drive.norm());
      },
      [](std::size_t, double, const auto&) {});
  r.rhs = r.drive_sup * std::exp(r.lipschitz_int);
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-9) + 1e-12;
  return r;
}

}  // namespace zext::slowfast
