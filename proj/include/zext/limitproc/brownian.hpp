// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/rng.hpp"
#include "zext/core/types.hpp"

#include <cmath>
#include <vector>

namespace zext::limitproc {

/// Brownian motion with variance Sigma per unit time on `grid`, started at 0
/// at time 0 (grid times must be >= 0 and increasing).
inline std::vector<double> simulate_bm(double Sigma, const std::vector<double>& grid, Stream& rng) {
  if (Sigma < 0.0) throw Error("simulate_bm: negative variance");
  check_increasing(grid);
  std::vector<double> b(grid.size());
  double prev_t = 0.0;
  double cur = 0.0;
  const double sd = std::sqrt(Sigma);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double dt = grid[k] - prev_t;
    if (dt < 0.0) throw GridMismatch("simulate_bm: grid starts before 0");
    if (dt > 0.0) cur += sd * std::sqrt(dt) * rng.normal();
    b[k] = cur;
    prev_t = grid[k];
  }
  return b;
}

inline std::vector<double> simulate_bm(double Sigma, const std::vector<double>& grid, std::uint64_t seed) {
  Stream rng(seed);
  return simulate_bm(Sigma, grid, rng);
}

/// Occupation-density estimate of the local time at 0,
/// L_t = (2 delta)^{-1} int_0^t 1{|B_s| <= delta} ds, by the left-point rule on
/// the grid. Nondecreasing; it grows only across steps that start in [-delta, delta].
inline std::vector<double> local_time_at_zero(const std::vector<double>& B, const std::vector<double>& grid,
                                              double delta) {
  if (!(delta > 0.0)) throw Error("local_time_at_zero: bandwidth must be positive");
  if (B.size() != grid.size()) throw GridMismatch("local_time_at_zero: path and grid differ in length");
  std::vector<double> L(B.size(), 0.0);
  const double w = 1.0 / (2.0 * delta);
  for (std::size_t k = 1; k < B.size(); ++k) {
    L[k] = L[k - 1] + (std::abs(B[k - 1]) <= delta ? w * (grid[k] - grid[k - 1]) : 0.0);
  }
  return L;
}

/// Default bandwidth 2 sqrt(dt) for a grid of spacing dt.
inline double default_bandwidth(double dt) { return 2.0 * std::sqrt(dt); }

/// A (B, L) pair on a common grid.
struct TimedPair {
  std::vector<double> grid;
  std::vector<double> B;
  std::vector<double> L;
};

/// (B~_t, L~_t) = (B'_{t / tau_bar}, tau_bar L'_{t / tau_bar}): the output grid
/// is tau_bar times the input grid, values are carried over, L is scaled.
inline TimedPair rescale_pair(const TimedPair& prime, double tau_bar) {
  if (!(tau_bar > 0.0)) throw Error("rescale_pair: tau_bar must be positive");
  if (prime.B.size() != prime.grid.size() || prime.L.size() != prime.grid.size()) {
    throw GridMismatch("rescale_pair: paths and grid differ in length");
  }
  TimedPair out;
  out.grid.reserve(prime.grid.size());
  out.L.reserve(prime.grid.size());
  for (double t : prime.grid) out.grid.push_back(t * tau_bar);
  out.B = prime.B;
  for (double l : prime.L) out.L.push_back(l * tau_bar);
  return out;
}

/// Standard Brownian motion observed at nondecreasing query times.
///
/// The path is pre-generated on a uniform grid of spacing h (extended on
/// demand); a query inside a grid cell is drawn from the Brownian bridge
/// between the last observed point and the right grid node, so every query
/// sequence has exactly the law of a Brownian motion.
class BrownianBridgeSampler {
 public:
  BrownianBridgeSampler(double h, std::uint64_t seed) : h_(h), rng_(seed) {
    if (!(h > 0.0)) throw Error("BrownianBridgeSampler: spacing must be positive");
    nodes_.push_back(0.0);
  }

  /// B(u) for u >= the previous query.
  double operator()(double u) {
    if (u < last_t_) throw Error("BrownianBridgeSampler: queries must be nondecreasing");
    if (u == last_t_) return last_b_;
    auto cell = static_cast<std::size_t>(std::floor(u / h_));
    while (nodes_.size() <= cell + 1) nodes_.push_back(nodes_.back() + std::sqrt(h_) * rng_.normal());
    const double t1 = static_cast<double>(cell + 1) * h_;
    const double t0 = static_cast<double>(cell) * h_;
    double a_t = t0;
    double a_b = nodes_[cell];
    if (last_t_ > t0) {
      a_t = last_t_;
      a_b = last_b_;
    }
    const double b1 = nodes_[cell + 1];
    double value;
    if (u >= t1) {
      value = b1;
    } else {
      const double span = t1 - a_t;
      const double mean = a_b + (u - a_t) / span * (b1 - a_b);
      const double var = (u - a_t) * (t1 - u) / span;
      value = mean + std::sqrt(std::max(0.0, var)) * rng_.normal();
    }
    last_t_ = u;
    last_b_ = value;
    return value;
  }

 private:
  double h_;
  Stream rng_;
  std::vector<double> nodes_;
  double last_t_ = 0.0;
  double last_b_ = 0.0;
};

}  // namespace zext::limitproc
