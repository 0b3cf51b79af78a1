// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zext {

/// Largest slow-variable dimension supported without heap allocation.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

//---------------------------------------------------------------------------//
// Error types. Every recoverable failure in the library derives from Error.
//---------------------------------------------------------------------------//
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoCollisionWithinBound : Error {
  using Error::Error;
};
struct StepTooLarge : Error {
  using Error::Error;
};
struct GridMismatch : Error {
  using Error::Error;
};
struct NonSymmetricVariance : Error {
  using Error::Error;
};
struct TooFewSamples : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Metadata carried along with every sampled path.
struct PathMeta {
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::string model;
};

/// A time-gridded trajectory in R^d. times strictly increasing, one value per time.
struct PathSample {
  std::vector<double> times;
  std::vector<Vec> values;
  PathMeta meta;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
};

/// Uniform grid 0, dt, ..., n*dt with n = round(horizon / dt).
inline std::vector<double> uniform_grid(double horizon, std::size_t n_steps) {
  std::vector<double> g(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    g[k] = horizon * static_cast<double>(k) / static_cast<double>(n_steps);
  }
  return g;
}

inline void check_increasing(const std::vector<double>& grid) {
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw GridMismatch("grid is not strictly increasing");
  }
}

inline Vec zero_vec(int d) { return Vec::Zero(d); }

}  // namespace zext
