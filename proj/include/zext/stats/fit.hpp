// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace zext::stats {

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_half_width = 0.0;  ///< two-sided t interval at `level`
  double level = 0.95;
  std::vector<double> eps;
  std::vector<double> errors;

  [[nodiscard]] bool contains(double target, double tol) const { return std::abs(slope - target) <= tol; }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"slope", slope}, {"intercept", intercept}, {"slope_stderr", slope_stderr},
            {"ci_half_width", ci_half_width}, {"level", level}, {"eps", eps}, {"errors", errors}};
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error("median: empty sample");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Least-squares slope of log(error) against log(eps).
inline ExponentFit exponent_fit(const std::vector<double>& eps, const std::vector<double>& errors,
                                double level = 0.95) {
  if (eps.size() != errors.size()) throw GridMismatch("exponent_fit: eps and errors differ in length");
  if (eps.size() < 3) throw ConfigError("exponent_fit: need at least 3 eps values");
  const auto n = static_cast<double>(eps.size());
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!(eps[k] > 0.0) || !(errors[k] > 0.0)) throw ConfigError("exponent_fit: eps and errors must be positive");
    lx.push_back(std::log(eps[k]));
    ly.push_back(std::log(errors[k]));
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("exponent_fit: eps values must be distinct");
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - f.intercept - f.slope * lx[k];
    rss += r * r;
  }
  f.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  boost::math::students_t t(n - 2.0);
  f.ci_half_width = boost::math::quantile(t, 0.5 + level / 2.0) * f.slope_stderr;
  f.level = level;
  f.eps = eps;
  f.errors = errors;
  return f;
}

/// Fit on the median of each per-eps sample of sup errors.
inline ExponentFit exponent_fit(const std::vector<double>& eps, const std::vector<std::vector<double>>& sup_errors,
                                double level = 0.95) {
  std::vector<double> med;
  for (const auto& s : sup_errors) med.push_back(median(s));
  return exponent_fit(eps, med, level);
}

}  // namespace zext::stats
