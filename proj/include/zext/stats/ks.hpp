// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace zext::stats {

inline constexpr std::size_t kMinKsSamples = 50;

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;  ///< asymptotic critical value at level alpha
  double alpha = 0.05;
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  [[nodiscard]] bool reject() const { return statistic > critical; }
};

/// c(alpha) sqrt((n + m) / (n m)) with c(alpha) = sqrt(-ln(alpha / 2) / 2).
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("ks_critical: alpha must lie in (0, 1)");
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const auto dn = static_cast<double>(n);
  const auto dm = static_cast<double>(m);
  return c * std::sqrt((dn + dm) / (dn * dm));
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha = 0.05) {
  if (a.size() < kMinKsSamples || b.size() < kMinKsSamples) {
    throw TooFewSamples("ks_two_sample: need at least " + std::to_string(kMinKsSamples) + " samples per side, got " +
                        std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.statistic = d;
  r.alpha = alpha;
  r.n_a = a.size();
  r.n_b = b.size();
  r.critical = ks_critical(alpha, a.size(), b.size());
  return r;
}

}  // namespace zext::stats
