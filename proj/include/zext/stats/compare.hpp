// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"
#include "zext/stats/ks.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace zext::stats {

/// Samples of a vector-valued process at common times: samples[i][k] is
/// sample i at times[k].
struct Ensemble {
  std::vector<double> times;
  std::vector<std::vector<Vec>> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] int dim() const { return samples.empty() || samples[0].empty() ? 0 : static_cast<int>(samples[0][0].size()); }

  void validate() const {
    for (const auto& s : samples) {
      if (s.size() != times.size()) throw GridMismatch("ensemble: sample length differs from its time grid");
      for (const auto& v : s) {
        if (v.size() != s.front().size()) throw GridMismatch("ensemble: inconsistent dimension");
      }
    }
  }

  /// Component i at time index k across samples.
  [[nodiscard]] std::vector<double> marginal(std::size_t k, int i) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s[k][i]);
    return out;
  }
};

struct ComparisonMeta {
  std::string pipeline;
  double eps = 0.0;
  std::uint64_t seed = 0;
};

struct ComparisonReport {
  double time = 0.0;
  std::vector<double> ks;
  std::vector<double> critical;  ///< asymptotic two-sample critical value at alpha
  std::size_t n_dynamics = 0;
  std::size_t n_limit = 0;
  double threshold = 0.1;
  double alpha = 0.05;
  bool pass = false;
  ComparisonMeta meta;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"time", time},
            {"ks", ks},
            {"critical", critical},
            {"n_dynamics", n_dynamics},
            {"n_limit", n_limit},
            {"threshold", threshold},
            {"threshold_kind", "engineering choice; no convergence rate is available"},
            {"alpha", alpha},
            {"pass", pass},
            {"pipeline", meta.pipeline},
            {"eps", meta.eps},
            {"seed", meta.seed}};
  }
};

/// Per-time, per-component KS between two ensembles on a common grid. A report
/// passes when every component's statistic is at most `threshold`.
inline std::vector<ComparisonReport> compare_to_limit(const Ensemble& dynamics, const Ensemble& limit,
                                                      const std::vector<std::size_t>& at, double threshold,
                                                      const ComparisonMeta& meta, double alpha = 0.05) {
  dynamics.validate();
  limit.validate();
  if (dynamics.times.size() != limit.times.size()) throw GridMismatch("compare_to_limit: grids differ in length");
  for (std::size_t k = 0; k < dynamics.times.size(); ++k) {
    if (std::abs(dynamics.times[k] - limit.times[k]) > 1e-12 * std::max(1.0, std::abs(limit.times[k]))) {
      throw GridMismatch("compare_to_limit: grids differ at index " + std::to_string(k));
    }
  }
  if (dynamics.dim() != limit.dim()) throw GridMismatch("compare_to_limit: dimensions differ");
  std::vector<ComparisonReport> out;
  for (std::size_t k : at) {
    if (k >= dynamics.times.size()) throw GridMismatch("compare_to_limit: time index outside grid");
    ComparisonReport r;
    r.time = dynamics.times[k];
    r.n_dynamics = dynamics.size();
    r.n_limit = limit.size();
    r.threshold = threshold;
    r.alpha = alpha;
    r.meta = meta;
    r.pass = true;
    for (int i = 0; i < dynamics.dim(); ++i) {
      const auto res = ks_two_sample(dynamics.marginal(k, i), limit.marginal(k, i), alpha);
      r.ks.push_back(res.statistic);
      r.critical.push_back(res.critical);
      r.pass = r.pass && res.statistic <= threshold;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace zext::stats
