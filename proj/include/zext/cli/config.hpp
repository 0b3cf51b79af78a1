// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"
#include "zext/dynsys/billiard_base.hpp"
#include "zext/dynsys/toy_doubling.hpp"
#include "zext/geometry/horizon.hpp"
#include "zext/geometry/io.hpp"
#include "zext/limitproc/limit_law.hpp"
#include "zext/slowfast/perturbation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace zext::cli {

using limitproc::LimitKind;
using slowfast::PerturbationSpec;

struct ModelConfig {
  std::string kind = "toy";  ///< "toy" or "billiard"
  double alpha = 0.3;
  double roof_scale = 1.0;
  geometry::BilliardTable table = geometry::two_disc_table();
};

struct GridConfig {
  double horizon = 1.0;
  std::size_t points = 10;         ///< report times horizon * j / points, j = 1..points
  double dt_factor = 0.25;         ///< dt = dt_factor * eps * inf(tau)
  std::size_t limit_steps = 10000; ///< fine grid of the limit sampler; a multiple of points
};

struct EstimatorConfig {
  std::size_t tau_bar_samples = 100000;
  long sigma_n = 1000;
  std::size_t sigma_samples = 4000;
  std::size_t gk_samples = 4000;
  std::optional<long> gk_lags;   ///< default: 200 (toy), 100 (billiard)
  std::optional<long> gk_cells;  ///< default: 20 (toy), 10 (billiard)
  std::size_t h_samples = 20000;
  long h_cells = 100000;
};

struct CompareConfig {
  double threshold = 0.1;
  double alpha = 0.05;
  double exponent_tolerance = 0.1;
};

/// Built-in spec used when a config names none: dimension 1, amplitude
/// 1 + 0.5 sin x, a centered "step" profile or a "const" one as the pipeline
/// needs, and the drift fbar(x) = 0.5 - x where the pipeline has a drift.
inline PerturbationSpec default_spec(LimitKind k) {
  PerturbationSpec s;
  s.amplitude = {{1.0, 0.5}};
  const bool centered = k == LimitKind::Centered || k == LimitKind::Birkhoff;
  s.profile = {centered ? slowfast::Profile::Step : slowfast::Profile::Const};
  if (k == LimitKind::Centered || k == LimitKind::NonCentered) {
    s.drift = slowfast::DriftKind::Linear;
    s.drift_a = {-1.0};
    s.drift_b = {0.5};
  }
  if (k == LimitKind::Integrable) s.amplitude = {{1.0, 0.0}};
  s.centered = centered;
  return s;
}

struct ExperimentConfig {
  ModelConfig model;
  LimitKind pipeline = LimitKind::Centered;
  PerturbationSpec spec = default_spec(LimitKind::Centered);
  bool spec_given = false;  ///< false: spec follows default_spec(pipeline)
  Vec x0 = Vec::Constant(1, 0.3);
  std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5};
  std::size_t n = 500;
  std::optional<std::size_t> n_limit;  ///< default: n
  std::uint64_t seed = 1;
  GridConfig grid;
  EstimatorConfig estimators;
  CompareConfig compare;
  std::string out = "slowfast_out";
  unsigned jobs = 0;  ///< 0: machine parallelism, resolved by the driver

  [[nodiscard]] std::size_t limit_samples() const { return n_limit.value_or(n); }

  /// Report times: horizon * j / points for j = 1..points, taken from the
  /// fine limit grid so both sides use identical doubles.
  [[nodiscard]] std::vector<double> limit_grid() const { return uniform_grid(grid.horizon, grid.limit_steps); }
  [[nodiscard]] std::vector<std::size_t> report_indices() const {
    std::vector<std::size_t> idx;
    const std::size_t stride = grid.limit_steps / grid.points;
    for (std::size_t j = 1; j <= grid.points; ++j) idx.push_back(j * stride);
    return idx;
  }
  [[nodiscard]] std::vector<double> report_times() const {
    const auto g = limit_grid();
    std::vector<double> out;
    for (auto k : report_indices()) out.push_back(g[k]);
    return out;
  }
};

/// Locates keys in the raw config text, for messages of the form file:line: text.
class ConfigSource {
 public:
  ConfigSource() = default;
  ConfigSource(std::string text, std::string path) : text_(std::move(text)), path_(std::move(path)) {}

  [[nodiscard]] int line_of(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  [[nodiscard]] int line_at_byte(std::size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
  }

  [[nodiscard]] std::string where(const std::string& key) const {
    const int line = line_of(key);
    return (path_.empty() ? std::string("config") : path_) + (line > 0 ? ":" + std::to_string(line) : std::string()) +
           ": ";
  }

  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string text_;
  std::string path_;
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const ConfigSource& src) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(src.where(key) + "bad value for \"" + key + "\": " + e.what());
  }
}

}  // namespace detail

/// Parses a config object. Structural errors carry the line of the key.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const ConfigSource& src = {}) {
  using detail::get_or;
  if (!j.is_object()) throw ConfigError(src.where("") + "config must be a JSON object");
  ExperimentConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.is_string()) {
      c.model.kind = m.get<std::string>();
    } else {
      c.model.kind = get_or<std::string>(m, "kind", "toy", src);
      c.model.alpha = get_or(m, "alpha", c.model.alpha, src);
      c.model.roof_scale = get_or(m, "roof_scale", c.model.roof_scale, src);
      if (m.contains("table")) {
        try {
          c.model.table = geometry::table_from_json(m.at("table"));
        } catch (const std::exception& e) {
          throw ConfigError(src.where("table") + e.what());
        }
      }
    }
    if (c.model.kind != "toy" && c.model.kind != "billiard") {
      throw ConfigError(src.where("model") + "unknown model '" + c.model.kind + "'");
    }
  }
  if (j.contains("pipeline")) {
    try {
      c.pipeline = limitproc::limit_kind_from_string(j.at("pipeline").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(src.where("pipeline") + e.what());
    }
  }
  if (j.contains("spec")) {
    try {
      c.spec = slowfast::spec_from_json(j.at("spec"));
      c.spec_given = true;
    } catch (const std::exception& e) {
      throw ConfigError(src.where("spec") + e.what());
    }
  } else {
    c.spec = default_spec(c.pipeline);
  }
  c.x0 = Vec::Constant(c.spec.dim, 0.3);
  if (j.contains("x0")) {
    const auto v = get_or<std::vector<double>>(j, "x0", {}, src);
    if (static_cast<int>(v.size()) != c.spec.dim) throw ConfigError(src.where("x0") + "x0 must have length spec.dim");
    for (int i = 0; i < c.spec.dim; ++i) c.x0[i] = v[static_cast<std::size_t>(i)];
  }
  c.eps = get_or(j, "eps", c.eps, src);
  c.n = get_or(j, "n", c.n, src);
  if (j.contains("n_limit")) c.n_limit = get_or<std::size_t>(j, "n_limit", 0, src);
  c.seed = get_or(j, "seed", c.seed, src);
  c.out = get_or(j, "out", c.out, src);
  c.jobs = get_or(j, "jobs", c.jobs, src);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.grid.horizon = get_or(g, "horizon", c.grid.horizon, src);
    c.grid.points = get_or(g, "points", c.grid.points, src);
    c.grid.dt_factor = get_or(g, "dt_factor", c.grid.dt_factor, src);
    c.grid.limit_steps = get_or(g, "limit_steps", c.grid.limit_steps, src);
  }
  if (j.contains("estimators")) {
    const auto& e = j.at("estimators");
    auto& s = c.estimators;
    s.tau_bar_samples = get_or(e, "tau_bar_samples", s.tau_bar_samples, src);
    s.sigma_n = get_or(e, "sigma_n", s.sigma_n, src);
    s.sigma_samples = get_or(e, "sigma_samples", s.sigma_samples, src);
    s.gk_samples = get_or(e, "gk_samples", s.gk_samples, src);
    if (e.contains("gk_lags")) s.gk_lags = get_or<long>(e, "gk_lags", 0, src);
    if (e.contains("gk_cells")) s.gk_cells = get_or<long>(e, "gk_cells", 0, src);
    s.h_samples = get_or(e, "h_samples", s.h_samples, src);
    s.h_cells = get_or(e, "h_cells", s.h_cells, src);
  }
  if (j.contains("compare")) {
    const auto& cm = j.at("compare");
    c.compare.threshold = get_or(cm, "threshold", c.compare.threshold, src);
    c.compare.alpha = get_or(cm, "alpha", c.compare.alpha, src);
    c.compare.exponent_tolerance = get_or(cm, "exponent_tolerance", c.compare.exponent_tolerance, src);
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json model = {{"kind", c.model.kind}};
  if (c.model.kind == "toy") {
    model["alpha"] = c.model.alpha;
    model["roof_scale"] = c.model.roof_scale;
  } else {
    model["table"] = geometry::table_to_json(c.model.table);
  }
  nlohmann::json est = {{"tau_bar_samples", c.estimators.tau_bar_samples}, {"sigma_n", c.estimators.sigma_n},
                        {"sigma_samples", c.estimators.sigma_samples},     {"gk_samples", c.estimators.gk_samples},
                        {"h_samples", c.estimators.h_samples},             {"h_cells", c.estimators.h_cells}};
  if (c.estimators.gk_lags) est["gk_lags"] = *c.estimators.gk_lags;
  if (c.estimators.gk_cells) est["gk_cells"] = *c.estimators.gk_cells;
  return {{"model", model},
          {"pipeline", limitproc::to_string(c.pipeline)},
          {"spec", slowfast::spec_to_json(c.spec)},
          {"x0", std::vector<double>(c.x0.data(), c.x0.data() + c.x0.size())},
          {"eps", c.eps},
          {"n", c.n},
          {"n_limit", c.limit_samples()},
          {"seed", c.seed},
          {"grid",
           {{"horizon", c.grid.horizon},
            {"points", c.grid.points},
            {"dt_factor", c.grid.dt_factor},
            {"limit_steps", c.grid.limit_steps}}},
          {"estimators", est},
          {"compare",
           {{"threshold", c.compare.threshold},
            {"alpha", c.compare.alpha},
            {"exponent_tolerance", c.compare.exponent_tolerance}}}};
}

/// Reads and parses a config file; JSON syntax errors report their line.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  ConfigSource src(ss.str(), path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(src.line_at_byte(e.byte > 0 ? e.byte - 1 : 0)) +
                      ": JSON syntax error: " + e.what());
  }
  return config_from_json(j, src);
}

//---------------------------------------------------------------------------//
// Validation
//---------------------------------------------------------------------------//

struct ValidationCheck {
  std::string name;
  bool ok = true;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  [[nodiscard]] bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.ok; });
  }

  [[nodiscard]] std::string first_failure() const {
    for (const auto& c : checks) {
      if (!c.ok) return c.name + ": " + c.message;
    }
    return {};
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) arr.push_back({{"check", c.name}, {"ok", c.ok}, {"message", c.message}});
    return {{"ok", ok()}, {"checks", arr}};
  }
};

/// Table disjointness, finite-horizon certificate, spec decay metadata and
/// grid sanity. Failures are reported, not thrown. `src` supplies line numbers.
inline ValidationReport validate(const ExperimentConfig& c, const ConfigSource& src = {}) {
  ValidationReport r;
  auto add = [&](std::string name, bool ok, std::string msg, const std::string& key) {
    r.checks.push_back({std::move(name), ok, ok ? std::string("ok") : src.where(key) + msg});
  };

  if (c.model.kind == "billiard") {
    const auto dj = geometry::check_disjoint(c.model.table);
    add("table_disjoint", dj.ok, dj.message, "table");
    const auto cert = geometry::validate_finite_horizon(c.model.table, 2000, 50.0, c.seed);
    add("finite_horizon", cert.ok, cert.message, "table");
  } else {
    add("toy_alpha", c.model.alpha >= 0.0 && c.model.alpha < 1.0, "alpha must lie in [0, 1)", "alpha");
    add("toy_roof_scale", c.model.roof_scale > 0.0, "roof_scale must be positive", "roof_scale");
  }

  const auto& s = c.spec;
  switch (c.pipeline) {
    case LimitKind::Integrable:
      add("spec_integrable", s.integrable(), "integrable pipeline needs envelope_power > 1", "envelope_power");
      add("spec_not_centered", !s.centered,
          "integrable pipeline needs a spec with nonzero nu(f); this spec is centered", "spec");
      add("drift_zero", s.drift == slowfast::DriftKind::Zero, "integrable pipeline has no averaged drift", "drift");
      break;
    case LimitKind::NonCentered:
      add("spec_decay", s.satisfies_decay(), "decay condition fails: need envelope_power > 3 + 2 decay_exponent",
          "envelope_power");
      add("spec_not_centered", !s.centered, "non-centered pipeline needs nu(f) != 0", "spec");
      break;
    case LimitKind::Centered:
    case LimitKind::Birkhoff:
      add("spec_decay", s.satisfies_decay(), "decay condition fails: need envelope_power > 3 + 2 decay_exponent",
          "envelope_power");
      add("spec_centered", s.centered && s.profiles_centered(), "pipeline needs a centered spec", "spec");
      break;
  }
  if (c.pipeline == LimitKind::Birkhoff) {
    add("birkhoff_drift", s.drift == slowfast::DriftKind::Zero, "Birkhoff pipeline uses W_s = x0 + s(1,...,1), set drift to zero", "drift");
  }

  bool eps_ok = !c.eps.empty();
  std::set<double> seen;
  for (double e : c.eps) eps_ok = eps_ok && e > 0.0 && seen.insert(e).second;
  add("eps_ladder", eps_ok, "eps values must be positive and distinct", "eps");
  add("ensemble_size", c.n >= 1 && c.limit_samples() >= 1, "n must be at least 1", "n");
  add("grid_horizon", c.grid.horizon > 0.0, "grid.horizon must be positive", "horizon");
  add("grid_points", c.grid.points >= 1 && c.grid.limit_steps >= c.grid.points && c.grid.limit_steps % c.grid.points == 0,
      "grid.limit_steps must be a positive multiple of grid.points", "limit_steps");
  add("grid_dt", c.grid.dt_factor > 0.0 && c.grid.dt_factor <= 0.25, "grid.dt_factor must lie in (0, 0.25]",
      "dt_factor");
  add("x0_dim", c.x0.size() == s.dim, "x0 must have length spec.dim", "x0");
  add("compare_threshold", c.compare.threshold > 0.0 && c.compare.threshold <= 1.0,
      "compare.threshold must lie in (0, 1]", "threshold");
  return r;
}

}  // namespace zext::cli
