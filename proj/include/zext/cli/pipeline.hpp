// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/cli/config.hpp"
#include "zext/core/parallel.hpp"
#include "zext/core/rng.hpp"
#include "zext/dynsys/suspension.hpp"
#include "zext/limitproc/limit_law.hpp"
#include "zext/slowfast/integrate.hpp"
#include "zext/stats/compare.hpp"
#include "zext/stats/estimators.hpp"
#include "zext/stats/fit.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace zext::cli {

namespace fs = std::filesystem;

/// Normalization exponent of the dynamics-side quantity.
inline double gamma_of(LimitKind k) {
  switch (k) {
    case LimitKind::Integrable:
    case LimitKind::NonCentered: return 0.5;
    case LimitKind::Centered: return 0.75;
    case LimitKind::Birkhoff: return 0.0;
  }
  return 0.0;
}

/// Expected log-log slope of the median sup error against eps, if the
/// pipeline has one.
inline std::optional<double> expected_exponent(LimitKind k) {
  if (k == LimitKind::Birkhoff) return std::nullopt;
  return gamma_of(k);
}

/// Calls fn(base) with the configured base model.
template <class Fn>
decltype(auto) with_model(const ExperimentConfig& c, Fn&& fn) {
  if (c.model.kind == "billiard") {
    const dynsys::BilliardBase base(c.model.table);
    return fn(base);
  }
  const dynsys::ToyDoublingBase base(c.model.alpha, c.model.roof_scale);
  return fn(base);
}

//---------------------------------------------------------------------------//
// Dynamics side
//---------------------------------------------------------------------------//

struct DynamicsEnsemble {
  double eps = 0.0;
  stats::Ensemble ensemble;       ///< normalized quantity at the report times
  std::vector<double> sup_error;  ///< raw sup_[0, horizon] |X - W| (sup |u| for Birkhoff)
};

/// N dynamics samples at one eps. Sample i starts from the stream
/// derive_seed(seed, "dynamics", i) for every eps, so the ladder shares starts.
template <dynsys::ZExtensionBase B>
DynamicsEnsemble simulate_dynamics(const ExperimentConfig& c, const B& base, double eps) {
  DynamicsEnsemble out;
  out.eps = eps;
  out.ensemble.times = c.report_times();
  out.ensemble.samples.resize(c.n);
  out.sup_error.resize(c.n);
  const double dt = c.grid.dt_factor * eps * base.roof_inf();
  const double scale = std::pow(eps, -gamma_of(c.pipeline));
  parallel_for(c.n, c.jobs, [&](std::size_t i) {
    Stream rng(derive_seed(c.seed, "dynamics", i));
    const auto start = dynsys::sample_start(base, rng);
    if (c.pipeline == LimitKind::Birkhoff) {
      auto p = slowfast::perturbed_birkhoff(c.spec, base, c.x0, start, eps, out.ensemble.times, dt);
      out.sup_error[i] = slowfast::sup_norm(p);
      out.ensemble.samples[i] = std::move(p.values);
    } else {
      auto tr = slowfast::error_trace(c.spec, base, c.x0, start, eps, out.ensemble.times, dt);
      out.sup_error[i] = tr.sup;
      for (auto& v : tr.error) v *= scale;
      out.ensemble.samples[i] = std::move(tr.error);
    }
  });
  return out;
}

//---------------------------------------------------------------------------//
// Limit side
//---------------------------------------------------------------------------//

struct LimitParameters {
  stats::Estimate tau_bar;
  stats::Estimate sigma;
  std::optional<stats::GreenKuboField> a;
  std::optional<stats::HField> h;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j = {{"tau_bar", tau_bar.to_json()}, {"sigma", sigma.to_json()}};
    if (a) j["green_kubo_unit_amplitude"] = a->unit.to_json();
    if (h) j["h_unit_amplitude"] = h->unit.to_json();
    return j;
  }
};

template <dynsys::ZExtensionBase B>
LimitParameters estimate_parameters(const ExperimentConfig& c, const B& base) {
  const auto& e = c.estimators;
  LimitParameters p;
  p.tau_bar = stats::estimate_tau_bar(base, e.tau_bar_samples, derive_seed(c.seed, "tau_bar", 0), c.jobs);
  p.sigma = stats::estimate_sigma(base, e.sigma_n, e.sigma_samples, derive_seed(c.seed, "sigma", 0), c.jobs);
  if (c.pipeline == LimitKind::Centered || c.pipeline == LimitKind::Birkhoff) {
    const auto t = stats::default_truncation(base);
    p.a = stats::green_kubo_field(c.spec, base, e.gk_lags.value_or(t.lags), e.gk_cells.value_or(t.cells),
                                  e.gk_samples, derive_seed(c.seed, "green_kubo", 0), c.jobs);
  } else {
    p.h = stats::h_field(c.spec, base, e.h_samples, e.h_cells, derive_seed(c.seed, "h", 0), c.jobs);
  }
  return p;
}

/// Limit-law samples of the pipeline's process at the report times.
inline stats::Ensemble simulate_limit(const ExperimentConfig& c, const LimitParameters& p) {
  limitproc::LimitLawParams lp;
  lp.tau_bar = p.tau_bar.value;
  lp.Sigma = p.sigma.value;
  const int d = c.spec.dim;
  if (p.a) {
    const auto field = *p.a;
    lp.a_of = [field](const Vec& x) -> Mat { return field(x); };
  } else {
    lp.a_of = [d](const Vec&) -> Mat { return Mat::Zero(d, d); };
  }
  if (p.h) {
    const auto field = *p.h;
    lp.h_of = [field](const Vec& x) -> Vec { return field(x); };
  } else {
    lp.h_of = [d](const Vec&) -> Vec { return Vec::Zero(d); };
  }

  const auto grid = c.limit_grid();
  limitproc::LimitInputs in;
  switch (c.pipeline) {
    case LimitKind::Birkhoff: in = limitproc::birkhoff_inputs(c.x0, grid); break;
    case LimitKind::Integrable:
      in.grid = grid;
      in.W.assign(grid.size(), c.x0);
      in.dfbar = [d](const Vec&) -> Mat { return Mat::Zero(d, d); };
      break;
    case LimitKind::Centered:
    case LimitKind::NonCentered: {
      in.grid = grid;
      in.W = slowfast::integrate_averaged(c.spec, c.x0, grid, grid[1] - grid[0]).values;
      const auto spec = c.spec;
      in.dfbar = [spec](const Vec& x) -> Mat { return spec.dfbar(x); };
      break;
    }
  }
  stats::Ensemble out;
  out.times = c.report_times();
  out.samples = limitproc::sample_limit_marginals(lp, c.pipeline, in, c.limit_samples(),
                                                  derive_seed(c.seed, "limit", 0), c.report_indices(), c.jobs);
  return out;
}

//---------------------------------------------------------------------------//
// Artifacts
//---------------------------------------------------------------------------//

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
}

/// Columns sample,t,y1..yd; one row per sample and report time.
inline std::string ensemble_csv(const stats::Ensemble& e) {
  std::string s = "sample,t";
  for (int i = 0; i < e.dim(); ++i) s += ",y" + std::to_string(i + 1);
  s += '\n';
  for (std::size_t n = 0; n < e.samples.size(); ++n) {
    for (std::size_t k = 0; k < e.times.size(); ++k) {
      s += std::to_string(n) + ',' + format_double(e.times[k]);
      for (int i = 0; i < e.dim(); ++i) s += ',' + format_double(e.samples[n][k][i]);
      s += '\n';
    }
  }
  return s;
}

inline stats::Ensemble read_ensemble_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample,t", 0) != 0) throw Error(p.string() + ": not an ensemble CSV");
  const int d = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
  stats::Ensemble e;
  long last = -1;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    if (static_cast<int>(v.size()) != d + 2) throw Error(p.string() + ":" + std::to_string(lineno) + ": bad row");
    const auto n = static_cast<long>(v[0]);
    if (n != last) {
      e.samples.emplace_back();
      last = n;
    }
    if (e.samples.size() == 1) e.times.push_back(v[1]);
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = v[static_cast<std::size_t>(i) + 2];
    e.samples.back().push_back(y);
  }
  e.validate();
  return e;
}

inline std::string dynamics_file(std::size_t k) { return "dynamics_eps" + std::to_string(k) + ".csv"; }
inline std::string sup_file(std::size_t k) { return "sup_errors_eps" + std::to_string(k) + ".csv"; }

inline std::string sup_csv(const DynamicsEnsemble& d) {
  std::string s = "sample,eps,sup\n";
  for (std::size_t n = 0; n < d.sup_error.size(); ++n) {
    s += std::to_string(n) + ',' + format_double(d.eps) + ',' + format_double(d.sup_error[n]) + '\n';
  }
  return s;
}

inline std::vector<double> read_sup_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  }
  return out;
}

inline std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline constexpr const char* kSeedDerivation =
    "stream seed = derive_seed(master, purpose, index) = mix64(mix64(master ^ fnv1a64(purpose)) + "
    "mix64(index + 0x632BE59BD9B4E019)), mix64 = SplitMix64 finalizer; purposes: dynamics (index = sample, "
    "shared across eps), limit (master of the limit sampler; bundle i uses purpose limit, index i), "
    "tau_bar, sigma, green_kubo, h (estimators; sample i uses the estimator's own purpose)";

/// Lists every file of the directory (except the manifest) with its SHA-256.
inline void write_manifest(const ExperimentConfig& c, const fs::path& dir, const std::string& command) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : files) {
    const auto content = read_file(f);
    list.push_back({{"path", f.filename().string()}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }
  nlohmann::json m = {{"command", command},
                      {"config", config_to_json(c)},
                      {"master_seed", c.seed},
                      {"seed_derivation", kSeedDerivation},
                      {"files", list}};
  write_file(dir / "manifest.json", json_text(m));
}

//---------------------------------------------------------------------------//
// Subcommands
//---------------------------------------------------------------------------//

inline void require_valid(const ExperimentConfig& c) {
  const auto rep = validate(c);
  if (!rep.ok()) throw ConfigError(rep.first_failure());
}

/// Dynamics ensembles for every eps.
inline std::vector<DynamicsEnsemble> run_simulate(const ExperimentConfig& c, bool manifest = true) {
  require_valid(c);
  const fs::path dir(c.out);
  std::vector<DynamicsEnsemble> out;
  with_model(c, [&](const auto& base) {
    for (std::size_t k = 0; k < c.eps.size(); ++k) {
      auto d = simulate_dynamics(c, base, c.eps[k]);
      write_file(dir / dynamics_file(k), ensemble_csv(d.ensemble));
      write_file(dir / sup_file(k), sup_csv(d));
      out.push_back(std::move(d));
    }
    return 0;
  });
  if (manifest) write_manifest(c, dir, "simulate");
  return out;
}

inline LimitParameters run_estimate(const ExperimentConfig& c, bool manifest = true) {
  require_valid(c);
  const fs::path dir(c.out);
  auto p = with_model(c, [&](const auto& base) { return estimate_parameters(c, base); });
  write_file(dir / "estimates.json", json_text(p.to_json()));
  if (manifest) write_manifest(c, dir, "estimate");
  return p;
}

inline stats::Ensemble run_limit(const ExperimentConfig& c, bool manifest = true) {
  const auto p = run_estimate(c, false);
  auto e = simulate_limit(c, p);
  write_file(fs::path(c.out) / "limit.csv", ensemble_csv(e));
  if (manifest) write_manifest(c, fs::path(c.out), "limit");
  return e;
}

struct PipelineResult {
  std::vector<stats::ComparisonReport> reports;
  std::optional<stats::ExponentFit> fit;
  nlohmann::json checks = nlohmann::json::array();
  bool ok = true;
};

/// Comparison reports, exponent fit and acceptance checks from ensembles.
inline PipelineResult evaluate(const ExperimentConfig& c, const std::vector<DynamicsEnsemble>& dyn,
                               const stats::Ensemble& limit) {
  PipelineResult r;
  std::vector<std::size_t> all(limit.times.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  std::size_t smallest = 0;
  for (std::size_t k = 0; k < dyn.size(); ++k) {
    if (dyn[k].eps < dyn[smallest].eps) smallest = k;
    const stats::ComparisonMeta meta{limitproc::to_string(c.pipeline), dyn[k].eps, c.seed};
    auto reps = stats::compare_to_limit(dyn[k].ensemble, limit, all, c.compare.threshold, meta, c.compare.alpha);
    r.reports.insert(r.reports.end(), reps.begin(), reps.end());
  }
  if (!dyn.empty()) {
    // The check uses the final report time at the smallest eps.
    const auto& final_rep = r.reports[smallest * all.size() + all.size() - 1];
    r.checks.push_back({{"check", "limit_law_at_smallest_eps"},
                        {"eps", dyn[smallest].eps},
                        {"time", final_rep.time},
                        {"ks", final_rep.ks},
                        {"threshold", c.compare.threshold},
                        {"pass", final_rep.pass}});
    r.ok = r.ok && final_rep.pass;
  }
  const auto target = expected_exponent(c.pipeline);
  if (target && dyn.size() >= 3) {
    std::vector<double> eps;
    std::vector<std::vector<double>> sups;
    for (const auto& d : dyn) {
      eps.push_back(d.eps);
      sups.push_back(d.sup_error);
    }
    r.fit = stats::exponent_fit(eps, sups);
    const bool pass = r.fit->contains(*target, c.compare.exponent_tolerance);
    r.checks.push_back({{"check", "sup_error_exponent"},
                        {"slope", r.fit->slope},
                        {"expected", *target},
                        {"tolerance", c.compare.exponent_tolerance},
                        {"pass", pass}});
    r.ok = r.ok && pass;
  }
  return r;
}

inline void write_evaluation(const ExperimentConfig& c, const std::vector<DynamicsEnsemble>& dyn,
                             const PipelineResult& r) {
  const fs::path dir(c.out);
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : r.reports) reps.push_back(rep.to_json());
  nlohmann::json j = {{"pipeline", limitproc::to_string(c.pipeline)},
                      {"comparisons", reps},
                      {"checks", r.checks},
                      {"ok", r.ok}};
  if (r.fit) j["exponent_fit"] = r.fit->to_json();
  write_file(dir / "reports.json", json_text(j));

  // One row per eps: median sup error and the KS statistic at the final time.
  const std::size_t per = r.reports.size() / std::max<std::size_t>(1, dyn.size());
  std::string s = "eps,median_sup,ks_max_final,pass_final\n";
  for (std::size_t k = 0; k < dyn.size(); ++k) {
    const auto& rep = r.reports[k * per + per - 1];
    const double ks = *std::max_element(rep.ks.begin(), rep.ks.end());
    s += format_double(dyn[k].eps) + ',' + format_double(stats::median(dyn[k].sup_error)) + ',' + format_double(ks) +
         ',' + (rep.pass ? "1" : "0") + '\n';
  }
  write_file(dir / "summary.csv", s);
}

/// Re-reads the ensembles of a previous simulate + limit run and compares them.
inline PipelineResult run_compare(const ExperimentConfig& c, bool manifest = true) {
  require_valid(c);
  const fs::path dir(c.out);
  std::vector<DynamicsEnsemble> dyn;
  for (std::size_t k = 0; k < c.eps.size(); ++k) {
    DynamicsEnsemble d;
    d.eps = c.eps[k];
    d.ensemble = read_ensemble_csv(dir / dynamics_file(k));
    d.sup_error = read_sup_csv(dir / sup_file(k));
    dyn.push_back(std::move(d));
  }
  const auto limit = read_ensemble_csv(dir / "limit.csv");
  auto r = evaluate(c, dyn, limit);
  write_evaluation(c, dyn, r);
  if (manifest) write_manifest(c, dir, "compare");
  return r;
}

/// simulate -> estimate -> limit -> compare, with manifest.
inline PipelineResult run_pipeline(const ExperimentConfig& c) {
  const auto dyn = run_simulate(c, false);
  const auto limit = run_limit(c, false);
  auto r = evaluate(c, dyn, limit);
  write_evaluation(c, dyn, r);
  write_manifest(c, fs::path(c.out), "pipeline");
  return r;
}

}  // namespace zext::cli
