// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/quadrature.hpp"
#include "zext/core/types.hpp"
#include "zext/dynsys/base.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace zext::slowfast {

using dynsys::FiberContext;

/// Fiber profile u(w, s) of one component of the built-in family.
enum class Profile {
  Const,      ///< u = 1; not centered
  Step,       ///< u = phi(w) / tau(w); fiber integral phi(w), centered
  Cosine,     ///< u = cos(2 pi coord(w)) / tau(w); centered
  FiberSine,  ///< u = sin(2 pi s / tau(w)); fiber integral zero
};

enum class DriftKind { Zero, Linear, Sine };

inline Profile profile_from_string(const std::string& s) {
  if (s == "const") return Profile::Const;
  if (s == "step") return Profile::Step;
  if (s == "cosine") return Profile::Cosine;
  if (s == "fiber_sine") return Profile::FiberSine;
  throw ConfigError("unknown profile '" + s + "'");
}

inline std::string to_string(Profile p) {
  switch (p) {
    case Profile::Const: return "const";
    case Profile::Step: return "step";
    case Profile::Cosine: return "cosine";
    case Profile::FiberSine: return "fiber_sine";
  }
  return "?";
}

/// Amplitude a(x) = c0 + c1 sin(x): bounded, C^2, with bounded derivatives.
struct Amplitude {
  double c0 = 1.0;
  double c1 = 0.0;
  [[nodiscard]] double value(double x) const { return c0 + c1 * std::sin(x); }
  [[nodiscard]] double deriv(double x) const { return c1 * std::cos(x); }
};

/// The perturbation f(x, (w, m, s)) + fbar(x) of the slow variable x in R^d.
///
/// Component i of f is scale * w(m) * a_i(x_i) * u_i(w, s) with cell envelope
/// w(m) = (1 + |m|)^(-p). The drift fbar acts componentwise, so D fbar is diagonal.
struct PerturbationSpec {
  int dim = 1;
  std::vector<Amplitude> amplitude{Amplitude{}};
  std::vector<Profile> profile{Profile::Const};
  double envelope_power = 5.0;
  double decay_exponent = 0.5;
  double scale = 1.0;
  DriftKind drift = DriftKind::Zero;
  std::vector<double> drift_a{0.0};
  std::vector<double> drift_b{0.0};
  bool centered = false;

  [[nodiscard]] double weight(long m) const {
    return std::pow(1.0 + static_cast<double>(m < 0 ? -m : m), -envelope_power);
  }

  [[nodiscard]] double profile_value(int i, const FiberContext& ctx, double s) const {
    switch (profile[static_cast<std::size_t>(i)]) {
      case Profile::Const: return 1.0;
      case Profile::Step: return static_cast<double>(ctx.phi) / ctx.tau;
      case Profile::Cosine: return std::cos(2.0 * std::numbers::pi * ctx.coord) / ctx.tau;
      case Profile::FiberSine: return std::sin(2.0 * std::numbers::pi * s / ctx.tau);
    }
    return 0.0;
  }

  /// f(x, (w, m, s)).
  [[nodiscard]] Vec f(const Vec& x, long cell, const FiberContext& ctx, double s) const {
    const double wm = scale * weight(cell);
    Vec out(dim);
    for (int i = 0; i < dim; ++i) {
      out[i] = wm * amplitude[static_cast<std::size_t>(i)].value(x[i]) * profile_value(i, ctx, s);
    }
    return out;
  }

  /// D_1 f(x, (w, m, s)) (diagonal).
  [[nodiscard]] Mat d1f(const Vec& x, long cell, const FiberContext& ctx, double s) const {
    const double wm = scale * weight(cell);
    Mat out = Mat::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      out(i, i) = wm * amplitude[static_cast<std::size_t>(i)].deriv(x[i]) * profile_value(i, ctx, s);
    }
    return out;
  }

  /// Lipschitz constant of x -> f(x, state) in the Euclidean norm.
  [[nodiscard]] double lipschitz_f(long cell, const FiberContext& ctx, double s) const {
    double m = 0.0;
    for (int i = 0; i < dim; ++i) {
      m = std::max(m, std::abs(amplitude[static_cast<std::size_t>(i)].c1 * profile_value(i, ctx, s)));
    }
    return std::abs(scale) * weight(cell) * m;
  }

  [[nodiscard]] Vec fbar(const Vec& x) const {
    Vec out = Vec::Zero(dim);
    for (int i = 0; i < dim; ++i) {
      const auto k = static_cast<std::size_t>(i);
      switch (drift) {
        case DriftKind::Zero: break;
        case DriftKind::Linear: out[i] = drift_a[k] * x[i] + drift_b[k]; break;
        case DriftKind::Sine: out[i] = drift_a[k] * std::sin(x[i]) + drift_b[k]; break;
      }
    }
    return out;
  }

  [[nodiscard]] Mat dfbar(const Vec& x) const {
    Mat out = Mat::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      const auto k = static_cast<std::size_t>(i);
      switch (drift) {
        case DriftKind::Zero: break;
        case DriftKind::Linear: out(i, i) = drift_a[k]; break;
        case DriftKind::Sine: out(i, i) = drift_a[k] * std::cos(x[i]); break;
      }
    }
    return out;
  }

  [[nodiscard]] double lipschitz_fbar() const {
    double m = 0.0;
    if (drift == DriftKind::Zero) return 0.0;
    for (double a : drift_a) m = std::max(m, std::abs(a));
    return m;
  }

  /// sum_m (1 + |m|)^q w(m), truncated where the terms fall below 1e-17.
  /// Infinite when p - q <= 1.
  [[nodiscard]] double envelope_moment(double q) const {
    if (envelope_power - q <= 1.0) return std::numeric_limits<double>::infinity();
    double sum = 1.0;
    for (long m = 1; m < 10'000'000; ++m) {
      const double term = 2.0 * std::pow(1.0 + static_cast<double>(m), q - envelope_power);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sum;
  }

  /// Upper bound on sum_{|m| > M} w(m): the first term of each side plus the
  /// integral of the rest.
  [[nodiscard]] double envelope_tail(long M) const {
    if (envelope_power <= 1.0) return std::numeric_limits<double>::infinity();
    const double b = 2.0 + static_cast<double>(M);
    return 2.0 * (std::pow(b, -envelope_power) + std::pow(b, 1.0 - envelope_power) / (envelope_power - 1.0));
  }

  /// f(x, .) is nu-integrable for every x.
  [[nodiscard]] bool integrable() const { return envelope_power > 1.0; }

  /// Decay condition sum_m (1+|m|)^{2(1+eps0)} sup|f| < infinity.
  [[nodiscard]] bool satisfies_decay() const {
    return decay_exponent > 0.0 && envelope_power - 2.0 * (1.0 + decay_exponent) > 1.0;
  }

  /// Every component has null fiber integral against the base measure.
  [[nodiscard]] bool profiles_centered() const {
    for (auto p : profile) {
      if (p == Profile::Const) return false;
    }
    return true;
  }

  /// Upper bound on sup|u_i| over the fibers, given the roof's lower bound.
  [[nodiscard]] double profile_sup(int i, double roof_inf) const {
    switch (profile[static_cast<std::size_t>(i)]) {
      case Profile::Const:
      case Profile::FiberSine: return 1.0;
      case Profile::Step:
      case Profile::Cosine: return 1.0 / roof_inf;
    }
    return 1.0;
  }
};

/// f restricted to a single fiber (fixed cell and base point). The cell weight
/// and the s-independent profile values are evaluated once.
class FiberField {
 public:
  FiberField(const PerturbationSpec& spec, long cell, const FiberContext& ctx)
      : spec_(&spec), coef_(spec.dim), omega_(2.0 * std::numbers::pi / ctx.tau) {
    const double wm = spec.scale * spec.weight(cell);
    for (int i = 0; i < spec.dim; ++i) {
      const bool fs = spec.profile[static_cast<std::size_t>(i)] == Profile::FiberSine;
      fiber_sine_[static_cast<std::size_t>(i)] = fs;
      coef_[i] = fs ? wm : wm * spec.profile_value(i, ctx, 0.0);
      double c1 = std::abs(spec.amplitude[static_cast<std::size_t>(i)].c1 * coef_[i]);
      lip_ = std::max(lip_, c1);
    }
  }

  [[nodiscard]] Vec operator()(const Vec& x, double s) const {
    Vec out(spec_->dim);
    for (int i = 0; i < spec_->dim; ++i) {
      const auto k = static_cast<std::size_t>(i);
      double v = coef_[i] * spec_->amplitude[k].value(x[i]);
      if (fiber_sine_[k]) v *= std::sin(omega_ * s);
      out[i] = v;
    }
    return out;
  }

  /// sup over the fiber of the Lipschitz constant of x -> f(x, (w, m, s)).
  [[nodiscard]] double lipschitz() const { return lip_; }

 private:
  const PerturbationSpec* spec_;
  Vec coef_;
  std::array<bool, kMaxDim> fiber_sine_{};
  double omega_;
  double lip_ = 0.0;
};

/// F(x, w) = int_0^tau f(x, (w, m, s)) ds for the cell weight w(m) = 1, by
/// 8-node Gauss-Legendre over the fiber. F(x, (w, m)) = w(m) * unit_fiber_integral.
inline Vec unit_fiber_integral(const PerturbationSpec& spec, const Vec& x, const FiberContext& ctx) {
  const double w0 = spec.weight(0);
  return GaussLegendre8::integrate([&](double s) -> Vec { return spec.f(x, 0, ctx, s) / w0; }, 0.0, ctx.tau);
}

/// F(x, (w, m)) by fiber quadrature.
inline Vec fiber_integral(const PerturbationSpec& spec, const Vec& x, long cell, const FiberContext& ctx) {
  return GaussLegendre8::integrate([&](double s) -> Vec { return spec.f(x, cell, ctx, s); }, 0.0, ctx.tau);
}

/// D_1 F(x, (w, m)) by the same quadrature.
inline Mat fiber_integral_d1(const PerturbationSpec& spec, const Vec& x, long cell, const FiberContext& ctx) {
  return GaussLegendre8::integrate([&](double s) -> Mat { return spec.d1f(x, cell, ctx, s); }, 0.0, ctx.tau);
}

/// Callable form of F(x, base point): the operation named F_of.
struct FOf {
  const PerturbationSpec* spec;
  Vec operator()(const Vec& x, long cell, const FiberContext& ctx) const { return fiber_integral(*spec, x, cell, ctx); }
  Mat d1(const Vec& x, long cell, const FiberContext& ctx) const { return fiber_integral_d1(*spec, x, cell, ctx); }
};

inline FOf F_of(const PerturbationSpec& spec) { return FOf{&spec}; }

//---------------------------------------------------------------------------//
// JSON
//---------------------------------------------------------------------------//

inline PerturbationSpec spec_from_json(const nlohmann::json& j) {
  PerturbationSpec s;
  const std::string family = j.value("family", std::string("product"));
  if (family != "product") throw ConfigError("spec: unknown family '" + family + "'");
  s.dim = j.value("dim", 1);
  if (s.dim < 1 || s.dim > kMaxDim) throw ConfigError("spec: dim must be in [1, " + std::to_string(kMaxDim) + "]");
  const auto d = static_cast<std::size_t>(s.dim);
  s.amplitude.assign(d, Amplitude{});
  if (j.contains("amplitude")) {
    const auto& a = j.at("amplitude");
    if (!a.is_array() || a.size() != d) throw ConfigError("spec: amplitude must be an array of length dim");
    for (std::size_t i = 0; i < d; ++i) s.amplitude[i] = {a[i].value("c0", 1.0), a[i].value("c1", 0.0)};
  }
  s.profile.assign(d, Profile::Const);
  if (j.contains("profile")) {
    const auto& p = j.at("profile");
    if (p.is_string()) {
      s.profile.assign(d, profile_from_string(p.get<std::string>()));
    } else {
      if (!p.is_array() || p.size() != d) throw ConfigError("spec: profile must be a string or array of length dim");
      for (std::size_t i = 0; i < d; ++i) s.profile[i] = profile_from_string(p[i].get<std::string>());
    }
  }
  s.envelope_power = j.value("envelope_power", 5.0);
  s.decay_exponent = j.value("decay_exponent", 0.5);
  s.scale = j.value("scale", 1.0);
  s.drift_a.assign(d, 0.0);
  s.drift_b.assign(d, 0.0);
  if (j.contains("drift")) {
    const auto& dr = j.at("drift");
    const std::string kind = dr.value("kind", std::string("zero"));
    if (kind == "zero") {
      s.drift = DriftKind::Zero;
    } else if (kind == "linear") {
      s.drift = DriftKind::Linear;
    } else if (kind == "sine") {
      s.drift = DriftKind::Sine;
    } else {
      throw ConfigError("spec: unknown drift kind '" + kind + "'");
    }
    auto read = [&](const char* key, std::vector<double>& dst) {
      if (!dr.contains(key)) return;
      const auto& v = dr.at(key);
      if (v.is_number()) {
        dst.assign(d, v.get<double>());
      } else {
        if (!v.is_array() || v.size() != d) throw ConfigError(std::string("spec: drift.") + key + " length != dim");
        for (std::size_t i = 0; i < d; ++i) dst[i] = v[i].get<double>();
      }
    };
    read("a", s.drift_a);
    read("b", s.drift_b);
  }
  s.centered = j.value("centered", s.profiles_centered());
  return s;
}

inline nlohmann::json spec_to_json(const PerturbationSpec& s) {
  nlohmann::json amp = nlohmann::json::array();
  nlohmann::json prof = nlohmann::json::array();
  for (std::size_t i = 0; i < s.amplitude.size(); ++i) {
    amp.push_back({{"c0", s.amplitude[i].c0}, {"c1", s.amplitude[i].c1}});
    prof.push_back(to_string(s.profile[i]));
  }
  const char* kind = s.drift == DriftKind::Zero ? "zero" : s.drift == DriftKind::Linear ? "linear" : "sine";
  return {{"family", "product"},
          {"dim", s.dim},
          {"amplitude", amp},
          {"profile", prof},
          {"envelope_power", s.envelope_power},
          {"decay_exponent", s.decay_exponent},
          {"scale", s.scale},
          {"drift", {{"kind", kind}, {"a", s.drift_a}, {"b", s.drift_b}}},
          {"centered", s.centered}};
}

}  // namespace zext::slowfast
