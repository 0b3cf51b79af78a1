// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/parallel.hpp"
#include "zext/core/rng.hpp"
#include "zext/core/types.hpp"
#include "zext/limitproc/brownian.hpp"
#include "zext/limitproc/integrals.hpp"

#include <string>
#include <vector>

namespace zext::limitproc {

/// Parameters of the limit processes. `a_of` is the Green-Kubo matrix a(x);
/// the time-changed integrals use a~ = a / tau_bar.
struct LimitLawParams {
  double tau_bar = 1.0;
  double Sigma = 1.0;
  MatField a_of;
  VecField h_of;

  void validate() const {
    if (!(tau_bar > 0.0)) throw ConfigError("limit law: tau_bar must be positive");
    if (!(Sigma > 0.0)) throw ConfigError("limit law: Sigma must be positive");
  }

  [[nodiscard]] Mat atilde(const Vec& x) const { return a_of(x) / tau_bar; }
};

enum class LimitKind {
  Integrable,   ///< (nu(f) / tau_bar) L~_t(0)
  NonCentered,  ///< dY~ = (h(W) / tau_bar) dL~ + D fbar(W) Y~ dt
  Centered,     ///< dY = sqrt(a~(W)) dB_{L~} + D fbar(W) Y dt
  Birkhoff,     ///< V_t = int_0^t sqrt(a~(W_s)) dB_{L~_s},  W_s = x0 + s (1, ..., 1)
};

inline LimitKind limit_kind_from_string(const std::string& s) {
  if (s == "integrable") return LimitKind::Integrable;
  if (s == "non-centered") return LimitKind::NonCentered;
  if (s == "centered") return LimitKind::Centered;
  if (s == "birkhoff") return LimitKind::Birkhoff;
  throw ConfigError("unknown pipeline '" + s + "'");
}

inline std::string to_string(LimitKind k) {
  switch (k) {
    case LimitKind::Integrable: return "integrable";
    case LimitKind::NonCentered: return "non-centered";
    case LimitKind::Centered: return "centered";
    case LimitKind::Birkhoff: return "birkhoff";
  }
  return "?";
}

/// One realisation of the limit objects on `grid`.
struct LimitPathBundle {
  std::vector<double> grid;
  std::vector<double> Bprime;   ///< B' on grid / tau_bar
  std::vector<double> Lprime0;  ///< L'(0) on grid / tau_bar
  std::vector<double> Ltilde;   ///< tau_bar L'_{t / tau_bar}(0)
  std::vector<Vec> B;           ///< independent standard BM read at L~_t
  std::vector<Vec> V;           ///< driving integral (V or V~)
  std::vector<Vec> Y;           ///< limit process (Y, Y~, V, or nu L~)
};

/// Deterministic inputs shared by all bundles: W on the grid and D fbar.
struct LimitInputs {
  std::vector<double> grid;  ///< starts at 0
  std::vector<Vec> W;
  MatField dfbar;
};

/// One bundle from master stream `seed`. B' and B use unrelated derived streams.
inline LimitPathBundle sample_limit_bundle(const LimitLawParams& params, LimitKind kind, const LimitInputs& in,
                                           std::uint64_t seed) {
  params.validate();
  const auto& grid = in.grid;
  if (grid.size() < 2 || grid.front() != 0.0) throw GridMismatch("limit law: grid must start at 0");
  if (in.W.size() != grid.size()) throw GridMismatch("limit law: W and grid differ in length");
  const int d = static_cast<int>(in.W.front().size());

  LimitPathBundle out;
  out.grid = grid;
  TimedPair prime;
  prime.grid.reserve(grid.size());
  for (double t : grid) prime.grid.push_back(t / params.tau_bar);
  prime.B = simulate_bm(params.Sigma, prime.grid, derive_seed(seed, "bprime", 0));
  const double dt_prime = prime.grid[1] - prime.grid[0];
  prime.L = local_time_at_zero(prime.B, prime.grid, default_bandwidth(dt_prime));
  const TimedPair tilde = rescale_pair(prime, params.tau_bar);
  out.Bprime = prime.B;
  out.Lprime0 = prime.L;
  out.Ltilde = tilde.L;

  switch (kind) {
    case LimitKind::Integrable: {
      const Vec nu = params.h_of(in.W.front()) / params.tau_bar;
      out.Y.reserve(grid.size());
      for (double l : out.Ltilde) out.Y.push_back(nu * l);
      out.V = out.Y;
      break;
    }
    case LimitKind::NonCentered: {
      const double tb = params.tau_bar;
      const VecField h = [&](const Vec& x) -> Vec { return params.h_of(x) / tb; };
      out.V = drift_integral(h, in.W, out.Ltilde);
      out.Y = variation_of_constants(out.V, in.W, in.dfbar, grid);
      break;
    }
    case LimitKind::Centered:
    case LimitKind::Birkhoff: {
      std::vector<BrownianBridgeSampler> B;
      const double h = grid[1] - grid[0];
      for (int i = 0; i < d; ++i) B.emplace_back(h, derive_seed(seed, "b", static_cast<std::uint64_t>(i)));
      const MatField at = [&](const Vec& x) -> Mat { return params.atilde(x); };
      out.V = time_changed_integral(at, in.W, B, out.Ltilde, &out.B);
      out.Y = kind == LimitKind::Centered ? variation_of_constants(out.V, in.W, in.dfbar, grid) : out.V;
      break;
    }
  }
  return out;
}

/// N independent bundles; bundle i uses derive_seed(seed, "limit", i).
inline std::vector<LimitPathBundle> sample_limit_law(const LimitLawParams& params, LimitKind kind,
                                                     const LimitInputs& in, std::size_t N, std::uint64_t seed,
                                                     unsigned jobs = 1) {
  if (N < 1) throw ConfigError("limit law: N must be at least 1");
  std::vector<LimitPathBundle> out(N);
  parallel_for(N, jobs, [&](std::size_t i) {
    out[i] = sample_limit_bundle(params, kind, in, derive_seed(seed, "limit", i));
  });
  return out;
}

/// Y of N independent bundles at the grid indices `at` (bundle i as in
/// sample_limit_law); result[i][j] is Y at grid index at[j]. Avoids holding
/// whole bundles in memory.
inline std::vector<std::vector<Vec>> sample_limit_marginals(const LimitLawParams& params, LimitKind kind,
                                                            const LimitInputs& in, std::size_t N, std::uint64_t seed,
                                                            const std::vector<std::size_t>& at, unsigned jobs = 1) {
  if (N < 1) throw ConfigError("limit law: N must be at least 1");
  for (auto k : at) {
    if (k >= in.grid.size()) throw GridMismatch("limit law: marginal index outside grid");
  }
  std::vector<std::vector<Vec>> out(N);
  parallel_for(N, jobs, [&](std::size_t i) {
    const auto b = sample_limit_bundle(params, kind, in, derive_seed(seed, "limit", i));
    for (auto k : at) out[i].push_back(b.Y[k]);
  });
  return out;
}

/// Birkhoff limit input: W_s = x0 + s (1, ..., 1) with D fbar = 0.
inline LimitInputs birkhoff_inputs(const Vec& x0, const std::vector<double>& grid) {
  LimitInputs in;
  in.grid = grid;
  for (double t : grid) in.W.push_back(x0 + t * Vec::Ones(x0.size()));
  const auto d = x0.size();
  in.dfbar = [d](const Vec&) -> Mat { return Mat::Zero(d, d); };
  return in;
}

}  // namespace zext::limitproc
