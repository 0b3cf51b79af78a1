// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/parallel.hpp"
#include "zext/core/rng.hpp"
#include "zext/core/types.hpp"
#include "zext/dynsys/base.hpp"
#include "zext/slowfast/perturbation.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace zext::stats {

using slowfast::PerturbationSpec;

/// Scalar Monte Carlo estimate.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"value", value}, {"stderr", stderr_}, {"samples", samples}, {"seed", seed}};
  }
};

namespace detail {

/// Number of reduction blocks. Fixed, so results do not depend on --jobs.
inline constexpr std::size_t kBlocks = 64;

inline std::pair<std::size_t, std::size_t> block_range(std::size_t b, std::size_t n) {
  return {b * n / kBlocks, (b + 1) * n / kBlocks};
}

struct Moments {
  double s = 0.0;
  double s2 = 0.0;
  void add(double v) {
    s += v;
    s2 += v * v;
  }
  void merge(const Moments& o) {
    s += o.s;
    s2 += o.s2;
  }
};

inline Estimate finish(const Moments& m, std::size_t n, std::uint64_t seed) {
  Estimate e;
  e.samples = n;
  e.seed = seed;
  const auto dn = static_cast<double>(n);
  e.value = m.s / dn;
  const double var = n > 1 ? std::max(0.0, (m.s2 - dn * e.value * e.value) / (dn - 1.0)) : 0.0;
  e.stderr_ = std::sqrt(var / dn);
  return e;
}

/// Parallel reduction of per-sample scalars into Moments, merged in block order.
template <class Sample>
Moments reduce_moments(std::size_t n, unsigned jobs, Sample&& sample) {
  std::vector<Moments> blocks(kBlocks);
  parallel_for(kBlocks, jobs, [&](std::size_t b) {
    const auto [lo, hi] = block_range(b, n);
    for (std::size_t i = lo; i < hi; ++i) blocks[b].add(sample(i));
  });
  Moments total;
  for (const auto& m : blocks) total.merge(m);
  return total;
}

}  // namespace detail

/// Mean roof under the base measure.
template <dynsys::ZExtensionBase B>
Estimate estimate_tau_bar(const B& base, std::size_t N, std::uint64_t seed, unsigned jobs = 1) {
  if (N < 1) throw ConfigError("estimate_tau_bar: N must be at least 1");
  auto m = detail::reduce_moments(N, jobs, [&](std::size_t i) {
    Stream rng(derive_seed(seed, "tau_bar", i));
    return base.roof(base.sample(rng));
  });
  return detail::finish(m, N, seed);
}

/// Var(S_n phi) / n over N base samples. The standard error is that of the
/// sample second moment of S_n phi / sqrt(n).
template <dynsys::ZExtensionBase B>
Estimate estimate_sigma(const B& base, long n, std::size_t N, std::uint64_t seed, unsigned jobs = 1) {
  if (n < 1) throw ConfigError("estimate_sigma: n must be at least 1");
  if (N < 2) throw ConfigError("estimate_sigma: N must be at least 2");
  std::vector<double> s(N);
  parallel_for(detail::kBlocks, jobs, [&](std::size_t b) {
    const auto [lo, hi] = detail::block_range(b, N);
    for (std::size_t i = lo; i < hi; ++i) {
      Stream rng(derive_seed(seed, "sigma", i));
      auto w = base.sample(rng);
      long acc = 0;
      for (long k = 0; k < n; ++k) {
        acc += base.phi(w);
        w = base.step(w);
      }
      s[i] = static_cast<double>(acc) / std::sqrt(static_cast<double>(n));
    }
  });
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(N);
  detail::Moments sq;
  for (double v : s) sq.add((v - mean) * (v - mean));
  Estimate e = detail::finish(sq, N, seed);
  e.value *= static_cast<double>(N) / static_cast<double>(N - 1);
  return e;
}

//---------------------------------------------------------------------------//
// Green-Kubo
//---------------------------------------------------------------------------//

struct GreenKuboEstimate {
  Vec x;
  long lags = 0;
  long cells = 0;
  Mat value;
  Mat stderr_;
  double cell_tail = 0.0;  ///< bound on the contribution of start cells |m| > cells
  double lag_tail = 0.0;   ///< sum of |lag terms| over (lags/2, lags], standing in for lags > lags
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  /// Entrywise truncation bound.
  [[nodiscard]] double tail_bound() const { return cell_tail + lag_tail; }

  /// value with negative eigenvalues set to zero.
  [[nodiscard]] Mat psd() const {
    Eigen::SelfAdjointEigenSolver<Mat> es(value);
    Vec ev = es.eigenvalues().cwiseMax(0.0);
    Mat out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
  }

  [[nodiscard]] nlohmann::json to_json() const {
    auto mat = [](const Mat& m) {
      nlohmann::json rows = nlohmann::json::array();
      for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
      }
      return rows;
    };
    std::vector<double> xv(x.data(), x.data() + x.size());
    return {{"x", xv},           {"lags", lags},         {"cells", cells},         {"value", mat(value)},
            {"stderr", mat(stderr_)}, {"cell_tail", cell_tail}, {"lag_tail", lag_tail}, {"tail_bound", tail_bound()},
            {"samples", samples}, {"seed", seed}};
  }
};

/// Default truncation for a base: 20 cells and 200 lags, halved for the billiard.
struct GreenKuboTruncation {
  long cells = 20;
  long lags = 200;
};

template <dynsys::ZExtensionBase B>
GreenKuboTruncation default_truncation(const B& base) {
  if (base.name() == "billiard") return {10, 100};
  return {};
}

/// a(x) = sum_m sum_{l in Z} E[F(x, (w, m)) F(x, T^|l| (w, m))^T], symmetrized,
/// with F(x, (w, m)) = w(m) G(x, w) the fiber integral. The base point w is
/// drawn from the base measure; the start cell m is summed over |m| <= cells
/// and the lag over |l| <= lags. Lag l moves the cell to m + S_l phi(w), so
/// the pair weight is K(S_l phi) with K(k) = sum_{|m| <= cells} w(m) w(m + k).
/// Each of the N samples is one orbit segment, averaged over max(1, lags)
/// starting points along it; the standard error is taken across samples.
template <dynsys::ZExtensionBase B>
GreenKuboEstimate green_kubo(const PerturbationSpec& spec, const B& base, const Vec& x, long lags, long cells,
                             std::size_t N, std::uint64_t seed, unsigned jobs = 1) {
  if (lags < 0 || cells < 0) throw ConfigError("green_kubo: truncation must be nonnegative");
  if (N < 2) throw ConfigError("green_kubo: N must be at least 2");
  const int d = spec.dim;
  auto pair_weight = [&](long k) {
    double acc = 0.0;
    for (long m = -cells; m <= cells; ++m) acc += spec.weight(m) * spec.weight(m + k);
    return acc;
  };
  // Billiard steps can exceed 1 in size, so K is tabulated on a wider range.
  const long kspan = 4 * lags + 8;
  std::vector<double> K(static_cast<std::size_t>(2 * kspan + 1));
  for (long k = -kspan; k <= kspan; ++k) K[static_cast<std::size_t>(k + kspan)] = pair_weight(k);
  auto Kof = [&](long k) { return std::abs(k) <= kspan ? K[static_cast<std::size_t>(k + kspan)] : pair_weight(k); };
  const double tail_w = spec.envelope_tail(cells);

  struct Block {
    Mat sum;
    Mat sum2;
    std::vector<Mat> per_lag;
    double cell_tail = 0.0;
  };
  std::vector<Block> blocks(detail::kBlocks);
  parallel_for(detail::kBlocks, jobs, [&](std::size_t b) {
    Block& blk = blocks[b];
    blk.sum = Mat::Zero(d, d);
    blk.sum2 = Mat::Zero(d, d);
    blk.per_lag.assign(static_cast<std::size_t>(lags + 1), Mat::Zero(d, d));
    const auto [lo, hi] = detail::block_range(b, N);
    const long J = std::max(1L, lags);
    Eigen::MatrixXd G(d, J + lags);
    std::vector<long> P(static_cast<std::size_t>(J + lags + 1), 0);
    std::vector<double> amax(static_cast<std::size_t>(J + lags));
    Eigen::VectorXd kw(J);
    for (std::size_t i = lo; i < hi; ++i) {
      Stream rng(derive_seed(seed, "green_kubo", i));
      auto w = base.sample(rng);
      for (long k = 0; k < J + lags; ++k) {
        const Vec g = slowfast::unit_fiber_integral(spec, x, dynsys::fiber_context(base, w));
        G.col(k) = g;
        amax[static_cast<std::size_t>(k)] = g.cwiseAbs().maxCoeff();
        P[static_cast<std::size_t>(k + 1)] = P[static_cast<std::size_t>(k)] + base.phi(w);
        w = base.step(w);
      }
      // Average over the J starting points T^j w; each is distributed as w.
      Mat X = Mat::Zero(d, d);
      double abs_sum = 0.0;
      for (long l = 0; l <= lags; ++l) {
        const double c = l == 0 ? 1.0 : 2.0;
        double a = 0.0;
        for (long j = 0; j < J; ++j) {
          kw[j] = Kof(P[static_cast<std::size_t>(j + l)] - P[static_cast<std::size_t>(j)]);
          a += amax[static_cast<std::size_t>(j)] * amax[static_cast<std::size_t>(j + l)];
        }
        const Eigen::MatrixXd left = G.leftCols(J) * kw.asDiagonal();
        const Eigen::MatrixXd prod = left * G.middleCols(l, J).transpose();
        Mat term = (c / static_cast<double>(J)) * prod;
        term = (0.5 * (term + term.transpose())).eval();
        X += term;
        blk.per_lag[static_cast<std::size_t>(l)] += term;
        abs_sum += c * a / static_cast<double>(J);
      }
      blk.sum += X;
      blk.sum2 += X.cwiseProduct(X);
      blk.cell_tail += tail_w * abs_sum;
    }
  });

  GreenKuboEstimate out;
  out.x = x;
  out.lags = lags;
  out.cells = cells;
  out.samples = N;
  out.seed = seed;
  Mat sum = Mat::Zero(d, d);
  Mat sum2 = Mat::Zero(d, d);
  std::vector<Mat> per_lag(static_cast<std::size_t>(lags + 1), Mat::Zero(d, d));
  double cell_tail = 0.0;
  for (const auto& blk : blocks) {
    sum += blk.sum;
    sum2 += blk.sum2;
    for (std::size_t l = 0; l < per_lag.size(); ++l) per_lag[l] += blk.per_lag[l];
    cell_tail += blk.cell_tail;
  }
  const auto dn = static_cast<double>(N);
  out.value = sum / dn;
  out.value = (0.5 * (out.value + out.value.transpose())).eval();
  Mat var = (sum2 - dn * out.value.cwiseProduct(out.value)) / (dn - 1.0);
  out.stderr_ = (var.cwiseMax(0.0) / dn).cwiseSqrt();
  out.cell_tail = cell_tail / dn;
  for (long l = lags / 2 + 1; l <= lags; ++l) {
    out.lag_tail += (per_lag[static_cast<std::size_t>(l)] / dn).cwiseAbs().maxCoeff();
  }
  return out;
}

template <dynsys::ZExtensionBase B>
GreenKuboEstimate green_kubo(const PerturbationSpec& spec, const B& base, const Vec& x, std::size_t N,
                             std::uint64_t seed, unsigned jobs = 1) {
  const auto t = default_truncation(base);
  return green_kubo(spec, base, x, t.lags, t.cells, N, seed, jobs);
}

/// Copy of a perturbation with every amplitude replaced by the constant 1.
inline PerturbationSpec unit_amplitude(const PerturbationSpec& spec) {
  PerturbationSpec s = spec;
  for (auto& a : s.amplitude) a = {1.0, 0.0};
  return s;
}

/// a(x) for the built-in family. F_i(x, (w, m)) = amp_i(x_i) w(m) U_i(w), so
/// a(x) = D(x) A D(x) with D = diag(amp_i(x_i)) and A the Green-Kubo matrix of
/// the unit-amplitude spec. `A` is estimated once.
struct GreenKuboField {
  PerturbationSpec spec;
  GreenKuboEstimate unit;
  Mat A;  ///< unit.psd()

  [[nodiscard]] Mat operator()(const Vec& x) const {
    Vec amp(spec.dim);
    for (int i = 0; i < spec.dim; ++i) amp[i] = spec.amplitude[static_cast<std::size_t>(i)].value(x[i]);
    return amp.asDiagonal() * A * amp.asDiagonal();
  }
};

template <dynsys::ZExtensionBase B>
GreenKuboField green_kubo_field(const PerturbationSpec& spec, const B& base, long lags, long cells, std::size_t N,
                                std::uint64_t seed, unsigned jobs = 1) {
  const auto unit = unit_amplitude(spec);
  auto est = green_kubo(unit, base, Vec::Zero(spec.dim), lags, cells, N, seed, jobs);
  const Mat A = est.psd();
  return {spec, std::move(est), A};
}

//---------------------------------------------------------------------------//
// h(x) = nu(f(x, .))
//---------------------------------------------------------------------------//

struct VecEstimate {
  Vec value;
  Vec stderr_;
  double tail_bound = 0.0;
  long cells = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"value", std::vector<double>(value.data(), value.data() + value.size())},
            {"stderr", std::vector<double>(stderr_.data(), stderr_.data() + stderr_.size())},
            {"tail_bound", tail_bound},
            {"cells", cells},
            {"samples", samples},
            {"seed", seed}};
  }
};

/// h(x) = sum_m int f(x, (w, m, s)) ds dmu(w) = (sum_{|m| <= cells} w(m)) E[G(x, w)],
/// with G the unit-weight fiber integral. tail_bound bounds the dropped cells
/// by sup|G| times the envelope tail.
template <dynsys::ZExtensionBase B>
VecEstimate estimate_h(const PerturbationSpec& spec, const B& base, const Vec& x, std::size_t N, long cells,
                       std::uint64_t seed, unsigned jobs = 1) {
  if (N < 2) throw ConfigError("estimate_h: N must be at least 2");
  if (cells < 0) throw ConfigError("estimate_h: cells must be nonnegative");
  const int d = spec.dim;
  double wsum = 0.0;
  for (long m = -cells; m <= cells; ++m) wsum += spec.weight(m);

  std::vector<std::pair<Vec, Vec>> blocks(detail::kBlocks, {Vec::Zero(d), Vec::Zero(d)});
  parallel_for(detail::kBlocks, jobs, [&](std::size_t b) {
    const auto [lo, hi] = detail::block_range(b, N);
    for (std::size_t i = lo; i < hi; ++i) {
      Stream rng(derive_seed(seed, "h", i));
      const auto w = base.sample(rng);
      const Vec g = slowfast::unit_fiber_integral(spec, x, dynsys::fiber_context(base, w));
      blocks[b].first += g;
      blocks[b].second += g.cwiseProduct(g);
    }
  });
  Vec s = Vec::Zero(d);
  Vec s2 = Vec::Zero(d);
  for (const auto& [a, q] : blocks) {
    s += a;
    s2 += q;
  }
  const auto dn = static_cast<double>(N);
  const Vec mean = s / dn;
  const Vec var = ((s2 - dn * mean.cwiseProduct(mean)) / (dn - 1.0)).cwiseMax(0.0);

  VecEstimate out;
  out.value = wsum * mean;
  out.stderr_ = wsum * (var / dn).cwiseSqrt();
  out.cells = cells;
  out.samples = N;
  out.seed = seed;
  double gsup = 0.0;
  for (int i = 0; i < d; ++i) {
    const auto& a = spec.amplitude[static_cast<std::size_t>(i)];
    gsup = std::max(gsup, std::abs(spec.scale) * (std::abs(a.c0) + std::abs(a.c1)) *
                              spec.profile_sup(i, base.roof_inf()) * base.roof_sup());
  }
  out.tail_bound = gsup * spec.envelope_tail(cells);
  return out;
}

/// h(x) for the built-in family: h_i(x) = amp_i(x_i) H_i with H from the
/// unit-amplitude spec.
struct HField {
  PerturbationSpec spec;
  VecEstimate unit;

  [[nodiscard]] Vec operator()(const Vec& x) const {
    Vec out(spec.dim);
    for (int i = 0; i < spec.dim; ++i) out[i] = spec.amplitude[static_cast<std::size_t>(i)].value(x[i]) * unit.value[i];
    return out;
  }
};

template <dynsys::ZExtensionBase B>
HField h_field(const PerturbationSpec& spec, const B& base, std::size_t N, long cells, std::uint64_t seed,
               unsigned jobs = 1) {
  const auto unit = unit_amplitude(spec);
  return {spec, estimate_h(unit, base, Vec::Zero(spec.dim), N, cells, seed, jobs)};
}

}  // namespace zext::stats
