// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"
#include "zext/limitproc/brownian.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <vector>

namespace zext::limitproc {

using MatField = std::function<Mat(const Vec&)>;
using VecField = std::function<Vec(const Vec&)>;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kEigenClip = 1e-10;

/// Symmetric nonnegative square root. Eigenvalues below kEigenClip are set to 0.
inline Mat sqrtm_psd(const Mat& a) {
  if (a.rows() != a.cols()) throw NonSymmetricVariance("sqrtm_psd: matrix is not square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw NonSymmetricVariance("sqrtm_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  Vec ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev[i] = ev[i] < kEigenClip ? 0.0 : std::sqrt(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// V_t = int_0^t sqrt(a~(W_s)) dB_{L~_s}: Stieltjes sum over the grid with
/// d independent standard Brownian motions `B` queried at the times L~_s.
/// Steps where L~ does not move contribute nothing. If `B_at_L` is given it
/// receives B(L~_s) on the grid.
inline std::vector<Vec> time_changed_integral(const MatField& atilde, const std::vector<Vec>& W,
                                              std::vector<BrownianBridgeSampler>& B, const std::vector<double>& Ltilde,
                                              std::vector<Vec>* B_at_L = nullptr) {
  if (W.size() != Ltilde.size()) throw GridMismatch("time_changed_integral: paths differ in length");
  const int d = W.empty() ? 0 : static_cast<int>(W.front().size());
  if (static_cast<int>(B.size()) != d) throw Error("time_changed_integral: need one Brownian motion per component");
  std::vector<Vec> V(W.size(), Vec::Zero(d));
  Vec prev_b(d);
  for (int i = 0; i < d; ++i) prev_b[i] = B[static_cast<std::size_t>(i)](Ltilde.empty() ? 0.0 : Ltilde[0]);
  if (B_at_L) B_at_L->assign(W.size(), prev_b);
  for (std::size_t k = 1; k < W.size(); ++k) {
    V[k] = V[k - 1];
    if (Ltilde[k] < Ltilde[k - 1]) throw Error("time_changed_integral: time change must be nondecreasing");
    if (Ltilde[k] != Ltilde[k - 1]) {
      Vec b(d);
      for (int i = 0; i < d; ++i) b[i] = B[static_cast<std::size_t>(i)](Ltilde[k]);
      V[k] += sqrtm_psd(atilde(W[k - 1])) * (b - prev_b);
      prev_b = b;
    }
    if (B_at_L) (*B_at_L)[k] = prev_b;
  }
  return V;
}

/// V~_t = int_0^t h(W_s) dL~_s, left-point Stieltjes sum.
inline std::vector<Vec> drift_integral(const VecField& h, const std::vector<Vec>& W, const std::vector<double>& Ltilde) {
  if (W.size() != Ltilde.size()) throw GridMismatch("drift_integral: paths differ in length");
  const int d = W.empty() ? 0 : static_cast<int>(W.front().size());
  std::vector<Vec> V(W.size(), Vec::Zero(d));
  for (std::size_t k = 1; k < W.size(); ++k) {
    const double dl = Ltilde[k] - Ltilde[k - 1];
    V[k] = dl == 0.0 ? V[k - 1] : Vec(V[k - 1] + h(W[k - 1]) * dl);
  }
  return V;
}

inline Mat expm(const Mat& a) {
  if (a.isDiagonal()) {
    Mat e = Mat::Zero(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) e(i, i) = std::exp(a(i, i));
    return e;
  }
  Eigen::MatrixXd dyn = a;
  Eigen::MatrixXd ex = dyn.exp();
  return ex;
}

/// Y_t = V_t + int_0^t Phi(t, s) A_s V_s ds with A_s = D fbar(W_s) and Phi the
/// propagator of y' = A_s y. With I_t the integral term,
/// I_{k+1} = E_k I_k + (dt/2) (E_k A_k V_k + A_{k+1} V_{k+1}),  E_k = exp((A_k + A_{k+1}) dt / 2),
/// which is the trapezoidal rule on each step. When the A_s commute, Phi(t, s)
/// is exp(int_s^t A_u du).
inline std::vector<Vec> variation_of_constants(const std::vector<Vec>& V, const std::vector<Vec>& W,
                                               const MatField& dfbar, const std::vector<double>& grid) {
  if (V.size() != W.size() || V.size() != grid.size()) throw GridMismatch("variation_of_constants: length mismatch");
  if (V.empty()) return {};
  const int d = static_cast<int>(V.front().size());
  std::vector<Vec> Y(V.size());
  Vec I = Vec::Zero(d);
  Mat A = dfbar(W[0]);
  Y[0] = V[0];
  for (std::size_t k = 0; k + 1 < V.size(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    const Mat A1 = dfbar(W[k + 1]);
    const Mat E = expm(Mat(0.5 * (A + A1) * dt));
    I = E * I + (0.5 * dt) * (E * (A * V[k]) + A1 * V[k + 1]);
    Y[k + 1] = V[k + 1] + I;
    A = A1;
  }
  return Y;
}

/// Forward Euler for dY = A(W) Y dt + dV, Y_0 = V_0.
inline std::vector<Vec> euler_resolve(const std::vector<Vec>& V, const std::vector<Vec>& W, const MatField& dfbar,
                                      const std::vector<double>& grid) {
  if (V.size() != W.size() || V.size() != grid.size()) throw GridMismatch("euler_resolve: length mismatch");
  if (V.empty()) return {};
  std::vector<Vec> Y(V.size());
  Y[0] = V[0];
  for (std::size_t k = 0; k + 1 < V.size(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    Y[k + 1] = Y[k] + dfbar(W[k]) * Y[k] * dt + (V[k + 1] - V[k]);
  }
  return Y;
}

/// sup_k |Y_k - Y^E_k|.
inline double euler_residual(const std::vector<Vec>& Y, const std::vector<Vec>& V, const std::vector<Vec>& W,
                             const MatField& dfbar, const std::vector<double>& grid) {
  const auto ye = euler_resolve(V, W, dfbar, grid);
  double m = 0.0;
  for (std::size_t k = 0; k < Y.size(); ++k) m = std::max(m, (Y[k] - ye[k]).norm());
  return m;
}

}  // namespace zext::limitproc
