// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <type_traits>

namespace zext {

/// 8-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 15.
struct GaussLegendre8 {
  static constexpr std::array<double, 8> nodes{
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
      0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> weights{
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
      0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

  /// Integral of g over [a, b]. g may return any type supporting + and scalar *.
  template <class G>
  static auto integrate(G&& g, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    using R = std::decay_t<decltype(g(mid))>;
    R acc = g(mid + half * nodes[0]) * weights[0];
    for (std::size_t i = 1; i < nodes.size(); ++i) acc = acc + g(mid + half * nodes[i]) * weights[i];
    return R(acc * half);
  }
};

}  // namespace zext
