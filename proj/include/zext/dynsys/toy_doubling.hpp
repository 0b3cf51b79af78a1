// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/types.hpp"
#include "zext/dynsys/base.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace zext::dynsys {

/// Point of the doubling map, x = 0.b1 b2 b3 ... in binary.
///
/// `bits` holds the next 64 binary digits. The digits beyond them are drawn
/// on demand from the counter-based stream `key` at position `pos`, so the
/// whole forward orbit is a deterministic function of the point.
struct ToyPoint {
  std::uint64_t bits = 0;
  std::uint64_t key = 0;
  std::uint64_t pos = 0;

  friend bool operator==(const ToyPoint&, const ToyPoint&) = default;
};

/// Doubling map base with step +1 on [0, 1/2), -1 on [1/2, 1) and roof
/// scale * (1 + alpha sin(2 pi x)). Under Lebesgue measure the digits are iid
/// fair bits, so S_n phi is a simple symmetric random walk and Sigma = 1.
class ToyDoublingBase {
 public:
  using point_type = ToyPoint;

  explicit ToyDoublingBase(double alpha = 0.0, double roof_scale = 1.0) : alpha_(alpha), scale_(roof_scale) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("toy model: alpha must lie in [0, 1)");
    if (!(roof_scale > 0.0)) throw ConfigError("toy model: roof scale must be positive");
  }

  [[nodiscard]] double alpha() const { return alpha_; }

  static double value(const ToyPoint& w) { return static_cast<double>(w.bits >> 11) * 0x1.0p-53; }

  static std::uint64_t tail_bit(std::uint64_t key, std::uint64_t pos) {
    return (counter_word(key, pos >> 6) >> (pos & 63U)) & 1U;
  }

  [[nodiscard]] ToyPoint step(const ToyPoint& w) const {
    return {(w.bits << 1) | tail_bit(w.key, w.pos), w.key, w.pos + 1};
  }
  [[nodiscard]] int phi(const ToyPoint& w) const { return (w.bits >> 63) == 0 ? 1 : -1; }
  [[nodiscard]] double roof(const ToyPoint& w) const {
    return scale_ * (1.0 + alpha_ * std::sin(2.0 * std::numbers::pi * value(w)));
  }
  [[nodiscard]] double coordinate(const ToyPoint& w) const { return value(w); }
  [[nodiscard]] ToyPoint sample(Stream& rng) const { return {rng.bits(), rng.bits(), 0}; }
  [[nodiscard]] double roof_inf() const { return scale_ * (1.0 - alpha_); }
  [[nodiscard]] double roof_sup() const { return scale_ * (1.0 + alpha_); }
  /// Mean roof under Lebesgue measure; the sine integrates to zero.
  [[nodiscard]] double roof_mean() const { return scale_; }
  [[nodiscard]] std::string name() const { return "toy"; }

  /// Point with leading digits taken from x in [0, 1) and tail stream `key`.
  static ToyPoint at(double x, std::uint64_t key = 0) {
    const auto top = static_cast<std::uint64_t>(x * 0x1.0p53);
    return {top << 11, key, 0};
  }

 private:
  double alpha_;
  double scale_;
};

}  // namespace zext::dynsys
