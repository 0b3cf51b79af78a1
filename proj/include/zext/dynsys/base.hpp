// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/core/rng.hpp"

#include <concepts>
#include <string>

namespace zext::dynsys {

/// What an observable may know about the base point of the current fiber.
struct FiberContext {
  int phi = 0;         ///< step function: cell increment at the next roof crossing
  double tau = 1.0;    ///< roof value
  double coord = 0.0;  ///< a scalar base coordinate in [0, 1)
};

/// A probability-preserving base map with a centered integer step function and a
/// roof bounded away from 0 and infinity. Together these define a suspension
/// flow over the Z-extension (w, m) -> (step(w), m + phi(w)).
template <class B>
concept ZExtensionBase = requires(const B& b, const typename B::point_type& w, Stream& rng) {
  { b.step(w) } -> std::same_as<typename B::point_type>;
  { b.phi(w) } -> std::convertible_to<int>;
  { b.roof(w) } -> std::convertible_to<double>;
  { b.coordinate(w) } -> std::convertible_to<double>;
  { b.sample(rng) } -> std::same_as<typename B::point_type>;
  { b.roof_inf() } -> std::convertible_to<double>;
  { b.roof_sup() } -> std::convertible_to<double>;
  { b.name() } -> std::convertible_to<std::string>;
};

template <ZExtensionBase B>
FiberContext fiber_context(const B& base, const typename B::point_type& w) {
  return {base.phi(w), base.roof(w), base.coordinate(w)};
}

}  // namespace zext::dynsys
