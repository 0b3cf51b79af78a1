// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace zext::geometry {

/// Plain 2D vector over a floating scalar (double or a multiprecision type).
template <class Real>
struct Vec2 {
  Real x{0};
  Real y{0};

  friend Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(const Real& s, const Vec2& a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(const Vec2& a, const Real& s) { return {s * a.x, s * a.y}; }
  friend Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
};

template <class Real>
Real dot(const Vec2<Real>& a, const Vec2<Real>& b) {
  return a.x * b.x + a.y * b.y;
}

template <class Real>
Real norm(const Vec2<Real>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

/// Specular reflection v' = v - 2<v,n>n across the unit normal n.
template <class Real>
Vec2<Real> reflect(const Vec2<Real>& v, const Vec2<Real>& n) {
  const Real two_vn = 2 * dot(v, n);
  return {v.x - two_vn * n.x, v.y - two_vn * n.y};
}

}  // namespace zext::geometry
