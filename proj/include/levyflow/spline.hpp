#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "levyflow/autodiff.hpp"

namespace levyflow {

inline constexpr double kMinBinWidth = 1e-3;
inline constexpr double kMinBinHeight = 1e-3;
inline constexpr double kMinDerivative = 1e-3;

/// Unconstrained parameters of one monotone rational-quadratic spline on
/// [-bound, bound].  Outside that interval the transform is the identity.
struct SplineLayer {
  std::vector<double> raw_widths;   // K
  std::vector<double> raw_heights;  // K
  std::vector<double> raw_derivs;   // K - 1 interior knots
  double bound = 5.0;

  static SplineLayer identity(int bins, double bound);

  int bins() const noexcept { return static_cast<int>(raw_widths.size()); }
  std::size_t num_parameters() const noexcept { return 3 * raw_widths.size() - 1; }
  /// Throws std::invalid_argument when the shape invariants do not hold.
  void validate() const;
};

/// Knot positions and derivatives after constraint mapping.
template <class T>
struct BasicKnotGrid {
  std::vector<T> xs;  // K + 1, xs.front() == -bound, xs.back() == bound
  std::vector<T> ys;  // K + 1
  std::vector<T> ds;  // K + 1, ds.front() == ds.back() == 1
  double bound = 5.0;

  int bins() const noexcept { return static_cast<int>(xs.size()) - 1; }
};

using KnotGrid = BasicKnotGrid<double>;

template <class T>
struct SplineResult {
  T value;
  T logdet;
};

namespace spline_detail {

inline double constant_like(double, double v) { return v; }
inline ad::Var constant_like(const ad::Var& ref, double v) { return ref.tape()->variable(v); }

// Softmax with a floor, rescaled to span 2 * bound, accumulated from -bound.
template <class T>
std::vector<T> knots_from_raw(std::span<const T> raw, double min_fraction, double bound) {
  using std::exp;
  using ad::exp;
  const std::size_t k = raw.size();
  double peak = ad::value_of(raw[0]);
  for (const T& r : raw) peak = std::max(peak, ad::value_of(r));
  std::vector<T> e;
  e.reserve(k);
  for (const T& r : raw) e.push_back(exp(r - peak));
  T total = e[0];
  for (std::size_t i = 1; i < k; ++i) total = total + e[i];
  const double scale = 1.0 - min_fraction * static_cast<double>(k);
  std::vector<T> knots;
  knots.reserve(k + 1);
  knots.push_back(constant_like(raw[0], -bound));
  T cum = constant_like(raw[0], 0.0);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    cum = cum + (min_fraction + scale * (e[i] / total));
    knots.push_back(2.0 * bound * cum - bound);
  }
  knots.push_back(constant_like(raw[0], bound));
  return knots;
}

// Index k with xs[k] <= v < xs[k+1]; a point on a knot belongs to the right bin.
template <class T>
int find_bin(const std::vector<T>& knots, double v) {
  const auto it =
      std::upper_bound(knots.begin(), knots.end(), v, [](double a, const T& b) { return a < ad::value_of(b); });
  const int k = static_cast<int>(it - knots.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(knots.size()) - 2);
}

template <class T>
T forward_logdet(const T& s, const T& d0, const T& d1, const T& xi, const T& den) {
  using std::log;
  using ad::log;
  const T om = 1.0 - xi;
  const T dnum = s * s * (d1 * xi * xi + 2.0 * s * xi * om + d0 * om * om);
  return log(dnum) - 2.0 * log(den);
}

}  // namespace spline_detail

/// Maps unconstrained layer parameters to a valid knot grid.  All-zero raw
/// parameters give uniform bins with unit derivatives, i.e. the identity.
template <class T>
BasicKnotGrid<T> constrain(std::span<const T> raw_widths, std::span<const T> raw_heights,
                           std::span<const T> raw_derivs, double bound) {
  const std::size_t k = raw_widths.size();
  if (k < 2 || raw_heights.size() != k || raw_derivs.size() + 1 != k || !(bound > 0.0)) {
    throw std::invalid_argument("constrain: inconsistent spline layer shape");
  }
  BasicKnotGrid<T> g;
  g.bound = bound;
  g.xs = spline_detail::knots_from_raw<T>(raw_widths, kMinBinWidth, bound);
  g.ys = spline_detail::knots_from_raw<T>(raw_heights, kMinBinHeight, bound);
  // softplus(shift) == 1 - kMinDerivative, so a raw value of 0 maps to 1.
  const double shift = std::log(std::expm1(1.0 - kMinDerivative));
  g.ds.reserve(k + 1);
  g.ds.push_back(spline_detail::constant_like(raw_widths[0], 1.0));
  for (const T& r : raw_derivs) {
    using ad::softplus;
    g.ds.push_back(kMinDerivative + softplus(r + shift));
  }
  g.ds.push_back(spline_detail::constant_like(raw_widths[0], 1.0));
  return g;
}

KnotGrid constrain(const SplineLayer& layer);

/// y = f(x) and ln f'(x).  Exactly (x, 0) for |x| >= bound.
template <class T>
SplineResult<T> rqs_forward(const BasicKnotGrid<T>& g, const T& x) {
  const double xv = ad::value_of(x);
  if (xv <= -g.bound || xv >= g.bound) return {x, spline_detail::constant_like(x, 0.0)};
  const int k = spline_detail::find_bin(g.xs, xv);
  const T w = g.xs[k + 1] - g.xs[k];
  const T h = g.ys[k + 1] - g.ys[k];
  const T s = h / w;
  const T& d0 = g.ds[k];
  const T& d1 = g.ds[k + 1];
  const T xi = (x - g.xs[k]) / w;
  const T t = xi * (1.0 - xi);
  const T den = s + (d1 + d0 - 2.0 * s) * t;
  const T y = g.ys[k] + h * (s * xi * xi + d0 * t) / den;
  return {y, spline_detail::forward_logdet(s, d0, d1, xi, den)};
}

/// x = f^{-1}(y) and ln (f^{-1})'(y) = -ln f'(x).  Exactly (y, 0) for |y| >= bound.
template <class T>
SplineResult<T> rqs_inverse(const BasicKnotGrid<T>& g, const T& y) {
  using std::sqrt;
  using ad::sqrt;
  const double yv = ad::value_of(y);
  if (yv <= -g.bound || yv >= g.bound) return {y, spline_detail::constant_like(y, 0.0)};
  const int k = spline_detail::find_bin(g.ys, yv);
  const T w = g.xs[k + 1] - g.xs[k];
  const T h = g.ys[k + 1] - g.ys[k];
  const T s = h / w;
  const T& d0 = g.ds[k];
  const T& d1 = g.ds[k + 1];
  const T dy = y - g.ys[k];
  const T c2 = d1 + d0 - 2.0 * s;
  const T a = h * (s - d0) + dy * c2;
  const T b = h * d0 - dy * c2;
  const T c = -s * dy;
  T disc = b * b - 4.0 * a * c;
  if (ad::value_of(disc) < 0.0) disc = spline_detail::constant_like(disc, 0.0);
  // Rationalized root: avoids cancellation when a -> 0.
  const T xi = 2.0 * c / (-b - sqrt(disc));
  const T x = xi * w + g.xs[k];
  const T t = xi * (1.0 - xi);
  const T den = s + c2 * t;
  const T logdet = spline_detail::forward_logdet(s, d0, d1, xi, den);
  return {x, -logdet};
}

}  // namespace levyflow
