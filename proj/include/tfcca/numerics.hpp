#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "tfcca/error.hpp"

namespace tfcca {

/// Uniform grid on [0,1] with points t_k = k/(n-1).
class Grid {
 public:
  explicit Grid(int n_points) : n_(n_points) {
    if (n_points < 3) {
      throw_invalid("grid_size", "grid needs at least 3 points, got " + std::to_string(n_points));
    }
  }

  int size() const noexcept { return n_; }
  double spacing() const noexcept { return 1.0 / (n_ - 1); }
  double point(int k) const noexcept { return static_cast<double>(k) / (n_ - 1); }
  Eigen::VectorXd points() const { return Eigen::VectorXd::LinSpaced(n_, 0.0, 1.0); }

  friend bool operator==(const Grid& a, const Grid& b) noexcept { return a.n_ == b.n_; }
  friend bool operator!=(const Grid& a, const Grid& b) noexcept { return a.n_ != b.n_; }

 private:
  int n_;
};

/// Trapezoid quadrature weights for a grid.
inline Eigen::VectorXd trapezoid_weights(const Grid& grid) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(grid.size(), grid.spacing());
  w(0) *= 0.5;
  w(grid.size() - 1) *= 0.5;
  return w;
}

/// A scalar- or plane-valued function sampled on a uniform grid over [0,1].
///
/// Values are stored as an n x d matrix (d = 1 or 2). Periodic functions live
/// on the circle: the last sample is identified with the first and is kept
/// equal to it on construction.
class DiscreteFunction {
 public:
  DiscreteFunction() : grid_(3), values_(Eigen::MatrixXd::Zero(3, 1)) {}

  DiscreteFunction(Grid grid, Eigen::MatrixXd values, bool periodic = false)
      : grid_(grid), values_(std::move(values)), periodic_(periodic) {
    if (values_.rows() != grid_.size()) {
      throw_invalid("grid_mismatch", "function has " + std::to_string(values_.rows()) +
                                         " samples but grid has " + std::to_string(grid_.size()));
    }
    if (values_.cols() != 1 && values_.cols() != 2) {
      throw_invalid("dimension", "function values must be scalar or planar");
    }
    if (!values_.allFinite()) {
      throw_invalid("non_finite", "function contains non-finite values");
    }
    if (periodic_) {
      values_.row(grid_.size() - 1) = values_.row(0);
    }
  }

  static DiscreteFunction scalar(const Eigen::VectorXd& v, bool periodic = false) {
    return DiscreteFunction(Grid(static_cast<int>(v.size())), Eigen::MatrixXd(v), periodic);
  }

  /// Samples `fn(t)` on `grid`; `fn` returns double (scalar) or Eigen::Vector2d (planar).
  template <class Fn>
  static DiscreteFunction sample(const Grid& grid, Fn&& fn, bool periodic = false) {
    using R = decltype(fn(0.0));
    // An Eigen expression returned by value can reference temporaries that die with the call.
    static_assert(std::is_arithmetic_v<R> || std::is_same_v<std::decay_t<R>, Eigen::Vector2d>,
                  "sample() needs fn to return double or Eigen::Vector2d");
    constexpr int kDim = std::is_arithmetic_v<R> ? 1 : 2;
    Eigen::MatrixXd v(grid.size(), kDim);
    for (int k = 0; k < grid.size(); ++k) {
      if constexpr (kDim == 1) {
        v(k, 0) = fn(grid.point(k));
      } else {
        v.row(k) = fn(grid.point(k)).transpose();
      }
    }
    return DiscreteFunction(grid, std::move(v), periodic);
  }

  const Grid& grid() const noexcept { return grid_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  int size() const noexcept { return grid_.size(); }
  int dim() const noexcept { return static_cast<int>(values_.cols()); }
  bool periodic() const noexcept { return periodic_; }
  bool planar() const noexcept { return dim() == 2; }

  double operator()(int k, int c = 0) const { return values_(k, c); }

  /// Samples stacked column-wise (x coordinates then y coordinates).
  Eigen::VectorXd stacked() const {
    return Eigen::Map<const Eigen::VectorXd>(values_.data(), values_.size());
  }

  /// Inverse of stacked() for a function shaped like `like`.
  static DiscreteFunction from_stacked(const Eigen::VectorXd& v, const DiscreteFunction& like) {
    Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(v.data(), like.size(), like.dim());
    return DiscreteFunction(like.grid(), std::move(m), like.periodic());
  }

  DiscreteFunction with_values(Eigen::MatrixXd v) const {
    return DiscreteFunction(grid_, std::move(v), periodic_);
  }

  DiscreteFunction& operator+=(const DiscreteFunction& o) {
    require_compatible(o);
    values_ += o.values_;
    return *this;
  }
  DiscreteFunction& operator-=(const DiscreteFunction& o) {
    require_compatible(o);
    values_ -= o.values_;
    return *this;
  }
  DiscreteFunction& operator*=(double s) {
    values_ *= s;
    return *this;
  }

  friend DiscreteFunction operator+(DiscreteFunction a, const DiscreteFunction& b) { return a += b; }
  friend DiscreteFunction operator-(DiscreteFunction a, const DiscreteFunction& b) { return a -= b; }
  friend DiscreteFunction operator*(double s, DiscreteFunction a) { return a *= s; }
  friend DiscreteFunction operator*(DiscreteFunction a, double s) { return a *= s; }
  friend DiscreteFunction operator-(DiscreteFunction a) { return a *= -1.0; }

  void require_compatible(const DiscreteFunction& o) const {
    if (grid_ != o.grid_ || dim() != o.dim()) {
      throw_invalid("grid_mismatch", "functions do not share grid and dimension");
    }
  }

 private:
  Grid grid_;
  Eigen::MatrixXd values_;
  bool periodic_ = false;
};

/// Trapezoidal L2 inner product; planar functions use the pointwise dot product.
inline double inner_product(const DiscreteFunction& a, const DiscreteFunction& b) {
  a.require_compatible(b);
  const Eigen::VectorXd pointwise = (a.values().array() * b.values().array()).rowwise().sum();
  return trapezoid_weights(a.grid()).dot(pointwise);
}

inline double norm(const DiscreteFunction& a) { return std::sqrt(inner_product(a, a)); }

/// Trapezoidal integral of each component; returns a d-vector.
inline Eigen::VectorXd integrate(const DiscreteFunction& a) {
  return a.values().transpose() * trapezoid_weights(a.grid());
}

/// Central differences; periodic wrap at the seam, one-sided at open endpoints.
inline DiscreteFunction derivative(const DiscreteFunction& a) {
  const int n = a.size();
  const double h = a.grid().spacing();
  const Eigen::MatrixXd& v = a.values();
  Eigen::MatrixXd d(n, a.dim());
  for (int k = 1; k < n - 1; ++k) d.row(k) = (v.row(k + 1) - v.row(k - 1)) / (2.0 * h);
  if (a.periodic()) {
    d.row(0) = (v.row(1) - v.row(n - 2)) / (2.0 * h);
    d.row(n - 1) = d.row(0);
  } else {
    d.row(0) = (v.row(1) - v.row(0)) / h;
    d.row(n - 1) = (v.row(n - 1) - v.row(n - 2)) / h;
  }
  return a.with_values(std::move(d));
}

/// Linear interpolation of `a` at parameter `t`. Periodic functions wrap t
/// modulo 1; open functions clamp t into [0,1].
inline Eigen::RowVectorXd interpolate(const DiscreteFunction& a, double t) {
  const int n = a.size();
  double x;
  if (a.periodic()) {
    x = (t - std::floor(t)) * (n - 1);
  } else {
    x = std::clamp(t, 0.0, 1.0) * (n - 1);
  }
  int k = static_cast<int>(std::floor(x));
  if (k >= n - 1) k = n - 2;
  if (k < 0) k = 0;
  const double frac = x - k;
  return (1.0 - frac) * a.values().row(k) + frac * a.values().row(k + 1);
}

inline DiscreteFunction resample(const DiscreteFunction& a, const Grid& new_grid) {
  Eigen::MatrixXd v(new_grid.size(), a.dim());
  for (int k = 0; k < new_grid.size(); ++k) v.row(k) = interpolate(a, new_grid.point(k));
  return DiscreteFunction(new_grid, std::move(v), a.periodic());
}

/// Throws unless `gamma` is nondecreasing (within `slack`) and spans one period
/// (periodic) or [0,1] (open).
inline void require_warp(const DiscreteFunction& gamma, double slack = 1e-9) {
  const Eigen::VectorXd g = gamma.values().col(0);
  for (int k = 1; k < g.size(); ++k) {
    if (g(k) < g(k - 1) - slack) {
      throw_invalid("non_monotone_warp", "warping function decreases at sample " + std::to_string(k));
    }
  }
  const double span = g(g.size() - 1) - g(0);
  if (std::abs(span - 1.0) > 1e-6) {
    throw_invalid("warp_span", "warping function must span exactly one period");
  }
}

/// Evaluates a(gamma(t)) by interpolation. Warps are stored unwrapped and
/// non-periodic (gamma(1) = gamma(0) + 1) so a seed offset can be carried.
inline DiscreteFunction compose_warp(const DiscreteFunction& a, const DiscreteFunction& gamma) {
  if (gamma.size() != a.size() || gamma.dim() != 1) {
    throw_invalid("grid_mismatch", "warp must be scalar on the function's grid");
  }
  require_warp(gamma);
  Eigen::MatrixXd v(a.size(), a.dim());
  for (int k = 0; k < a.size(); ++k) v.row(k) = interpolate(a, gamma(k));
  return a.with_values(std::move(v));
}

/// Identity warp gamma(t) = t.
inline DiscreteFunction identity_warp(const Grid& grid) {
  return DiscreteFunction(grid, Eigen::MatrixXd(grid.points()), false);
}

/// Derivative of an unwrapped warp. For circle maps the seam is handled by
/// differentiating the periodic part gamma(t) - t.
inline Eigen::VectorXd warp_derivative(const DiscreteFunction& gamma, bool circular) {
  if (!circular) return derivative(gamma).values().col(0);
  Eigen::VectorXd periodic_part = gamma.values().col(0) - gamma.grid().points();
  periodic_part(periodic_part.size() - 1) = periodic_part(0);
  const DiscreteFunction p(gamma.grid(), Eigen::MatrixXd(periodic_part), true);
  return (derivative(p).values().col(0).array() + 1.0).matrix();
}

/// Composition gamma1 o gamma2 of unwrapped circle warps.
inline DiscreteFunction compose_circle_warps(const DiscreteFunction& gamma1, const DiscreteFunction& gamma2) {
  const int n = gamma1.size();
  Eigen::VectorXd out(n);
  for (int k = 0; k < n; ++k) {
    const double s = gamma2(k);
    const double turns = std::floor(s);
    // gamma1(s + m) = gamma1(s) + m for integer m.
    double x = (s - turns) * (n - 1);
    int j = std::min(static_cast<int>(std::floor(x)), n - 2);
    const double frac = x - j;
    out(k) = (1.0 - frac) * gamma1(j) + frac * gamma1(j + 1) + turns;
  }
  return DiscreteFunction(gamma1.grid(), Eigen::MatrixXd(out), false);
}

}  // namespace tfcca
