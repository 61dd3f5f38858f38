#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tfcca/numerics.hpp"

namespace tfcca {

/// Unit-norm function on the Hilbert sphere (SRT or SRVF representative).
class SpherePoint {
 public:
  SpherePoint() = default;

  /// Renormalizes `f` to unit L2 norm.
  explicit SpherePoint(const DiscreteFunction& f) : f_(f) {
    const double n = norm(f_);
    if (!(n > 0.0)) throw_invalid("zero_norm", "cannot place the zero function on the sphere");
    f_ *= 1.0 / n;
  }

  const DiscreteFunction& function() const noexcept { return f_; }
  const Grid& grid() const noexcept { return f_.grid(); }
  const Eigen::MatrixXd& values() const noexcept { return f_.values(); }

  SpherePoint negated() const { return SpherePoint(-f_); }

 private:
  DiscreteFunction f_;
};

/// Tangent vector v at `base`: <<v, base>> = 0.
class TangentVector {
 public:
  TangentVector() = default;

  /// `v` is projected onto the tangent space at `base`.
  TangentVector(SpherePoint base, const DiscreteFunction& v) : base_(std::move(base)), v_(v) {
    v_ -= inner_product(v_, base_.function()) * base_.function();
  }

  static TangentVector zero(const SpherePoint& base) {
    return TangentVector(base, 0.0 * base.function());
  }

  const SpherePoint& base() const noexcept { return base_; }
  const DiscreteFunction& function() const noexcept { return v_; }
  double norm() const { return tfcca::norm(v_); }

 private:
  SpherePoint base_;
  DiscreteFunction v_;
};

inline double clamped_cosine(const SpherePoint& p1, const SpherePoint& p2) {
  return std::clamp(inner_product(p1.function(), p2.function()), -1.0, 1.0);
}

/// Great-circle distance arccos <<p1, p2>>, in [0, pi].
inline double geodesic_distance(const SpherePoint& p1, const SpherePoint& p2) {
  return std::acos(clamped_cosine(p1, p2));
}

inline SpherePoint exp_map(const SpherePoint& base, const DiscreteFunction& v) {
  const double len = norm(v);
  if (len < 1e-12) return base;
  return SpherePoint(std::cos(len) * base.function() + (std::sin(len) / len) * v);
}

inline SpherePoint exp_map(const SpherePoint& base, const TangentVector& v) {
  return exp_map(base, v.function());
}

inline constexpr double kAntipodeMargin = 1e-6;

inline TangentVector log_map(const SpherePoint& base, const SpherePoint& target) {
  const double c = clamped_cosine(base, target);
  const double d = std::acos(c);
  if (d >= std::numbers::pi - kAntipodeMargin) {
    throw_numerical("antipode", "inverse exponential map undefined at the antipode");
  }
  if (d < 1e-12) return TangentVector::zero(base);
  return TangentVector(base, (d / std::sin(d)) * (target.function() - c * base.function()));
}

/// Transport of `v` (tangent at `from`) along the minimal geodesic to `to`.
///
/// Equivalent to v - (<<log_from(to) + log_to(from), v>> / d^2) log_from(to)
/// but written in the form that stays finite as d -> 0:
///   v - <<to, v>> / (1 + <<from, to>>) (from + to).
inline TangentVector parallel_transport(const TangentVector& v, const SpherePoint& from, const SpherePoint& to) {
  const double c = clamped_cosine(from, to);
  if (std::acos(c) >= std::numbers::pi - kAntipodeMargin) {
    throw_numerical("antipode", "parallel transport undefined between antipodal points");
  }
  const double coeff = inner_product(to.function(), v.function()) / (1.0 + c);
  DiscreteFunction out = v.function() - coeff * (from.function() + to.function());
  return TangentVector(to, out);
}

struct KarcherOptions {
  double step = 0.5;
  double tol = 1e-6;
  int max_iter = 100;
};

struct KarcherMeanResult {
  SpherePoint mean;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  bool converged = false;
  /// Variance functional (1/n) sum d(mean, p_i)^2 at each visited iterate.
  std::vector<double> variance_trace;
};

inline double sphere_variance(const SpherePoint& p, std::span<const SpherePoint> points) {
  double acc = 0.0;
  for (const auto& q : points) {
    const double d = geodesic_distance(p, q);
    acc += d * d;
  }
  return acc / static_cast<double>(points.size());
}

/// Intrinsic mean by gradient descent, started from the renormalized extrinsic mean.
inline KarcherMeanResult karcher_mean(std::span<const SpherePoint> points, const KarcherOptions& opts = {}) {
  if (points.empty()) throw_invalid("empty_sample", "Karcher mean of an empty sample");
  DiscreteFunction sum = points[0].function();
  for (std::size_t i = 1; i < points.size(); ++i) sum += points[i].function();

  KarcherMeanResult result;
  result.mean = SpherePoint(sum);
  result.variance_trace.push_back(sphere_variance(result.mean, points));

  const double inv_n = 1.0 / static_cast<double>(points.size());
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    DiscreteFunction grad = 0.0 * result.mean.function();
    for (const auto& p : points) grad += log_map(result.mean, p).function();
    grad *= inv_n;
    result.final_gradient_norm = norm(grad);
    result.iterations = iter;
    if (result.final_gradient_norm <= opts.tol) {
      result.converged = true;
      return result;
    }
    result.mean = exp_map(result.mean, opts.step * grad);
    result.variance_trace.push_back(sphere_variance(result.mean, points));
  }
  result.iterations = opts.max_iter;
  DiscreteFunction grad = 0.0 * result.mean.function();
  for (const auto& p : points) grad += log_map(result.mean, p).function();
  result.final_gradient_norm = norm(grad) * inv_n;
  result.converged = result.final_gradient_norm <= opts.tol;
  return result;
}

}  // namespace tfcca
