#pragma once

// Random contours and nuisance transforms shared by the shape tests.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "tfcca/shape.hpp"
#include "tfcca/simgen.hpp"

namespace fixture {

inline tfcca::Curve von_mises_contour(std::mt19937_64& g, int grid, int bumps = 3) {
  std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi), kappa(5.0, 25.0), amp(0.2, 0.5);
  std::vector<double> th(bumps), ka(bumps);
  for (int k = 0; k < bumps; ++k) {
    th[k] = angle(g);
    ka[k] = kappa(g);
  }
  return tfcca::bump_curve(th, ka, amp(g), grid);
}

inline Eigen::Matrix2d rotation(double a) {
  Eigen::Matrix2d O;
  O << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return O;
}

inline Eigen::Matrix2d random_rotation(std::mt19937_64& g) {
  return rotation(std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(g));
}

/// Smooth unwrapped circle warp t + offset + sum a_k sin(2 pi k t) / (2 pi k), slope >= 0.5.
inline tfcca::DiscreteFunction smooth_warp(std::mt19937_64& g, const tfcca::Grid& grid, bool shift = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[3];
  double total = 0.0;
  for (double& x : a) total += std::abs(x = u(g));
  for (double& x : a) x *= 0.5 / total;
  const double offset = shift ? std::uniform_real_distribution<double>(0.0, 1.0)(g) : 0.0;
  return tfcca::DiscreteFunction::sample(grid, [&](double t) {
    double v = t + offset;
    for (int k = 0; k < 3; ++k) v += a[k] * std::sin(2 * std::numbers::pi * (k + 1) * t) / (2 * std::numbers::pi * (k + 1));
    return v;
  });
}

/// t -> O beta(gamma(t)).
inline tfcca::Curve nuisance(const tfcca::Curve& c, const Eigen::Matrix2d& O, const tfcca::DiscreteFunction& gamma) {
  const auto moved = tfcca::compose_warp(c.beta, gamma);
  return tfcca::Curve(moved.with_values(moved.values() * O.transpose()));
}

}  // namespace fixture
