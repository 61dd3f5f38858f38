#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "tfcca/shape.hpp"

using namespace tfcca;

namespace {

constexpr double kPi = std::numbers::pi;

Curve circle(int n) {
  return Curve(DiscreteFunction::sample(
      Grid(n), [](double t) -> Eigen::Vector2d { return Eigen::Vector2d(std::cos(2 * kPi * t), std::sin(2 * kPi * t)) / (2 * kPi); },
      true));
}

Curve three_bumps(int n) {
  const std::vector<double> th{0.5 * kPi, 1.2 * kPi, 1.8 * kPi}, ka{20.0, 20.0, 20.0};
  return bump_curve(th, ka, 0.3, n);
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Srvf, CircleClosedForm) {
  const int n = 400;
  const Srvf q = srvf(circle(n));
  EXPECT_NEAR(norm(q.function()), 1.0, 1e-12);
  EXPECT_LT(q.closure_residual(), 1e-6);
  const Grid g(n);
  for (int k = 0; k < n; ++k) {
    EXPECT_NEAR(q.function()(k, 0), -std::sin(2 * kPi * g.point(k)), 1e-3);
    EXPECT_NEAR(q.function()(k, 1), std::cos(2 * kPi * g.point(k)), 1e-3);
  }
}

TEST(Srvf, TranslationAndScaleInvariant) {
  std::mt19937_64 rng(1);
  const Curve c = fixture::von_mises_contour(rng, 150);
  const Srvf q = srvf(c);
  const Curve moved(c.beta.with_values((c.beta.values().rowwise() + Eigen::RowVector2d(3.0, -7.5)).eval()));
  const Curve scaled(2.0 * c.beta);
  EXPECT_LT(max_abs(srvf(moved).function().values() - q.function().values()), 1e-10);
  EXPECT_LT(max_abs(srvf(scaled).function().values() - q.function().values()), 1e-10);
}

TEST(Srvf, DegenerateCurve) {
  const Curve point(DiscreteFunction::sample(Grid(20), [](double) { return Eigen::Vector2d(1, 2); }, true));
  try {
    srvf(point);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.reason(), "degenerate_curve");
  }
}

TEST(SrvfInverse, CircleRoundTrip) {
  const int n = 300;
  const Curve c = circle(n);
  const Curve back = srvf_inverse(srvf(c));
  // unit-norm SRVF means unit length; the circle has length 1 already.
  for (int k = 0; k < n; ++k) {
    EXPECT_NEAR(back.beta(k, 0), c.beta(k, 0), 1e-3);
    EXPECT_NEAR(back.beta(k, 1), c.beta(k, 1), 1e-3);
  }
}

TEST(SrvfInverse, FlagsClosureGap) {
  const SpherePoint open(DiscreteFunction::sample(Grid(100), [](double) { return Eigen::Vector2d(1.0, 0.0); }, true));
  try {
    srvf_inverse(open);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.reason(), "closure_gap");
  }
}

TEST(Preshape, ClosedInputIsFixedPoint) {
  const Srvf q = srvf(circle(200));
  const Srvf again = project_to_preshape(q.point());
  EXPECT_LT(max_abs(again.function().values() - q.function().values()), 1e-8);
}

TEST(Preshape, PerturbationIsRemovedMonotonically) {
  const Srvf q = srvf(circle(200));
  const auto bump = DiscreteFunction::sample(
      q.grid(), [](double t) { return Eigen::Vector2d(std::exp(-50 * (t - 0.3) * (t - 0.3)), 0.0); }, true);
  const SpherePoint perturbed(q.function() + 1e-3 * bump);
  ASSERT_GT(closure_residual(perturbed.function()), 1e-4);
  const auto trace = project_to_preshape_traced(perturbed);
  ASSERT_TRUE(trace.converged);
  EXPECT_LT(trace.residuals.back(), 1e-4);
  for (std::size_t k = 1; k < trace.residuals.size(); ++k) EXPECT_LT(trace.residuals[k], trace.residuals[k - 1]);
  EXPECT_NEAR(norm(trace.q.function()), 1.0, 1e-12);
}

TEST(Rotation, RecoversKnownRotation) {
  std::mt19937_64 rng(2);
  const Srvf q = srvf(fixture::von_mises_contour(rng, 120));
  EXPECT_LT(max_abs(optimal_rotation(q, q) - Eigen::Matrix2d::Identity()), 1e-12);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Matrix2d R = fixture::random_rotation(rng);
    const DiscreteFunction q2 = rotate(q.function(), R.transpose());
    const Eigen::Matrix2d O = optimal_rotation(q.function(), q2);
    EXPECT_LT(max_abs(O - R), 1e-8);
    EXPECT_NEAR(O.determinant(), 1.0, 1e-12);
  }
  // Reflection-favouring data still gets a proper rotation.
  const DiscreteFunction mirrored = q.function().with_values(q.function().values() * Eigen::Vector2d(1, -1).asDiagonal());
  EXPECT_NEAR(optimal_rotation(q.function(), mirrored).determinant(), 1.0, 1e-12);
}

TEST(Warp, SelfRegistrationIsIdentity) {
  std::mt19937_64 rng(3);
  const Srvf q = srvf(fixture::von_mises_contour(rng, 100));
  const auto w = optimal_warp(q, q);
  EXPECT_LT(w.cost, 1e-6);
  EXPECT_LT(max_abs(w.warp.values() - identity_warp(q.grid()).values()), 1e-12);
}

TEST(Warp, KnownWarpIsUndone) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 3; ++rep) {
    const Srvf q1 = srvf(fixture::von_mises_contour(rng, 100));
    const auto gamma = fixture::smooth_warp(rng, q1.grid());
    const DiscreteFunction q2 = apply_warp(q1.function(), gamma);
    const auto w = optimal_warp(q1.function(), q2);
    EXPECT_LT(w.cost, 1e-2);
    const double identity_cost = detail::squared_distance(q1.function(), q2);
    EXPECT_LE(w.cost, identity_cost);
    require_warp(w.warp);
  }
}

TEST(Register, RotationAndWarpAreRemoved) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 3; ++rep) {
    const Curve c = fixture::von_mises_contour(rng, 100);
    const Srvf q1 = srvf(c);
    const Srvf q2 = srvf(fixture::nuisance(c, fixture::random_rotation(rng), fixture::smooth_warp(rng, Grid(100))));
    EXPECT_LT(shape_distance(q1, q2), 0.05);
    const auto reg = register_curves(q1, q2);
    EXPECT_NEAR(reg.registration.rotation.determinant(), 1.0, 1e-10);
    EXPECT_LT(max_abs(reg.registration.rotation.transpose() * reg.registration.rotation - Eigen::Matrix2d::Identity()),
              1e-10);
    require_warp(reg.registration.warp);
    for (std::size_t k = 1; k < reg.round_costs.size(); ++k) EXPECT_LE(reg.round_costs[k], reg.round_costs[k - 1]);
    EXPECT_LE(reg.q2_star.closure_residual(), 1e-4);
  }
}

TEST(Register, SelfIsIdentity) {
  std::mt19937_64 rng(6);
  const Srvf q = srvf(fixture::von_mises_contour(rng, 100));
  const auto reg = register_curves(q, q);
  EXPECT_LT(max_abs(reg.registration.rotation - Eigen::Matrix2d::Identity()), 1e-10);
  EXPECT_LT(max_abs(reg.registration.warp.values() - identity_warp(q.grid()).values()), 1e-12);
  EXPECT_LT(reg.registration.cost, 1e-12);
}

TEST(ShapeDistance, SymmetricZeroAndSeparating) {
  const Srvf c = srvf(circle(100)), b = srvf(three_bumps(100));
  EXPECT_LT(shape_distance(c, c), 1e-6);
  EXPECT_EQ(shape_distance(c, b), shape_distance(b, c));
  const double d = shape_distance(c, b);
  EXPECT_GT(d, 0.1);
  EXPECT_NEAR(d, 0.2719, 1e-3);  // frozen value at grid 100 with default options
}

TEST(ShapeKarcher, EqualInputsReturnThatInput) {
  std::mt19937_64 rng(7);
  const Srvf q = srvf(fixture::von_mises_contour(rng, 80));
  const std::vector<Srvf> qs(4, q);
  const auto r = shape_karcher_mean(qs);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(shape_distance(r.mean, q), 1e-6);
}

TEST(ShapeKarcher, TwoCurvesAreEquidistantAndVarianceDecreases) {
  const Curve a = three_bumps(100);
  const std::vector<double> th{0.5 * kPi, 1.35 * kPi}, ka{20.0, 12.0};
  const Curve b = bump_curve(th, ka, 0.3, 100);
  const std::vector<Srvf> qs{srvf(a), srvf(b)};
  const auto r = shape_karcher_mean(qs);
  EXPECT_NEAR(shape_distance(r.mean, qs[0]), shape_distance(r.mean, qs[1]), 5e-2);
  for (std::size_t k = 1; k < r.variance_trace.size(); ++k) {
    EXPECT_LE(r.variance_trace[k], r.variance_trace[k - 1] + 1e-8);
  }
  EXPECT_LE(r.mean.closure_residual(), 1e-4);
}

TEST(ProjectPi, ZeroAtMeanAndOrthogonalToNormals) {
  std::mt19937_64 rng(8);
  const Srvf mean = srvf(fixture::von_mises_contour(rng, 100));
  EXPECT_LT(project_Pi(mean, mean).tangent.norm(), 1e-10);
  const auto phi = normal_basis(mean.point());
  for (int rep = 0; rep < 3; ++rep) {
    const auto p = project_Pi(srvf(fixture::von_mises_contour(rng, 100)), mean);
    const auto& v = p.tangent.function();
    EXPECT_LT(std::abs(inner_product(v, mean.function())), 1e-6);
    EXPECT_LT(std::abs(inner_product(v, phi[0])), 1e-6);
    EXPECT_LT(std::abs(inner_product(v, phi[1])), 1e-6);
  }
}

TEST(ProjectPi, ReconstructsConcentratedData) {
  std::mt19937_64 rng(9);
  const std::vector<double> th{0.5 * kPi, 1.25 * kPi}, ka{20.0, 20.0};
  const Srvf mean = srvf(bump_curve(th, ka, 0.3, 100));
  for (int rep = 0; rep < 3; ++rep) {
    const std::vector<double> th2{0.5 * kPi, 1.25 * kPi + std::normal_distribution<double>(0.0, 0.1)(rng)};
    const Srvf q = srvf(bump_curve(th2, ka, 0.3, 100));
    const auto p = project_Pi(q, mean);
    const Srvf back = project_to_preshape(exp_map(mean.point(), p.tangent));
    EXPECT_LT(geodesic_distance(back.point(), p.registered.point()), 0.05);
    // without step (iii) the log map reproduces the registered curve exactly
    const auto raw = project_Pi(q, mean, {}, false);
    EXPECT_LT(norm(exp_map(mean.point(), raw.tangent).function() - raw.registered.function()), 1e-8);
  }
}

TEST(VariateDirection, ClosedCurvesAlongTheGeodesic) {
  std::mt19937_64 rng(10);
  std::vector<Srvf> qs;
  const std::vector<double> ka{20.0, 20.0};
  for (int i = 0; i < 6; ++i) {
    const std::vector<double> th{0.5 * kPi, 1.25 * kPi + 0.1 * i};
    qs.push_back(srvf(bump_curve(th, ka, 0.3, 80)));
  }
  const Srvf mean = qs[2];
  std::vector<TangentVector> tangents;
  for (const auto& q : qs) tangents.push_back(project_Pi(q, mean).tangent);
  const FpcBasis basis = fit_fpca(tangents, RankRule::fixed(2));
  const std::vector<double> eps{-2, -1, 0, 1, 2};
  const Eigen::Vector2d w(0.3, 0.1);
  const auto curves = shape_variate_direction(mean, basis, w, eps);
  const Curve at_mean = srvf_inverse(mean);
  EXPECT_LT(max_abs(curves[2].beta.values() - at_mean.beta.values()), 1e-12);
  const TangentVector v(mean.point(), basis.combine(w));
  double last = -1.0;
  for (double e : {0.0, 1.0, 2.0}) {
    const double d = geodesic_distance(mean.point(), exp_map(mean.point(), e * v.function()));
    EXPECT_GT(d, last);
    last = d;
  }
  for (const auto& c : curves) {
    const auto& b = c.beta.values();
    EXPECT_EQ((b.row(0) - b.row(b.rows() - 1)).norm(), 0.0);
  }
}
