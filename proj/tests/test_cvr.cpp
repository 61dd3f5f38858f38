#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "tfcca/cvr.hpp"

using namespace tfcca;

namespace {

struct Problem {
  Eigen::MatrixXd C1, C2;
  Eigen::VectorXd y;
};

Problem make_problem(std::uint64_t seed, int n = 80, int r1 = 4, int r2 = 3, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  Problem p;
  const Eigen::MatrixXd z = oracle::random_matrix(rng, n, 2);
  p.C1 = oracle::random_matrix(rng, n, r1);
  p.C2 = oracle::random_matrix(rng, n, r2);
  p.C1.leftCols(2) += 1.5 * z;
  p.C2.leftCols(2) += z;
  p.y = 2.0 * z.col(0) + noise * oracle::random_matrix(rng, n, 1);
  return p;
}

double constraint_residual(const Eigen::MatrixXd& C, const Eigen::RowVectorXd& center, const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd X = C.rowwise() - center;
  const Eigen::MatrixXd G = W.transpose() * X.transpose() * X * W;
  return (G - Eigen::MatrixXd::Identity(W.cols(), W.cols())).norm();
}

}  // namespace

TEST(Cvr, EtaOneReducesToCca) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto p = make_problem(s);
    const auto cc = cca(p.C1, p.C2);
    for (int d = 1; d <= 3; ++d) {
      const auto fit = cvr_fit(p.C1, p.C2, p.y, d, 1.0);
      const Eigen::MatrixXd Z1 = fit.variates(1, p.C1), Z2 = fit.variates(2, p.C2);
      for (int j = 0; j < d; ++j) EXPECT_NEAR(oracle::pearson(Z1.col(j), Z2.col(j)), cc.correlations(j), 1e-3);
    }
  }
}

TEST(Cvr, EtaZeroRegressionIsOls) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto p = make_problem(s);
    const auto fit = cvr_fit(p.C1, p.C2, p.y, 2, 0.0);
    // (alpha, beta) must be the OLS fit of [y; y] on the stacked variates.
    const Eigen::MatrixXd Z1 = fit.variates(1, p.C1), Z2 = fit.variates(2, p.C2);
    Eigen::MatrixXd Z(2 * Z1.rows(), Z1.cols());
    Z << Z1, Z2;
    Eigen::VectorXd yy(2 * p.y.size());
    yy << p.y, p.y;
    const auto [alpha, beta] = oracle::ols(Z, yy);
    EXPECT_NEAR(fit.alpha, alpha, 1e-8);
    EXPECT_LT((fit.beta - beta).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Cvr, ZeroResponseGivesZeroRegression) {
  const auto p = make_problem(7);
  const auto fit = cvr_fit(p.C1, p.C2, Eigen::VectorXd::Zero(p.y.size()), 2, 0.5);
  EXPECT_NEAR(fit.alpha, 0.0, 1e-8);
  EXPECT_LT(fit.beta.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Cvr, ObjectiveMonotoneAndConstraintsHold) {
  for (std::uint64_t s = 1; s <= 6; ++s) {
    const auto p = make_problem(s, 60 + 10 * static_cast<int>(s));
    for (double eta : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      for (int d = 1; d <= 2; ++d) {
        const auto fit = cvr_fit(p.C1, p.C2, p.y, d, eta);
        EXPECT_TRUE(fit.converged);
        for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
          EXPECT_LE(fit.objective_trace[k], fit.objective_trace[k - 1] + 1e-8);
        }
        EXPECT_LE(constraint_residual(p.C1, fit.center_1, fit.weights_1), 1e-4);
        EXPECT_LE(constraint_residual(p.C2, fit.center_2, fit.weights_2), 1e-4);
      }
    }
  }
}

TEST(Cvr, Errors) {
  const auto p = make_problem(8);
  try {
    cvr_fit(p.C1, p.C2, p.y, 4, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  EXPECT_THROW(cvr_fit(p.C1, p.C2, p.y, 1, 1.5), Error);
  Eigen::MatrixXd flat = p.C1;
  flat.col(1).setConstant(2.0);
  EXPECT_THROW(cvr_fit(flat, p.C2, p.y, 1, 0.5), Error);
}

TEST(ConcordanceIndex, PerfectTiesAndRandom) {
  std::vector<double> time{1, 2, 3, 4, 5, 6};
  std::vector<double> risk{6, 5, 4, 3, 2, 1};
  EXPECT_EQ(concordance_index(risk, time), 1.0);
  std::vector<double> flat(6, 0.3);
  EXPECT_EQ(concordance_index(flat, time), 0.5);
  std::reverse(risk.begin(), risk.end());
  EXPECT_EQ(concordance_index(risk, time), 0.0);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  std::vector<double> t(10000), r(10000);
  for (auto& x : t) x = z(rng);
  for (auto& x : r) x = z(rng);
  EXPECT_NEAR(concordance_index(r, t), 0.5, 0.02);
}

TEST(ConcordanceIndex, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z;
  std::vector<double> t(300), r(300), r2(300);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = z(rng);
    r[i] = -t[i] + z(rng);
    r2[i] = std::exp(3.0 * r[i]) + 7.0;
  }
  EXPECT_EQ(concordance_index(r, t), concordance_index(r2, t));
}

TEST(CrossValidation, DeterministicAndThreadIndependent) {
  const auto p = make_problem(11);
  const std::vector<double> etas{0.0, 0.5, 1.0};
  set_thread_count(1);
  const auto a = cvr_cross_validate(p.C1, p.C2, p.y, 1, etas, 0.8, 12, 42);
  set_thread_count(4);
  const auto b = cvr_cross_validate(p.C1, p.C2, p.y, 1, etas, 0.8, 12, 42);
  set_thread_count(0);
  EXPECT_EQ(a.mse_mean, b.mse_mean);
  EXPECT_EQ(a.c_index_mean, b.c_index_mean);
  EXPECT_EQ(a.trace.mse, b.trace.mse);
  for (std::size_t k = 0; k < a.repeats.size(); ++k) EXPECT_EQ(a.repeats[k].test_rows, b.repeats[k].test_rows);
  const auto c = cvr_cross_validate(p.C1, p.C2, p.y, 1, etas, 0.8, 12, 43);
  EXPECT_NE(a.mse_mean, c.mse_mean);
}

TEST(CrossValidation, ExactLinearSignalIsRecovered) {
  std::mt19937_64 rng(12);
  const int n = 100;
  const Eigen::MatrixXd z = oracle::random_matrix(rng, n, 1);
  Eigen::MatrixXd C1 = oracle::random_matrix(rng, n, 3), C2 = oracle::random_matrix(rng, n, 3);
  C1.col(0) = z;
  C2.col(1) = z;
  const Eigen::VectorXd y = (3.0 * z).array() + 1.0;
  const std::vector<double> etas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const auto cv = cvr_cross_validate(C1, C2, y, 1, etas, 0.8, 20, 5);
  EXPECT_LT(*std::min_element(cv.trace.mse.begin(), cv.trace.mse.end()), 1e-6);
  EXPECT_LT(cv.mse_mean, 1e-4);
  EXPECT_EQ(cv.trace.mse[static_cast<std::size_t>(
                std::min_element(cv.trace.mse.begin(), cv.trace.mse.end()) - cv.trace.mse.begin())],
            *std::min_element(cv.trace.mse.begin(), cv.trace.mse.end()));
  EXPECT_NEAR(cv.c_index_mean, 1.0, 1e-12);
}

TEST(CrossValidation, TiesPreferLargerEta) {
  const auto p = make_problem(13);
  const auto cv = cvr_cross_validate(p.C1, p.C2, p.y, 1, {0.5, 0.5}, 0.8, 3, 1);
  EXPECT_EQ(cv.trace.chosen_eta, 0.5);
  const std::vector<double> mse{1.0, 0.5, 0.5}, eta{0.0, 0.3, 0.6};
  EXPECT_EQ(detail::argmin_prefer_larger(mse, eta), 2);
}

TEST(CrossValidation, BadArguments) {
  const auto p = make_problem(14);
  EXPECT_THROW(cvr_cross_validate(p.C1, p.C2, p.y, 1, {}, 0.8, 3, 1), Error);
  EXPECT_THROW(cvr_cross_validate(p.C1, p.C2, p.y, 1, {0.5}, 1.0, 3, 1), Error);
  EXPECT_THROW(cvr_cross_validate(p.C1, p.C2, p.y, 1, {0.5}, 0.8, 0, 1), Error);
}
