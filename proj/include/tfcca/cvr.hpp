#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tfcca/cca.hpp"
#include "tfcca/parallel.hpp"

namespace tfcca {

struct CvrOptions {
  double tol = 1e-6;
  int max_iter = 500;
};

struct CvrResult {
  Eigen::MatrixXd weights_1;  // r1 x d, on centered C1
  Eigen::MatrixXd weights_2;  // r2 x d
  Eigen::RowVectorXd center_1;
  Eigen::RowVectorXd center_2;
  double alpha = 0.0;
  Eigen::VectorXd beta;
  double eta = 0.0;
  std::vector<double> objective_trace;
  bool converged = false;

  /// Variates C_k W_k for new rows of group k (1 or 2).
  Eigen::MatrixXd variates(int group, const Eigen::MatrixXd& C) const {
    return group == 1 ? Eigen::MatrixXd((C.rowwise() - center_1) * weights_1)
                      : Eigen::MatrixXd((C.rowwise() - center_2) * weights_2);
  }

  /// Linear predictor averaged over both groups: alpha + mean_k(C_k W_k) beta.
  Eigen::VectorXd predict(const Eigen::MatrixXd& C1, const Eigen::MatrixXd& C2) const {
    const Eigen::VectorXd z = 0.5 * (variates(1, C1) + variates(2, C2)) * beta;
    return (z.array() + alpha).matrix();
  }
};

namespace detail {

struct CvrBlock {
  Eigen::MatrixXd Q;  // orthonormal basis of the centered columns
  Eigen::MatrixXd R;  // X = Q R
};

inline CvrBlock cvr_block(const Eigen::MatrixXd& X, const char* name) {
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!(X.col(j).squaredNorm() > 0.0)) {
      throw_invalid("degenerate_coefficients", std::string(name) + " has a zero-variance column");
    }
  }
  CvrBlock b;
  b.R = whitening_factor(X, 0.0, b.Q, name);
  return b;
}

/// Polar factor U V^T of M (nearest matrix with orthonormal columns).
inline Eigen::MatrixXd polar_factor(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

inline double cvr_objective(const Eigen::MatrixXd& Z1, const Eigen::MatrixXd& Z2, const Eigen::VectorXd& y,
                            double alpha, const Eigen::VectorXd& beta, double eta) {
  const double fit = (Z1 - Z2).squaredNorm();
  const double l1 = ((y.array() - alpha).matrix() - Z1 * beta).squaredNorm();
  const double l2 = ((y.array() - alpha).matrix() - Z2 * beta).squaredNorm();
  return eta * fit + (1.0 - eta) * (l1 + l2);
}

}  // namespace detail

/// Canonical variate regression
///   min eta |C1 W1 - C2 W2|_F^2 + (1-eta) sum_k |y - alpha - C_k W_k beta|^2
///   s.t. W_k^T C_k^T C_k W_k = I_d
/// on column-centered C_k, by exact block-coordinate descent: each W_k step is
/// an orthogonal Procrustes problem in the column space of C_k, and
/// (alpha, beta) is ordinary least squares on the stacked variates. Starts from
/// the top-d CCA solution.
inline CvrResult cvr_fit(const Eigen::MatrixXd& C1, const Eigen::MatrixXd& C2, const Eigen::VectorXd& y, int d,
                         double eta, const CvrOptions& opts = {}) {
  if (C1.rows() != C2.rows() || C1.rows() != y.size()) {
    throw_invalid("row_mismatch", "C1, C2 and y must have the same number of rows");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw_invalid("eta", "eta must lie in [0,1]");
  const Eigen::Index rmin = std::min(C1.cols(), C2.cols());
  if (d < 1 || d > rmin) {
    throw_invalid("infeasible_d", "number of variates d = " + std::to_string(d) + " must lie in [1, " +
                                      std::to_string(rmin) + "]");
  }
  detail::require_finite(y, "y");

  const CcaResult init = cca(C1, C2);
  CvrResult out;
  out.eta = eta;
  const Eigen::MatrixXd X1 = C1.rowwise() - init.center_1;
  const Eigen::MatrixXd X2 = C2.rowwise() - init.center_2;
  out.center_1 = init.center_1;
  out.center_2 = init.center_2;
  const auto b1 = detail::cvr_block(X1, "C1");
  const auto b2 = detail::cvr_block(X2, "C2");

  // Z_k = Q_k A_k with A_k^T A_k = I.
  Eigen::MatrixXd A1 = b1.R * init.weights_1.leftCols(d) / std::sqrt(static_cast<double>(C1.rows() - 1));
  Eigen::MatrixXd A2 = b2.R * init.weights_2.leftCols(d) / std::sqrt(static_cast<double>(C1.rows() - 1));
  A1 = detail::polar_factor(A1);
  A2 = detail::polar_factor(A2);

  const double ybar = y.mean();
  auto fit_regression = [&](const Eigen::MatrixXd& Z1, const Eigen::MatrixXd& Z2, double& alpha,
                            Eigen::VectorXd& beta) {
    // Stacked OLS of [y; y] on [1 Z1; 1 Z2]; Z_k are centered so alpha = mean(y).
    const Eigen::MatrixXd G = Z1.transpose() * Z1 + Z2.transpose() * Z2;
    const Eigen::VectorXd rhs = (Z1 + Z2).transpose() * (y.array() - ybar).matrix();
    beta = G.ldlt().solve(rhs);
    alpha = ybar;
  };

  Eigen::MatrixXd Z1 = b1.Q * A1, Z2 = b2.Q * A2;
  fit_regression(Z1, Z2, out.alpha, out.beta);
  double obj = detail::cvr_objective(Z1, Z2, y, out.alpha, out.beta, eta);
  out.objective_trace.push_back(obj);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    A1 = detail::polar_factor(eta * b1.Q.transpose() * Z2 + (1.0 - eta) * b1.Q.transpose() * (y.array() - out.alpha).matrix() * out.beta.transpose());
    Z1 = b1.Q * A1;
    A2 = detail::polar_factor(eta * b2.Q.transpose() * Z1 + (1.0 - eta) * b2.Q.transpose() * (y.array() - out.alpha).matrix() * out.beta.transpose());
    Z2 = b2.Q * A2;
    fit_regression(Z1, Z2, out.alpha, out.beta);
    const double next = detail::cvr_objective(Z1, Z2, y, out.alpha, out.beta, eta);
    out.objective_trace.push_back(next);
    const double change = obj - next;
    obj = next;
    if (change <= opts.tol * std::max(1.0, std::abs(obj))) {
      out.converged = true;
      break;
    }
  }

  // The objective is invariant under W_k -> W_k O, beta -> O^T beta. Pick O
  // diagonalizing the symmetric part of Z1^T Z2 so column pairs are canonical.
  const Eigen::MatrixXd M = Z1.transpose() * Z2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  const Eigen::MatrixXd O = es.eigenvectors().rowwise().reverse();
  A1 = A1 * O;
  A2 = A2 * O;
  out.beta = O.transpose() * out.beta;
  out.weights_1 = b1.R.triangularView<Eigen::Upper>().solve(A1);
  out.weights_2 = b2.R.triangularView<Eigen::Upper>().solve(A2);
  for (int j = 0; j < d; ++j) {
    Eigen::Index imax = 0;
    out.weights_1.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.weights_1(imax, j) < 0.0) {
      out.weights_1.col(j) *= -1.0;
      out.weights_2.col(j) *= -1.0;
      out.beta(j) *= -1.0;
    }
  }
  return out;
}

/// Fraction of comparable pairs (t_i < t_j) with risk_i > risk_j; risk ties count 1/2.
inline double concordance_index(std::span<const double> risk, std::span<const double> time) {
  if (risk.size() != time.size()) throw_invalid("length_mismatch", "risk and time must have equal length");
  double concordant = 0.0;
  long long comparable = 0;
  const std::size_t n = risk.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(time[i] < time[j])) continue;
      ++comparable;
      if (risk[i] > risk[j]) {
        concordant += 1.0;
      } else if (risk[i] == risk[j]) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0) throw_invalid("no_comparable_pairs", "all survival times are equal");
  return concordant / static_cast<double>(comparable);
}

struct CvTrace {
  std::vector<double> eta_grid;
  std::vector<double> mse;  // per-eta held-out MSE averaged over repeats
  double chosen_eta = 0.0;
};

struct CvRepeat {
  std::vector<int> test_rows;
  std::vector<double> mse_per_eta;
  double chosen_eta = 0.0;
  double mse = 0.0;      // at chosen_eta
  double c_index = 0.0;  // at chosen_eta, risk = -prediction
  Eigen::VectorXd predictions;
};

struct CvrCrossValidation {
  CvTrace trace;
  std::vector<CvRepeat> repeats;
  double mse_mean = 0.0, mse_sd = 0.0;
  double c_index_mean = 0.0, c_index_sd = 0.0;
};

namespace detail {

inline int argmin_prefer_larger(const std::vector<double>& values, const std::vector<double>& eta) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] < values[best] || (values[i] == values[best] && eta[i] > eta[best])) best = i;
  }
  return best;
}

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace detail

/// Repeated random train/test splits; per repeat, fits every eta on the
/// training rows and keeps the one with the smallest held-out MSE (ties go to
/// the larger eta). Repeat k draws its split from an RNG seeded with (seed, k).
inline CvrCrossValidation cvr_cross_validate(const Eigen::MatrixXd& C1, const Eigen::MatrixXd& C2,
                                             const Eigen::VectorXd& y, int d, const std::vector<double>& eta_grid,
                                             double train_fraction, int repeats, std::uint64_t seed,
                                             const CvrOptions& opts = {}) {
  const int n = static_cast<int>(y.size());
  if (eta_grid.empty()) throw_invalid("eta_grid", "eta grid is empty");
  if (repeats < 1) throw_invalid("repeats", "need at least one repeat");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw_invalid("split", "train fraction must lie in (0,1)");
  const int n_train = static_cast<int>(std::floor(train_fraction * n));
  if (n_train < 3 || n - n_train < 2) throw_invalid("split", "split leaves too few training or test rows");

  CvrCrossValidation out;
  out.repeats.resize(repeats);
  parallel_for(repeats, [&](int rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep)};
    std::mt19937_64 rng(seq);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<int> pick(0, i);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<int> train(idx.begin(), idx.begin() + n_train), test(idx.begin() + n_train, idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    const Eigen::MatrixXd tr1 = detail::take_rows(C1, train), tr2 = detail::take_rows(C2, train);
    const Eigen::MatrixXd te1 = detail::take_rows(C1, test), te2 = detail::take_rows(C2, test);
    Eigen::VectorXd ytr(n_train), yte(static_cast<Eigen::Index>(test.size()));
    for (int i = 0; i < n_train; ++i) ytr(i) = y(train[i]);
    for (std::size_t i = 0; i < test.size(); ++i) yte(static_cast<Eigen::Index>(i)) = y(test[i]);

    CvRepeat& r = out.repeats[rep];
    r.test_rows = test;
    std::vector<Eigen::VectorXd> preds;
    for (double eta : eta_grid) {
      const CvrResult fit = cvr_fit(tr1, tr2, ytr, d, eta, opts);
      preds.push_back(fit.predict(te1, te2));
      r.mse_per_eta.push_back((preds.back() - yte).squaredNorm() / static_cast<double>(yte.size()));
    }
    const int best = detail::argmin_prefer_larger(r.mse_per_eta, eta_grid);
    r.chosen_eta = eta_grid[best];
    r.mse = r.mse_per_eta[best];
    r.predictions = preds[best];
    const Eigen::VectorXd risk = -r.predictions;
    r.c_index = concordance_index(std::span<const double>(risk.data(), risk.size()),
                                  std::span<const double>(yte.data(), yte.size()));
  });

  out.trace.eta_grid = eta_grid;
  out.trace.mse.assign(eta_grid.size(), 0.0);
  std::vector<double> mses, cidx;
  for (const auto& r : out.repeats) {
    for (std::size_t e = 0; e < eta_grid.size(); ++e) out.trace.mse[e] += r.mse_per_eta[e] / repeats;
    mses.push_back(r.mse);
    cidx.push_back(r.c_index);
  }
  out.trace.chosen_eta = eta_grid[detail::argmin_prefer_larger(out.trace.mse, eta_grid)];
  std::tie(out.mse_mean, out.mse_sd) = detail::mean_sd(mses);
  std::tie(out.c_index_mean, out.c_index_sd) = detail::mean_sd(cidx);
  return out;
}

}  // namespace tfcca
