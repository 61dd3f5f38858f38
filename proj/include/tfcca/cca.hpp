#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "tfcca/error.hpp"

namespace tfcca {

struct CcaResult {
  Eigen::VectorXd correlations;  // nonincreasing, in [0,1]
  Eigen::MatrixXd weights_1;     // r1 x m
  Eigen::MatrixXd weights_2;     // r2 x m
  Eigen::MatrixXd variates_1;    // n x m, unit sample variance
  Eigen::MatrixXd variates_2;
  Eigen::RowVectorXd center_1;   // column means removed before fitting
  Eigen::RowVectorXd center_2;
  double regularization_used = 0.0;
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) throw_invalid("non_finite", std::string(name) + " contains NaN or infinite entries");
}

inline Eigen::MatrixXd center_columns(const Eigen::MatrixXd& m, Eigen::RowVectorXd& mean) {
  mean = m.colwise().mean();
  return m.rowwise() - mean;
}

/// Whitening factor R with R^T R = X^T X + ridge I, from QR of [X; sqrt(ridge) I].
/// Returns the orthonormal-ish basis Q = X R^{-1} in `q`.
inline Eigen::MatrixXd whitening_factor(const Eigen::MatrixXd& X, double ridge, Eigen::MatrixXd& q,
                                        const char* name) {
  const Eigen::Index n = X.rows(), r = X.cols();
  Eigen::MatrixXd R;
  if (ridge > 0.0) {
    Eigen::MatrixXd aug(n + r, r);
    aug << X, std::sqrt(ridge) * Eigen::MatrixXd::Identity(r, r);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(aug);
    R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    q = R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(X);
  } else {
    if (n <= r) {
      throw_invalid("rank_deficient", std::string(name) + " has n <= r; set a positive ridge");
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  }
  const Eigen::VectorXd diag = R.diagonal().cwiseAbs();
  const double mx = diag.maxCoeff(), mn = diag.minCoeff();
  if (ridge == 0.0 && !(mn > 1e-10 * mx)) {
    throw_invalid("rank_deficient", std::string(name) + " is rank deficient (R condition > 1e10); set a positive ridge");
  }
  return R;
}

}  // namespace detail

/// Classical CCA via thin QR of the centered matrices and an SVD of Q1^T Q2.
inline CcaResult cca(const Eigen::MatrixXd& C1, const Eigen::MatrixXd& C2, double ridge = 0.0) {
  if (C1.rows() != C2.rows()) throw_invalid("row_mismatch", "coefficient matrices need equal row counts");
  if (C1.rows() < 3) throw_invalid("sample_size", "CCA needs at least 3 samples");
  if (ridge < 0.0) throw_invalid("ridge", "ridge must be nonnegative");
  detail::require_finite(C1, "C1");
  detail::require_finite(C2, "C2");

  CcaResult out;
  out.regularization_used = ridge;
  const Eigen::MatrixXd X1 = detail::center_columns(C1, out.center_1);
  const Eigen::MatrixXd X2 = detail::center_columns(C2, out.center_2);
  Eigen::MatrixXd Q1, Q2;
  const Eigen::MatrixXd R1 = detail::whitening_factor(X1, ridge, Q1, "C1");
  const Eigen::MatrixXd R2 = detail::whitening_factor(X2, ridge, Q2, "C2");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q1.transpose() * Q2, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index m = std::min(C1.cols(), C2.cols());
  Eigen::MatrixXd U = svd.matrixU().leftCols(m);
  Eigen::MatrixXd V = svd.matrixV().leftCols(m);
  out.correlations = svd.singularValues().head(m).cwiseMin(1.0).cwiseMax(0.0);

  const double scale = std::sqrt(static_cast<double>(C1.rows() - 1));
  out.weights_1 = R1.triangularView<Eigen::Upper>().solve(U) * scale;
  out.weights_2 = R2.triangularView<Eigen::Upper>().solve(V) * scale;
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index imax = 0;
    out.weights_1.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.weights_1(imax, j) < 0.0) {
      out.weights_1.col(j) *= -1.0;
      out.weights_2.col(j) *= -1.0;
    }
  }
  out.variates_1 = X1 * out.weights_1;
  out.variates_2 = X2 * out.weights_2;
  return out;
}

}  // namespace tfcca
