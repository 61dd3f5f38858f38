#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "tfcca/sphere.hpp"

namespace tfcca {

/// How many principal components to keep.
struct RankRule {
  enum class Kind { kFixed, kExplained };
  Kind kind = Kind::kExplained;
  int rank = 0;
  double threshold = 0.95;

  static RankRule fixed(int r) { return {Kind::kFixed, r, 0.0}; }
  static RankRule explained(double fraction) { return {Kind::kExplained, 0, fraction}; }
};

/// Tangent-space eigenbasis at a base point.
struct FpcBasis {
  SpherePoint base;
  std::vector<DiscreteFunction> eigenfunctions;  // retained, orthonormal
  Eigen::VectorXd eigenvalues;                   // full nonincreasing spectrum
  int rank = 0;
  double explained_fraction = 0.0;

  double total_variance() const { return eigenvalues.sum(); }

  /// Tangent vector sum_i e_i w_i.
  DiscreteFunction combine(const Eigen::VectorXd& weights) const {
    if (weights.size() != rank) {
      throw_invalid("weight_length", "weight vector length " + std::to_string(weights.size()) +
                                         " does not match basis rank " + std::to_string(rank));
    }
    DiscreteFunction v = 0.0 * base.function();
    for (int i = 0; i < rank; ++i) v += weights(i) * eigenfunctions[i];
    return v;
  }
};

/// n x r coefficient matrix with a note on which basis/mode produced it.
struct CoeffMatrix {
  Eigen::MatrixXd values;
  std::string provenance;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

namespace detail {

// FPCA treats samples as plain vectors with unit weights scaled by the grid
// spacing. Periodic functions drop their duplicated seam sample, which makes
// this inner product coincide with the trapezoid rule on curves.
inline int fpca_sample_count(const DiscreteFunction& f) { return f.periodic() ? f.size() - 1 : f.size(); }

inline Eigen::VectorXd fpca_vector(const DiscreteFunction& f) {
  const int m = fpca_sample_count(f);
  Eigen::VectorXd out(m * f.dim());
  for (int c = 0; c < f.dim(); ++c) out.segment(c * m, m) = f.values().col(c).head(m);
  return out * std::sqrt(f.grid().spacing());
}

inline DiscreteFunction from_fpca_vector(const Eigen::VectorXd& v, const DiscreteFunction& like) {
  const int m = fpca_sample_count(like);
  Eigen::MatrixXd vals(like.size(), like.dim());
  const double scale = 1.0 / std::sqrt(like.grid().spacing());
  for (int c = 0; c < like.dim(); ++c) {
    vals.col(c).head(m) = v.segment(c * m, m) * scale;
    if (like.periodic()) vals(like.size() - 1, c) = vals(0, c);
  }
  return like.with_values(std::move(vals));
}

}  // namespace detail

/// Inner product used by FPCA (unit weights times grid spacing).
inline double fpca_inner(const DiscreteFunction& a, const DiscreteFunction& b) {
  return detail::fpca_vector(a).dot(detail::fpca_vector(b));
}

/// Tangent FPCA: eigen-decomposition of (1/(n-1)) sum_i d_i d_i^T on the
/// stacked sample vectors. Uses the n x n Gram (dual) problem when n is
/// smaller than the vector length.
inline FpcBasis fit_fpca(std::span<const TangentVector> tangents, const RankRule& rule) {
  const int n = static_cast<int>(tangents.size());
  if (n < 2) throw_invalid("sample_size", "FPCA needs at least 2 tangent vectors");
  const SpherePoint& base = tangents[0].base();
  const DiscreteFunction& like = base.function();
  const int m = static_cast<int>(detail::fpca_vector(like).size());

  Eigen::MatrixXd Y(n, m);
  for (int i = 0; i < n; ++i) {
    tangents[i].function().require_compatible(like);
    Y.row(i) = detail::fpca_vector(tangents[i].function()).transpose();
  }
  const double denom = static_cast<double>(n - 1);

  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;  // m x k, columns unit Euclidean norm
  if (n < m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((Y * Y.transpose()) / denom);
    const Eigen::VectorXd lam = es.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::MatrixXd a = es.eigenvectors().rowwise().reverse();
    evals = lam;
    evecs.resize(m, n);
    for (int j = 0; j < n; ++j) {
      if (lam(j) > 0.0) {
        evecs.col(j) = Y.transpose() * a.col(j) / std::sqrt(denom * lam(j));
      } else {
        evecs.col(j).setZero();
      }
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((Y.transpose() * Y) / denom);
    evals = es.eigenvalues().reverse().cwiseMax(0.0);
    evecs = es.eigenvectors().rowwise().reverse();
  }

  const double total = evals.sum();
  int rank = 0;
  if (rule.kind == RankRule::Kind::kFixed) {
    rank = rule.rank;
    if (rank < 1 || rank > n - 1) {
      throw_invalid("rank_infeasible", "rank " + std::to_string(rank) + " outside [1, n-1] for n = " +
                                           std::to_string(n));
    }
  } else {
    if (!(rule.threshold > 0.0 && rule.threshold <= 1.0)) {
      throw_invalid("rank_infeasible", "explained-variance threshold must lie in (0,1]");
    }
    double acc = 0.0;
    for (rank = 0; rank < n - 1;) {
      acc += evals(rank);
      ++rank;
      if (total <= 0.0 || acc / total >= rule.threshold - 1e-12) break;
    }
  }
  const double floor = 1e-14 * std::max(evals(0), 1e-300);
  for (int j = 0; j < rank; ++j) {
    if (!(evals(j) > floor)) {
      throw_invalid("rank_deficient", "requested rank " + std::to_string(rank) + " exceeds the rank of the data");
    }
  }

  FpcBasis basis;
  basis.base = base;
  basis.eigenvalues = evals;
  basis.rank = rank;
  basis.explained_fraction = total > 0.0 ? evals.head(rank).sum() / total : 1.0;
  for (int j = 0; j < rank; ++j) {
    Eigen::VectorXd u = evecs.col(j);
    Eigen::Index imax = 0;
    u.cwiseAbs().maxCoeff(&imax);
    if (u(imax) < 0.0) u = -u;
    basis.eigenfunctions.push_back(detail::from_fpca_vector(u, like));
  }
  return basis;
}

/// Coefficients c_ij = <e_j, d_i> in the FPCA inner product.
inline CoeffMatrix coefficients(const FpcBasis& basis, std::span<const TangentVector> tangents,
                                std::string provenance = {}) {
  CoeffMatrix out;
  out.values.resize(static_cast<Eigen::Index>(tangents.size()), basis.rank);
  std::vector<Eigen::VectorXd> evecs;
  for (const auto& e : basis.eigenfunctions) evecs.push_back(detail::fpca_vector(e));
  for (std::size_t i = 0; i < tangents.size(); ++i) {
    const Eigen::VectorXd d = detail::fpca_vector(tangents[i].function());
    for (int j = 0; j < basis.rank; ++j) out.values(static_cast<Eigen::Index>(i), j) = evecs[j].dot(d);
  }
  out.provenance = std::move(provenance);
  return out;
}

}  // namespace tfcca
