#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "tfcca/fpca.hpp"
#include "tfcca/parallel.hpp"
#include "tfcca/sphere.hpp"

namespace tfcca {

/// Closed planar curve sampled on the circle.
struct Curve {
  DiscreteFunction beta;

  explicit Curve(DiscreteFunction b) : beta(std::move(b)) {
    if (!beta.planar() || !beta.periodic()) throw_invalid("curve_domain", "a curve is a planar periodic function");
  }
};

/// SRVF on the pre-shape space: unit norm and closed.
class Srvf {
 public:
  Srvf() = default;
  const SpherePoint& point() const noexcept { return q_; }
  const DiscreteFunction& function() const noexcept { return q_.function(); }
  const Grid& grid() const noexcept { return q_.grid(); }
  /// Max-abs component of the closure integral at construction.
  double closure_residual() const noexcept { return residual_; }

 private:
  friend struct SrvfAccess;
  SpherePoint q_;
  double residual_ = 0.0;
};

struct SrvfAccess {
  static Srvf make(SpherePoint q, double residual) {
    Srvf s;
    s.q_ = std::move(q);
    s.residual_ = residual;
    return s;
  }
};

struct ShapeOptions {
  int dp_grid = 0;  // 0: use the curve grid size
  int seeds = 0;    // 0: grid size / 10
  int rounds = 2;
  int prescreen = 2;  // seeds kept for DP after ranking by the unwarped cost; 0 keeps all
  int refine_modes = 12;  // Fourier modes for the smooth warp polish after DP; 0 skips it
  int refine_iter = 40;
  double closure_tol = 1e-4;
  int projection_max_iter = 50;

  int effective_dp_grid(const Grid& g) const { return dp_grid > 0 ? dp_grid : g.size(); }
  int effective_seeds(const Grid& g) const { return seeds > 0 ? seeds : std::max(1, g.size() / 10); }
};

namespace detail {

inline double seed_offset(int s, int seeds, int n) {
  return static_cast<double>((s * (n - 1)) / seeds) / (n - 1);
}

/// Seed indices ordered by cost(s), truncated to `keep` (0 keeps all).
template <class Cost>
std::vector<int> ranked_seeds(int seeds, int keep, Cost&& cost) {
  std::vector<int> idx(static_cast<std::size_t>(seeds));
  std::vector<double> c(static_cast<std::size_t>(seeds));
  for (int s = 0; s < seeds; ++s) {
    idx[s] = s;
    c[s] = cost(s);
  }
  if (keep <= 0 || keep >= seeds) return idx;
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return c[x] < c[y]; });
  idx.resize(static_cast<std::size_t>(keep));
  return idx;
}

}  // namespace detail

/// Closure integral  int q(t)|q(t)| dt.
inline Eigen::Vector2d closure_integral(const DiscreteFunction& q) {
  const Eigen::VectorXd speed = q.values().rowwise().norm();
  const DiscreteFunction qq = q.with_values(q.values().array().colwise() * speed.array());
  return integrate(qq);
}

inline double closure_residual(const DiscreteFunction& q) { return closure_integral(q).cwiseAbs().maxCoeff(); }

/// Gradients of the two closure constraints:  |q| e_j + q_j q / |q|.
inline std::array<DiscreteFunction, 2> closure_gradients(const DiscreteFunction& q) {
  const int n = q.size();
  std::array<Eigen::MatrixXd, 2> g{Eigen::MatrixXd(n, 2), Eigen::MatrixXd(n, 2)};
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector2d v = q.values().row(k).transpose();
    const double s = v.norm();
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d grad = Eigen::Vector2d::Zero();
      grad(j) = s;
      if (s > 0.0) grad += v(j) * v / s;
      g[j].row(k) = grad.transpose();
    }
  }
  return {q.with_values(std::move(g[0])), q.with_values(std::move(g[1]))};
}

struct PreshapeProjection {
  SpherePoint q;
  std::vector<double> residuals;  // residual before each Newton step and at exit
  bool converged = false;
};

/// Newton iteration onto the closure set, renormalizing after every step.
inline PreshapeProjection project_to_preshape_traced(const SpherePoint& q0, double tol = 1e-4, int max_iter = 50) {
  if (!q0.function().planar()) throw_invalid("srvf_domain", "SRVF must be planar");
  PreshapeProjection out{q0, {}, false};
  for (int iter = 0; iter <= max_iter; ++iter) {
    const Eigen::Vector2d G = closure_integral(out.q.function());
    const double res = G.cwiseAbs().maxCoeff();
    out.residuals.push_back(res);
    if (res <= tol) {
      out.converged = true;
      return out;
    }
    if (iter == max_iter) break;
    const auto grads = closure_gradients(out.q.function());
    Eigen::Matrix2d J;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) J(i, j) = inner_product(grads[i], grads[j]);
    const Eigen::Vector2d x = J.ldlt().solve(-G);
    DiscreteFunction next = out.q.function() + x(0) * grads[0] + x(1) * grads[1];
    out.q = SpherePoint(next);
  }
  return out;
}

inline Srvf project_to_preshape(const SpherePoint& q, double tol = 1e-4, int max_iter = 50) {
  auto proj = project_to_preshape_traced(q, tol, max_iter);
  if (!proj.converged) {
    throw_numerical("closure_projection", "projection onto closed curves did not converge (residual " +
                                              std::to_string(proj.residuals.back()) + ")");
  }
  return SrvfAccess::make(std::move(proj.q), proj.residuals.back());
}

/// q = beta' / sqrt|beta'|, scaled to unit norm and projected to the closure set.
inline Srvf srvf(const Curve& c, double closure_tol = 1e-4) {
  const DiscreteFunction d = derivative(c.beta);
  Eigen::MatrixXd q = d.values();
  for (int k = 0; k < q.rows(); ++k) {
    const double s = q.row(k).norm();
    q.row(k) = s > 0.0 ? Eigen::RowVectorXd(q.row(k) / std::sqrt(s)) : Eigen::RowVectorXd::Zero(2);
  }
  const DiscreteFunction qf = d.with_values(std::move(q));
  if (!(norm(qf) > 1e-12)) throw_invalid("degenerate_curve", "curve has zero length");
  return project_to_preshape(SpherePoint(qf), closure_tol);
}

/// beta(t) = int_0^t q|q| ds, centered. Throws if the closure gap exceeds 10 * closure_tol.
inline Curve srvf_inverse(const SpherePoint& q, double closure_tol = 1e-4) {
  const int n = q.grid().size();
  const double h = q.grid().spacing();
  const Eigen::VectorXd speed = q.values().rowwise().norm();
  const Eigen::MatrixXd integrand = q.values().array().colwise() * speed.array();
  Eigen::MatrixXd beta(n, 2);
  beta.row(0).setZero();
  for (int k = 1; k < n; ++k) beta.row(k) = beta.row(k - 1) + 0.5 * h * (integrand.row(k - 1) + integrand.row(k));
  const double gap = (beta.row(n - 1) - beta.row(0)).norm();
  if (gap > 10.0 * closure_tol) {
    throw_numerical("closure_gap", "reconstructed curve does not close (gap " + std::to_string(gap) + ")");
  }
  const Eigen::RowVector2d center = beta.topRows(n - 1).colwise().mean();
  beta.rowwise() -= center;
  return Curve(DiscreteFunction(q.grid(), std::move(beta), true));
}

inline Curve srvf_inverse(const Srvf& q, double closure_tol = 1e-4) { return srvf_inverse(q.point(), closure_tol); }

/// Rotation applied pointwise: (O q)(t) = O q(t).
inline DiscreteFunction rotate(const DiscreteFunction& q, const Eigen::Matrix2d& O) {
  return q.with_values(q.values() * O.transpose());
}

/// Procrustes rotation O in SO(2) maximizing <<q1, O q2>>.
inline Eigen::Matrix2d optimal_rotation(const DiscreteFunction& q1, const DiscreteFunction& q2) {
  q1.require_compatible(q2);
  const Eigen::VectorXd w = trapezoid_weights(q1.grid());
  const Eigen::Matrix2d A = q1.values().transpose() * w.asDiagonal() * q2.values();
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d U = svd.matrixU(), V = svd.matrixV();
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
  D(1, 1) = (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return U * D * V.transpose();
}

inline Eigen::Matrix2d optimal_rotation(const Srvf& q1, const Srvf& q2) {
  return optimal_rotation(q1.function(), q2.function());
}

/// Group action (q o gamma) sqrt(gamma') for an unwrapped circle warp.
inline DiscreteFunction apply_warp(const DiscreteFunction& q, const DiscreteFunction& gamma) {
  const DiscreteFunction composed = compose_warp(q, gamma);
  const Eigen::VectorXd rate = warp_derivative(gamma, true).cwiseMax(0.0).cwiseSqrt();
  return composed.with_values(composed.values().array().colwise() * rate.array());
}

/// Cyclic shift of the starting point by `offset` of a period.
inline DiscreteFunction shift_start(const DiscreteFunction& q, double offset) {
  DiscreteFunction gamma(q.grid(), Eigen::MatrixXd((q.grid().points().array() + offset).matrix()), false);
  return compose_warp(q, gamma);
}

namespace detail {

/// Boundary-matched DP alignment of q2 to q1 on an M x M lattice; returns the
/// warp (gamma(0)=0, gamma(1)=1) sampled on q1's grid.
inline DiscreteFunction dp_warp(const DiscreteFunction& q1, const DiscreteFunction& q2, int lattice) {
  const Grid lat(lattice);
  const DiscreteFunction a = q1.size() == lattice ? q1 : resample(q1, lat);
  const DiscreteFunction b = q2.size() == lattice ? q2 : resample(q2, lat);
  const int M = lattice;
  const double h = lat.spacing();
  const Eigen::MatrixXd& A = a.values();
  const Eigen::MatrixXd& B = b.values();

  // Per slope (p,s) and step k, the scaled, interpolated q2 samples
  // sqrt(s/p) * q2(l0 + k s/p) for every l0, laid out [l0][x,y].
  struct Slope {
    int p, s;
    std::array<std::vector<double>, 4> row;
  };
  std::vector<Slope> slopes;
  for (int p = 1; p <= 4; ++p) {
    for (int s = 1; s <= 4; ++s) {
      Slope sl{p, s, {}};
      const double root = std::sqrt(static_cast<double>(s) / p);
      for (int k = 0; k < p; ++k) {
        const double x = static_cast<double>(k * s) / p;
        const int base = static_cast<int>(std::floor(x));
        const double f = x - base;
        auto& r = sl.row[k];
        r.assign(2 * static_cast<std::size_t>(M), 0.0);
        for (int l0 = 0; l0 + base < M; ++l0) {
          const int l = l0 + base;
          const int l1 = std::min(l + 1, M - 1);
          r[2 * l0] = root * ((1.0 - f) * B(l, 0) + f * B(l1, 0));
          r[2 * l0 + 1] = root * ((1.0 - f) * B(l, 1) + f * B(l1, 1));
        }
      }
      slopes.push_back(std::move(sl));
    }
  }
  std::vector<double> ax(2 * static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) {
    ax[2 * i] = A(i, 0);
    ax[2 * i + 1] = A(i, 1);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> E(static_cast<std::size_t>(M) * M, kInf);
  std::vector<signed char> pred(static_cast<std::size_t>(M) * M, -1);
  E[0] = 0.0;
  for (int i = 1; i < M; ++i) {
    for (int j = 1; j < M; ++j) {
      double best = kInf;
      signed char arg = -1;
      for (std::size_t si = 0; si < slopes.size(); ++si) {
        const Slope& sl = slopes[si];
        const int k0 = i - sl.p, l0 = j - sl.s;
        if (k0 < 0 || l0 < 0) continue;
        const double prev = E[static_cast<std::size_t>(k0) * M + l0];
        if (prev == kInf) continue;
        double c = 0.0;
        for (int k = 0; k < sl.p; ++k) {
          const double* bq = sl.row[k].data() + 2 * l0;
          const double* aq = ax.data() + 2 * (k0 + k);
          const double dx = aq[0] - bq[0];
          const double dy = aq[1] - bq[1];
          c += dx * dx + dy * dy;
        }
        const double total = prev + c * h;
        if (total < best) {
          best = total;
          arg = static_cast<signed char>(si);
        }
      }
      E[static_cast<std::size_t>(i) * M + j] = best;
      pred[static_cast<std::size_t>(i) * M + j] = arg;
    }
  }

  std::vector<int> ti{M - 1}, sj{M - 1};
  int i = M - 1, j = M - 1;
  while (i > 0 || j > 0) {
    const signed char si = pred[static_cast<std::size_t>(i) * M + j];
    i -= slopes[si].p;
    j -= slopes[si].s;
    ti.push_back(i);
    sj.push_back(j);
  }
  std::reverse(ti.begin(), ti.end());
  std::reverse(sj.begin(), sj.end());

  const int n = q1.size();
  Eigen::VectorXd gamma(n);
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double t = q1.grid().point(k) * (M - 1);
    while (seg + 1 < ti.size() - 1 && ti[seg + 1] < t) ++seg;
    const double t0 = ti[seg], t1 = ti[seg + 1];
    const double u = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    gamma(k) = ((1.0 - u) * sj[seg] + u * sj[seg + 1]) / (M - 1);
  }
  gamma(0) = 0.0;
  gamma(n - 1) = 1.0;
  return DiscreteFunction(q1.grid(), Eigen::MatrixXd(gamma), false);
}

inline double squared_distance(const DiscreteFunction& a, const DiscreteFunction& b) {
  const DiscreteFunction d = a - b;
  return inner_product(d, d);
}

inline DiscreteFunction offset_warp(const DiscreteFunction& gamma, double offset) {
  return gamma.with_values((gamma.values().array() + offset).matrix());
}

/// Local polish of a DP alignment. DP paths only take rational slopes, so
/// sqrt(gamma') chatters at every resolution; here the warp is refit as
/// t + c + sum_k (a_k sin 2 pi k t + b_k cos 2 pi k t), optionally with the
/// rotation angle, by damped Gauss-Newton on ||f1 - O (f2, gamma)||^2.
/// Returns `start` unless the cost strictly drops.
struct Polished {
  Eigen::Matrix2d rotation;
  DiscreteFunction warp;
  double cost;
};

inline Polished polish_alignment(const DiscreteFunction& f1, const DiscreteFunction& f2, const Polished& start,
                                 bool fit_rotation, int modes, int max_iter) {
  if (modes <= 0 || max_iter <= 0 || !(start.cost > 0.0)) return start;
  const Grid& g = f1.grid();
  const int n = g.size();
  const int p = 2 * modes + 1;
  const Eigen::VectorXd t = g.points();
  Eigen::MatrixXd B(n, p), dB(n, p);
  B.col(0).setOnes();
  dB.col(0).setZero();
  for (int k = 1; k <= modes; ++k) {
    const double w = 2.0 * std::numbers::pi * k;
    B.col(2 * k - 1) = (w * t).array().sin();
    B.col(2 * k) = (w * t).array().cos();
    dB.col(2 * k - 1) = w * (w * t).array().cos();
    dB.col(2 * k) = -w * (w * t).array().sin();
  }
  const Eigen::VectorXd tw = trapezoid_weights(g);
  const DiscreteFunction df2 = derivative(f2);
  auto rot = [](double a) {
    Eigen::Matrix2d O;
    O << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return O;
  };
  auto monotone = [&](const Eigen::VectorXd& th) { return (1.0 + (dB * th).array()).minCoeff() >= 0.05; };
  auto warp_of = [&](const Eigen::VectorXd& th) {
    return DiscreteFunction(g, Eigen::MatrixXd(t + B * th), false);
  };
  auto cost_of = [&](const Eigen::VectorXd& th, double a) {
    return squared_distance(f1, rotate(apply_warp(f2, warp_of(th)), rot(a)));
  };

  const Eigen::VectorXd offset = start.warp.values().col(0) - t;
  Eigen::VectorXd th = B.topRows(n - 1).colPivHouseholderQr().solve(offset.head(n - 1));
  for (int i = 0; i < 30 && !monotone(th); ++i) th.tail(p - 1) *= 0.5;
  if (!monotone(th)) return start;
  double angle = std::atan2(start.rotation(1, 0), start.rotation(0, 0));
  double cost = cost_of(th, angle);
  double lambda = 1e-3;
  const int q = p + (fit_rotation ? 1 : 0);

  for (int it = 0; it < max_iter; ++it) {
    const DiscreteFunction gamma = warp_of(th);
    const Eigen::ArrayXd rs = (1.0 + (dB * th).array()).sqrt();
    const Eigen::MatrixXd U = compose_warp(f2, gamma).values();
    const Eigen::MatrixXd dU = compose_warp(df2, gamma).values();
    const Eigen::Matrix2d O = rot(angle);
    const Eigen::MatrixXd F = (U.array().colwise() * rs).matrix() * O.transpose();
    Eigen::MatrixXd J(2 * n, q);
    for (int b = 0; b < p; ++b) {
      const Eigen::MatrixXd col = ((dU.array().colwise() * (B.col(b).array() * rs)) +
                                   (U.array().colwise() * (dB.col(b).array() / (2.0 * rs))))
                                      .matrix() *
                                  O.transpose();
      J.col(b) << col.col(0), col.col(1);
    }
    if (fit_rotation) J.col(p) << -F.col(1), F.col(0);
    Eigen::VectorXd r(2 * n), w2(2 * n);
    r << f1.values().col(0) - F.col(0), f1.values().col(1) - F.col(1);
    w2 << tw, tw;
    const Eigen::MatrixXd H = J.transpose() * w2.asDiagonal() * J;
    const Eigen::VectorXd grad = J.transpose() * (w2.array() * r.array()).matrix();

    bool accepted = false;
    while (lambda < 1e10) {
      Eigen::MatrixXd A = H;
      A.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd d = A.ldlt().solve(grad);
      const Eigen::VectorXd th_new = th + d.head(p);
      const double a_new = fit_rotation ? angle + d(p) : angle;
      if (monotone(th_new)) {
        const double c = cost_of(th_new, a_new);
        if (c < cost) {
          const double drop = cost - c;
          th = th_new;
          angle = a_new;
          cost = c;
          lambda = std::max(lambda / 3.0, 1e-9);
          accepted = drop > 1e-10 * c;
          if (!accepted) it = max_iter;
          break;
        }
      }
      lambda *= 4.0;
    }
    if (!accepted) break;
  }
  if (!(cost < start.cost)) return start;
  return {rot(angle), warp_of(th), cost};
}

}  // namespace detail

struct WarpResult {
  DiscreteFunction warp;  // unwrapped; includes the seed offset
  double cost = 0.0;      // ||q1 - (q2, warp)||^2
};

/// Minimizes ||q1 - (q2 o gamma) sqrt(gamma')||^2 by DP over `seeds` evenly
/// spaced starting points of q2.
inline WarpResult optimal_warp(const DiscreteFunction& q1, const DiscreteFunction& q2, const ShapeOptions& opts = {}) {
  q1.require_compatible(q2);
  const int n = q1.size();
  const int seeds = opts.effective_seeds(q1.grid());
  const int lattice = opts.effective_dp_grid(q1.grid());
  WarpResult best{identity_warp(q1.grid()), std::numeric_limits<double>::infinity()};
  const auto order = detail::ranked_seeds(seeds, opts.prescreen, [&](int s) {
    return detail::squared_distance(q1, shift_start(q2, detail::seed_offset(s, seeds, n)));
  });
  for (int s : order) {
    const double offset = detail::seed_offset(s, seeds, n);
    const DiscreteFunction shifted = shift_start(q2, offset);
    const DiscreteFunction gamma = detail::offset_warp(detail::dp_warp(q1, shifted, lattice), offset);
    const double cost = detail::squared_distance(q1, apply_warp(q2, gamma));
    if (cost < best.cost) best = {gamma, cost};
  }
  const auto polished = detail::polish_alignment(q1, q2, {Eigen::Matrix2d::Identity(), best.warp, best.cost}, false,
                                                 opts.refine_modes, opts.refine_iter);
  return {polished.warp, polished.cost};
}

inline WarpResult optimal_warp(const Srvf& q1, const Srvf& q2, const ShapeOptions& opts = {}) {
  return optimal_warp(q1.function(), q2.function(), opts);
}

struct Registration {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  DiscreteFunction warp;
  double cost = 0.0;
};

struct RegistrationResult {
  Registration registration;
  Srvf q2_star;
  std::vector<double> round_costs;
};

/// Aligns q2 to q1 over SO(2) x reparameterizations.
///
/// The first round searches all seeds, fitting the Procrustes rotation per
/// seed before the DP. Later rounds refine rotation and warp from the current
/// alignment and are kept only if they lower the cost.
inline RegistrationResult register_curves(const Srvf& q1, const Srvf& q2, const ShapeOptions& opts = {}) {
  const DiscreteFunction& f1 = q1.function();
  const DiscreteFunction& f2 = q2.function();
  f1.require_compatible(f2);
  const int n = f1.size();
  const int seeds = opts.effective_seeds(f1.grid());
  const int lattice = opts.effective_dp_grid(f1.grid());

  Registration reg{Eigen::Matrix2d::Identity(), identity_warp(f1.grid()), detail::squared_distance(f1, f2)};
  DiscreteFunction current = f2;
  std::vector<double> round_costs;

  // Seeds are ranked after a short low-mode polish from the shifted start, which
  // absorbs most of the warp; the rotation-only cost alone misranks near-symmetric contours.
  const auto order = detail::ranked_seeds(seeds, opts.prescreen, [&](int s) {
    const double offset = detail::seed_offset(s, seeds, n);
    const DiscreteFunction shifted = shift_start(f2, offset);
    const Eigen::Matrix2d O = optimal_rotation(f1, shifted);
    const double c0 = detail::squared_distance(f1, rotate(shifted, O));
    if (opts.prescreen <= 0) return c0;
    return detail::polish_alignment(f1, f2, {O, detail::offset_warp(identity_warp(f1.grid()), offset), c0}, true,
                                    std::min(opts.refine_modes, 3), 8)
        .cost;
  });
  for (int s : order) {
    const double offset = detail::seed_offset(s, seeds, n);
    const DiscreteFunction shifted = shift_start(f2, offset);
    const Eigen::Matrix2d O = optimal_rotation(f1, shifted);
    const DiscreteFunction gamma = detail::offset_warp(detail::dp_warp(f1, rotate(shifted, O), lattice), offset);
    const DiscreteFunction candidate = rotate(apply_warp(f2, gamma), O);
    const double cost = detail::squared_distance(f1, candidate);
    if (cost < reg.cost) {
      reg = {O, gamma, cost};
      current = candidate;
    }
  }
  round_costs.push_back(reg.cost);

  for (int round = 1; round < opts.rounds; ++round) {
    const Eigen::Matrix2d O = optimal_rotation(f1, current);
    const DiscreteFunction rotated = rotate(current, O);
    const DiscreteFunction gamma = detail::dp_warp(f1, rotated, lattice);
    const DiscreteFunction candidate = apply_warp(rotated, gamma);
    const double cost = detail::squared_distance(f1, candidate);
    if (cost < reg.cost) {
      reg = {O * reg.rotation, compose_circle_warps(reg.warp, gamma), cost};
      current = candidate;
    }
    round_costs.push_back(reg.cost);
  }

  const auto polished =
      detail::polish_alignment(f1, f2, {reg.rotation, reg.warp, reg.cost}, true, opts.refine_modes, opts.refine_iter);
  if (polished.cost < reg.cost) {
    reg = {polished.rotation, polished.warp, polished.cost};
    current = rotate(apply_warp(f2, reg.warp), reg.rotation);
    round_costs.push_back(reg.cost);
  }

  Srvf star = project_to_preshape(SpherePoint(current), opts.closure_tol, opts.projection_max_iter);
  return {std::move(reg), std::move(star), std::move(round_costs)};
}

/// Elastic shape distance, symmetrized as the smaller of the two registration directions.
inline double shape_distance(const Srvf& q1, const Srvf& q2, const ShapeOptions& opts = {}) {
  const auto r12 = register_curves(q1, q2, opts);
  const auto r21 = register_curves(q2, q1, opts);
  const double d12 = geodesic_distance(q1.point(), r12.q2_star.point());
  const double d21 = geodesic_distance(q2.point(), r21.q2_star.point());
  return std::min(d12, d21);
}

/// Orthonormal (phi1, phi2): closure gradients at q made orthogonal to q and each other.
inline std::array<DiscreteFunction, 2> normal_basis(const SpherePoint& q) {
  auto g = closure_gradients(q.function());
  std::array<DiscreteFunction, 2> phi;
  for (int j = 0; j < 2; ++j) {
    DiscreteFunction v = g[j];
    v -= inner_product(v, q.function()) * q.function();
    for (int i = 0; i < j; ++i) v -= inner_product(v, phi[i]) * phi[i];
    const double len = norm(v);
    if (!(len > 1e-12)) throw_numerical("normal_basis", "closure gradients are degenerate");
    phi[j] = (1.0 / len) * v;
  }
  return phi;
}

inline TangentVector remove_normal_components(const TangentVector& v, const std::array<DiscreteFunction, 2>& phi) {
  DiscreteFunction out = v.function();
  for (const auto& p : phi) out -= inner_product(out, p) * p;
  return TangentVector(v.base(), out);
}

struct ProjectedShape {
  TangentVector tangent;       // Pi(q)
  double distance = 0.0;       // arccos <<mean, q*>>
  Srvf registered;             // q*
};

/// Pi: register q to `mean`, take the sphere log map and (optionally) drop the
/// components along the closure normals phi1, phi2.
inline ProjectedShape project_Pi(const Srvf& q, const Srvf& mean, const ShapeOptions& opts = {},
                                 bool remove_normals = true) {
  auto reg = register_curves(mean, q, opts);
  TangentVector v = log_map(mean.point(), reg.q2_star.point());
  const double d = v.norm();
  if (remove_normals) v = remove_normal_components(v, normal_basis(mean.point()));
  return {std::move(v), d, std::move(reg.q2_star)};
}

struct ShapeKarcherOptions {
  double step = 1.0;
  double tol = 1e-4;
  int max_iter = 30;
  int max_halvings = 1;
};

struct ShapeKarcherResult {
  Srvf mean;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> variance_trace;
  /// Pi images of the inputs at the returned mean.
  std::vector<TangentVector> tangents;
};

namespace detail {

struct ShapeSweep {
  std::vector<ProjectedShape> projected;
  double variance = 0.0;
  DiscreteFunction gradient;
};

inline ShapeSweep sweep(std::span<const Srvf> qs, const Srvf& mean, const ShapeOptions& opts) {
  ShapeSweep sw;
  sw.projected.resize(qs.size());
  parallel_for(static_cast<int>(qs.size()), [&](int i) { sw.projected[i] = project_Pi(qs[i], mean, opts); });
  sw.gradient = 0.0 * mean.function();
  for (const auto& p : sw.projected) {
    sw.variance += p.distance * p.distance;
    sw.gradient += p.tangent.function();
  }
  const double inv_n = 1.0 / static_cast<double>(qs.size());
  sw.variance *= inv_n;
  sw.gradient *= inv_n;
  return sw;
}

}  // namespace detail

/// Karcher mean in shape space by registered gradient steps with backtracking,
/// so the variance functional never increases.
inline ShapeKarcherResult shape_karcher_mean(std::span<const Srvf> qs, const ShapeOptions& opts = {},
                                             const ShapeKarcherOptions& kopts = {}) {
  if (qs.empty()) throw_invalid("empty_sample", "shape mean of an empty sample");
  DiscreteFunction sum = qs[0].function();
  for (std::size_t i = 1; i < qs.size(); ++i) sum += qs[i].function();
  const double extrinsic = norm(sum) / static_cast<double>(qs.size());
  Srvf mean = extrinsic > 0.5 ? project_to_preshape(SpherePoint(sum), opts.closure_tol, opts.projection_max_iter)
                              : qs[0];

  ShapeKarcherResult result;
  auto current = detail::sweep(qs, mean, opts);
  result.variance_trace.push_back(current.variance);
  for (int iter = 0;; ++iter) {
    result.iterations = iter;
    result.final_gradient_norm = norm(current.gradient);
    if (result.final_gradient_norm <= kopts.tol) {
      result.converged = true;
      break;
    }
    if (iter == kopts.max_iter) break;
    bool accepted = false;
    double step = kopts.step;
    for (int h = 0; h <= kopts.max_halvings && !accepted; ++h, step *= 0.5) {
      const Srvf candidate = project_to_preshape(exp_map(mean.point(), step * current.gradient), opts.closure_tol,
                                                 opts.projection_max_iter);
      auto next = detail::sweep(qs, candidate, opts);
      if (next.variance <= current.variance + 1e-8) {
        mean = candidate;
        current = std::move(next);
        accepted = true;
      }
    }
    if (!accepted) break;  // stalled at registration resolution
    result.variance_trace.push_back(current.variance);
  }
  result.mean = mean;
  result.tangents.reserve(qs.size());
  for (auto& p : current.projected) result.tangents.push_back(std::move(p.tangent));
  return result;
}

/// Closed curves exp_mean(eps v) -> pre-shape -> curve for a tangent v at the mean.
inline std::vector<Curve> shape_variate_direction(const Srvf& mean, const TangentVector& v,
                                                  std::span<const double> epsilons, const ShapeOptions& opts = {}) {
  const double len = v.norm();
  std::vector<Curve> out;
  out.reserve(epsilons.size());
  for (double eps : epsilons) {
    if (std::abs(eps) * len >= std::numbers::pi) {
      throw_numerical("geodesic_overflow", "step " + std::to_string(eps) + " leaves the injectivity radius");
    }
    const Srvf q = project_to_preshape(exp_map(mean.point(), eps * v.function()), opts.closure_tol,
                                       opts.projection_max_iter);
    out.push_back(srvf_inverse(q, opts.closure_tol));
  }
  return out;
}

/// Same, for v = sum_i e_i w_i.
inline std::vector<Curve> shape_variate_direction(const Srvf& mean, const FpcBasis& basis,
                                                  const Eigen::VectorXd& weights, std::span<const double> epsilons,
                                                  const ShapeOptions& opts = {}) {
  return shape_variate_direction(mean, TangentVector(mean.point(), basis.combine(weights)), epsilons, opts);
}

}  // namespace tfcca
