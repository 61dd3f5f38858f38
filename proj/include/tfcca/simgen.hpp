#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tfcca/cca.hpp"
#include "tfcca/density.hpp"
#include "tfcca/parallel.hpp"
#include "tfcca/shape.hpp"
#include "tfcca/tangent_modes.hpp"

namespace tfcca {

namespace detail {

// Independent stream per (seed, purpose, index); results do not depend on
// the order in which samples are generated.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline Eigen::VectorXd standard_normals(std::uint64_t seed, std::uint64_t purpose, int n) {
  auto g = stream(seed, purpose, 0);
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = z(g);
  return v;
}

inline double gaussian_density(double x, double mu, double sigma) {
  const double u = (x - mu) / sigma;
  return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace detail

// ---------------------------------------------------------------- PDFs

struct PdfSimSpec {
  int group = 1;  // 1, 2 or 3
  int n = 100;
  Grid grid{1000};
  std::uint64_t seed = 0;
};

struct MixtureParams {
  double mu1, mu2, sigma1, sigma2;
};

inline MixtureParams draw_mixture_params(int group, std::mt19937_64& g) {
  switch (group) {
    case 1: return {0.3, detail::uniform(g, 0.6, 0.8), 0.1, 0.1};
    case 2: {
      const double mu2 = detail::uniform(g, 0.6, 0.8);
      return {0.3, mu2, 0.1, detail::uniform(g, 0.1, 0.2)};
    }
    case 3: {
      const double mu1 = detail::uniform(g, 0.1, 0.4);
      const double mu2 = detail::uniform(g, 0.6, 0.8);
      const double s1 = detail::uniform(g, 0.1, 0.3);
      return {mu1, mu2, s1, detail::uniform(g, 0.1, 0.2)};
    }
    default: throw_invalid("group", "PDF simulation group must be 1, 2 or 3");
  }
}

/// Equal-weight two-Gaussian mixture restricted to [0,1] and renormalized on the grid.
inline Pdf mixture_pdf(const MixtureParams& m, const Grid& grid) {
  return Pdf::normalized(DiscreteFunction::sample(grid, [&](double t) {
    return 0.5 * detail::gaussian_density(t, m.mu1, m.sigma1) + 0.5 * detail::gaussian_density(t, m.mu2, m.sigma2);
  }));
}

inline std::vector<Pdf> gen_pdf_group(const PdfSimSpec& spec, std::vector<MixtureParams>* params = nullptr) {
  if (spec.n < 1) throw_invalid("sample_size", "n must be positive");
  std::vector<Pdf> out;
  out.reserve(spec.n);
  if (params) params->clear();
  for (int i = 0; i < spec.n; ++i) {
    auto g = detail::stream(spec.seed, 100 + spec.group, i);
    const MixtureParams m = draw_mixture_params(spec.group, g);
    if (params) params->push_back(m);
    out.push_back(mixture_pdf(m, spec.grid));
  }
  return out;
}

// ---------------------------------------------------------------- curves

enum class CurveRegime { kHigh, kModerate, kWeak };

inline CurveRegime parse_regime(const std::string& s) {
  if (s == "high") return CurveRegime::kHigh;
  if (s == "moderate") return CurveRegime::kModerate;
  if (s == "weak") return CurveRegime::kWeak;
  throw_invalid("regime", "unknown regime '" + s + "' (high|moderate|weak)");
}

inline const char* to_string(CurveRegime r) {
  switch (r) {
    case CurveRegime::kHigh: return "high";
    case CurveRegime::kModerate: return "moderate";
    case CurveRegime::kWeak: return "weak";
  }
  return "high";
}

/// Latent cross-group correlation of the second-peak locations.
inline double regime_correlation(CurveRegime r) {
  switch (r) {
    case CurveRegime::kHigh: return 0.9934;
    case CurveRegime::kModerate: return 0.4815;
    case CurveRegime::kWeak: return 0.0533;
  }
  return 0.0;
}

struct CurveSimSpec {
  CurveRegime regime = CurveRegime::kHigh;
  int n = 100;
  int grid = 200;
  std::uint64_t seed = 0;
  double amplitude = 0.3;
  double kappa = 20.0;
  double second_peak = 1.25 * std::numbers::pi;  // base angle of the moving bump
  double spread_1 = 0.06;                        // sd of group-1 locations (radians)
  double spread_2 = 0.12;                        // group 2 moves much more
  bool vary_kappa_1 = false;
  bool vary_kappa_2 = true;  // thinner / thicker second peaks
  double kappa_lo = 12.0, kappa_hi = 30.0;
};

/// Unit circle with radial bumps a*exp(kappa*(cos(theta - theta_k) - 1)).
inline Curve bump_curve(std::span<const double> angles, std::span<const double> kappas, double amplitude, int grid) {
  return Curve(DiscreteFunction::sample(
      Grid(grid),
      [&](double t) {
        const double th = 2.0 * std::numbers::pi * t;
        double r = 1.0;
        for (std::size_t k = 0; k < angles.size(); ++k) {
          r += amplitude * std::exp(kappas[k] * (std::cos(th - angles[k]) - 1.0));
        }
        return Eigen::Vector2d(r * std::cos(th), r * std::sin(th));
      },
      true));
}

struct CurveGroups {
  std::vector<Curve> group_1, group_2;
  Eigen::VectorXd peak_1, peak_2;  // second-peak angles
  double latent_correlation = 0.0;
};

/// Both groups at once; the sample correlation of the latent peak shifts
/// equals the regime's target exactly.
inline CurveGroups gen_curve_groups(const CurveSimSpec& spec) {
  const int n = spec.n;
  if (n < 3) throw_invalid("sample_size", "curve simulation needs n >= 3");
  const double c = regime_correlation(spec.regime);

  Eigen::VectorXd z = detail::standard_normals(spec.seed, 201, n);
  Eigen::VectorXd w = detail::standard_normals(spec.seed, 202, n);
  z.array() -= z.mean();
  z /= z.norm();
  w.array() -= w.mean();
  w -= z.dot(w) * z;
  w /= w.norm();
  const double unit = std::sqrt(static_cast<double>(n - 1));
  const Eigen::VectorXd u1 = unit * z;
  const Eigen::VectorXd u2 = unit * (c * z + std::sqrt(1.0 - c * c) * w);

  CurveGroups out;
  out.peak_1 = (spec.second_peak + spec.spread_1 * u1.array()).matrix();
  out.peak_2 = (spec.second_peak + spec.spread_2 * u2.array()).matrix();
  out.latent_correlation = c;
  const double north = 0.5 * std::numbers::pi;
  for (int i = 0; i < n; ++i) {
    auto g1 = detail::stream(spec.seed, 211, i);
    auto g2 = detail::stream(spec.seed, 212, i);
    const double k1 = spec.vary_kappa_1 ? detail::uniform(g1, spec.kappa_lo, spec.kappa_hi) : spec.kappa;
    const double k2 = spec.vary_kappa_2 ? detail::uniform(g2, spec.kappa_lo, spec.kappa_hi) : spec.kappa;
    const double a1[] = {north, out.peak_1(i)}, ka1[] = {spec.kappa, k1};
    const double a2[] = {north, out.peak_2(i)}, ka2[] = {spec.kappa, k2};
    out.group_1.push_back(bump_curve(a1, ka1, spec.amplitude, spec.grid));
    out.group_2.push_back(bump_curve(a2, ka2, spec.amplitude, spec.grid));
  }
  return out;
}

inline std::pair<std::vector<Curve>, Eigen::VectorXd> gen_curve_group(const CurveSimSpec& spec, int group) {
  auto g = gen_curve_groups(spec);
  if (group == 1) return {std::move(g.group_1), g.peak_1};
  if (group == 2) return {std::move(g.group_2), g.peak_2};
  throw_invalid("group", "curve group must be 1 or 2");
}

// ---------------------------------------------------------------- recovery protocols

/// Target canonical correlations used for the group pairs (1,2), (1,3), (2,3).
inline Eigen::VectorXd default_targets(int r) {
  switch (r) {
    case 2: return (Eigen::VectorXd(2) << 0.71, 0.27).finished();
    case 3: return (Eigen::VectorXd(3) << 0.63, 0.26, 0.12).finished();
    case 4: return (Eigen::VectorXd(4) << 0.82, 0.13, 0.11, 0.03).finished();
    default: throw_invalid("rank", "no default targets for r=" + std::to_string(r) + "; pass them explicitly");
  }
}

inline std::pair<int, int> default_groups(int r) {
  switch (r) {
    case 2: return {1, 2};
    case 3: return {1, 3};
    case 4: return {2, 3};
    default: throw_invalid("rank", "no default group pair for r=" + std::to_string(r));
  }
}

struct LatentPair {
  Eigen::MatrixXd x1, x2;  // n x r each
};

/// Gaussian pairs with identity marginals and cross-covariance diag(targets).
inline LatentPair latent_pairs(const Eigen::VectorXd& targets, int n, std::uint64_t seed) {
  const int r = static_cast<int>(targets.size());
  if ((targets.array().abs() >= 1.0).any()) throw_invalid("targets", "target correlations must lie in (-1,1)");
  LatentPair lp{Eigen::MatrixXd(n, r), Eigen::MatrixXd(n, r)};
  for (int j = 0; j < r; ++j) {
    const Eigen::VectorXd g = detail::standard_normals(seed, 300 + j, n);
    const Eigen::VectorXd h = detail::standard_normals(seed, 400 + j, n);
    lp.x1.col(j) = g;
    lp.x2.col(j) = targets(j) * g + std::sqrt(1.0 - targets(j) * targets(j)) * h;
  }
  return lp;
}

enum class PdfRecoveryMode { kSeparate, kPooled };

struct PdfRecoverySpec {
  int group_a = 1, group_b = 2;
  int r = 2;
  PdfRecoveryMode mode = PdfRecoveryMode::kSeparate;
  int n = 100;
  int grid = 1000;
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> targets;  // defaults by r
  double latent_scale = 0.02;              // tangent length per unit latent coordinate
  KarcherOptions karcher;
};

struct PdfRecovery {
  Eigen::VectorXd rho_truth, rho_hat;
  LatentPair latent;
  std::vector<Pdf> synth_a, synth_b;  // the step-4 samples the estimate was computed from
};

namespace detail {

// Step 4: PDFs exp_mean(scale * sum_j x_ij e_j)^2. A common scale keeps every
// direction well inside the injectivity radius and leaves canonical
// correlations unchanged.
inline std::vector<Pdf> synthesize_pdfs(const FpcBasis& basis, const Eigen::MatrixXd& x, double scale) {
  std::vector<Pdf> out;
  out.reserve(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd w = scale * x.row(i).transpose();
    out.push_back(srt_inverse(exp_map(basis.base, TangentVector(basis.base, basis.combine(w)))));
  }
  return out;
}

}  // namespace detail

inline PdfRecovery recovery_protocol_pdf(const PdfRecoverySpec& spec) {
  const Eigen::VectorXd targets = spec.targets ? *spec.targets : default_targets(spec.r);
  if (targets.size() != spec.r) throw_invalid("targets", "need one target correlation per rank");

  PdfRecovery out;
  out.latent = latent_pairs(targets, spec.n, spec.seed);
  out.rho_truth = cca(out.latent.x1, out.latent.x2).correlations;

  const Grid grid(spec.grid);
  const auto carrier_a = gen_pdf_group({spec.group_a, spec.n, grid, spec.seed});
  const auto carrier_b = gen_pdf_group({spec.group_b, spec.n, grid, spec.seed + 1});

  PipelineOptions opts;
  opts.rank_a = opts.rank_b = RankRule::fixed(spec.r);
  opts.pdf_karcher = spec.karcher;
  const TangentMode mode = spec.mode == PdfRecoveryMode::kPooled ? TangentMode::kPooled : TangentMode::kSeparate;
  const auto carrier = tangent_mode_pipeline(GroupData(carrier_a), GroupData(carrier_b), mode, opts);

  out.synth_a = detail::synthesize_pdfs(carrier.a.basis, out.latent.x1, spec.latent_scale);
  out.synth_b = detail::synthesize_pdfs(carrier.b.basis, out.latent.x2, spec.latent_scale);
  const auto refit = tangent_mode_pipeline(GroupData(out.synth_a), GroupData(out.synth_b), mode, opts);
  out.rho_hat = cca(refit.a.coeffs.values, refit.b.coeffs.values).correlations;
  return out;
}

/// Group pair and targets chosen by r (2, 3 or 4).
inline PdfRecovery recovery_protocol_pdf(int r, PdfRecoveryMode mode, std::uint64_t seed, double latent_scale = 0.02) {
  PdfRecoverySpec spec;
  spec.latent_scale = latent_scale;
  std::tie(spec.group_a, spec.group_b) = default_groups(r);
  spec.r = r;
  spec.mode = mode;
  spec.seed = seed;
  return recovery_protocol_pdf(spec);
}

struct ShapeRecovery {
  double rho_truth = 0.0;
  Eigen::VectorXd rho_hat_separate;
  Eigen::VectorXd rho_hat_transport;  // group-1 data and basis carried to group 2's mean
  Eigen::VectorXd rho_hat_joint;      // transported data, joint basis refit
};

inline ShapeRecovery recovery_protocol_shape(const CurveSimSpec& spec, int r = 3, const ShapeOptions& shape = {},
                                             const ShapeKarcherOptions& karcher = {}) {
  const CurveGroups groups = gen_curve_groups(spec);
  PipelineOptions opts;
  opts.rank_a = opts.rank_b = RankRule::fixed(r);
  opts.shape = shape;
  opts.shape_karcher = karcher;
  const GroupGeometry ga = fit_group_geometry(GroupData(groups.group_1), opts);
  const GroupGeometry gb = fit_group_geometry(GroupData(groups.group_2), opts);

  ShapeRecovery out;
  const Eigen::VectorXd d1 = groups.peak_1.array() - groups.peak_1.mean();
  const Eigen::VectorXd d2 = groups.peak_2.array() - groups.peak_2.mean();
  out.rho_truth = d1.dot(d2) / (d1.norm() * d2.norm());
  const auto sep = assemble_tangent_mode(ga, gb, TangentMode::kSeparate, opts);
  out.rho_hat_separate = cca(sep.a.coeffs.values, sep.b.coeffs.values).correlations;
  opts.transport_joint_basis = false;
  const auto tr = assemble_tangent_mode(ga, gb, TangentMode::kTransport, opts);
  out.rho_hat_transport = cca(tr.a.coeffs.values, tr.b.coeffs.values).correlations;
  opts.transport_joint_basis = true;
  const auto joint = assemble_tangent_mode(ga, gb, TangentMode::kTransport, opts);
  out.rho_hat_joint = cca(joint.a.coeffs.values, joint.b.coeffs.values).correlations;
  return out;
}

inline ShapeRecovery recovery_protocol_shape(CurveRegime regime, std::uint64_t seed) {
  CurveSimSpec spec;
  spec.regime = regime;
  spec.seed = seed;
  return recovery_protocol_shape(spec);
}

}  // namespace tfcca
