#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tfcca/fpca.hpp"
#include "tfcca/sphere.hpp"

namespace tfcca {

/// Probability density on [0,1]: nonnegative, unit trapezoid integral.
class Pdf {
 public:
  /// Tolerated integral drift that is silently corrected.
  static constexpr double kDriftTolerance = 1e-3;

  Pdf() = default;

  /// Strict constructor: integral must be within kDriftTolerance of 1; the
  /// applied correction is reported through drift().
  explicit Pdf(const DiscreteFunction& f) { init(f, true); }

  /// Normalizes any nonnegative function with positive mass.
  static Pdf normalized(const DiscreteFunction& f) {
    Pdf p;
    p.init(f, false);
    return p;
  }

  const DiscreteFunction& function() const noexcept { return f_; }
  const Grid& grid() const noexcept { return f_.grid(); }
  /// |integral - 1| of the input before renormalization.
  double drift() const noexcept { return drift_; }

 private:
  void init(const DiscreteFunction& f, bool strict) {
    if (f.dim() != 1 || f.periodic()) throw_invalid("pdf_domain", "a PDF is a scalar function on [0,1]");
    if (f.values().minCoeff() < 0.0) throw_invalid("negative_density", "PDF has negative values");
    const double mass = integrate(f)(0);
    if (!(mass > 0.0)) throw_invalid("zero_mass", "PDF integrates to zero");
    drift_ = std::abs(mass - 1.0);
    if (strict && drift_ > kDriftTolerance) {
      throw_invalid("pdf_integral", "PDF integrates to " + std::to_string(mass) + ", outside 1 +/- 1e-3");
    }
    f_ = (1.0 / mass) * f;
  }

  DiscreteFunction f_;
  double drift_ = 0.0;
};

/// Square-root transform of a PDF: a point in the positive orthant of the sphere.
class Srt {
 public:
  Srt() = default;
  explicit Srt(SpherePoint p) : p_(std::move(p)) {
    if (p_.values().minCoeff() < -1e-12) throw_invalid("srt_orthant", "SRT must be nonnegative");
  }
  const SpherePoint& point() const noexcept { return p_; }

 private:
  SpherePoint p_;
};

inline Srt srt(const Pdf& f) {
  return Srt(SpherePoint(f.function().with_values(f.function().values().cwiseSqrt())));
}

/// Pointwise square, renormalized.
inline Pdf srt_inverse(const SpherePoint& psi) {
  return Pdf::normalized(psi.function().with_values(psi.values().cwiseAbs2()));
}
inline Pdf srt_inverse(const Srt& psi) { return srt_inverse(psi.point()); }

struct EstimatedPdf {
  Pdf pdf;
  double rescale_min = 0.0;
  double rescale_max = 1.0;
};

/// Histogram density estimate on [0,1] after min-max rescaling of the samples.
///
/// `floor` is added to every bin height before normalization.
inline EstimatedPdf estimate_pdf(std::span<const double> samples, int bins, double floor, const Grid& grid,
                                 std::optional<std::pair<double, double>> range = std::nullopt) {
  if (samples.size() < 2) throw_invalid("sample_size", "density estimation needs at least 2 samples");
  if (bins < 1) throw_invalid("bins", "bin count must be positive");
  if (floor < 0.0) throw_invalid("floor", "floor must be nonnegative");
  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *mn_it, hi = *mx_it;
  if (range) std::tie(lo, hi) = *range;
  if (!(hi > lo)) throw_invalid("degenerate_sample", "all samples identical; cannot rescale to [0,1]");

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(bins);
  for (double s : samples) {
    const double u = (s - lo) / (hi - lo);
    const int b = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
    counts(b) += 1.0;
  }
  Eigen::VectorXd heights = counts / static_cast<double>(samples.size()) * bins;
  heights.array() += floor;

  Eigen::VectorXd v(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const int b = std::clamp(static_cast<int>(std::floor(grid.point(k) * bins)), 0, bins - 1);
    v(k) = heights(b);
  }
  return {Pdf::normalized(DiscreteFunction(grid, Eigen::MatrixXd(v))), lo, hi};
}

struct PdfTangentCoordinates {
  Srt mean;
  std::vector<TangentVector> tangents;
  std::optional<KarcherMeanResult> karcher;  // empty when the mean was supplied
};

/// SRT every PDF, take the Karcher mean (or `mean_override`) and map the
/// sample into its tangent space.
inline PdfTangentCoordinates pdf_tangent_coordinates(std::span<const Pdf> pdfs,
                                                     const std::optional<Srt>& mean_override = std::nullopt,
                                                     const KarcherOptions& opts = {}) {
  if (pdfs.size() < 2) throw_invalid("sample_size", "need at least 2 PDFs");
  std::vector<SpherePoint> psi;
  psi.reserve(pdfs.size());
  for (const auto& f : pdfs) {
    if (f.grid() != pdfs[0].grid()) throw_invalid("grid_mismatch", "PDFs must share a grid");
    psi.push_back(srt(f).point());
  }
  PdfTangentCoordinates out;
  if (mean_override) {
    out.mean = *mean_override;
  } else {
    auto km = karcher_mean(psi, opts);
    out.mean = Srt(km.mean);
    out.karcher = std::move(km);
  }
  out.tangents.reserve(psi.size());
  for (const auto& p : psi) out.tangents.push_back(log_map(out.mean.point(), p));
  return out;
}

/// PDFs [exp_mean(eps * v)]^2 along a tangent direction v at the mean.
inline std::vector<Pdf> pdf_variate_direction(const TangentVector& v, std::span<const double> epsilons) {
  const double len = v.norm();
  std::vector<Pdf> out;
  out.reserve(epsilons.size());
  for (double eps : epsilons) {
    if (std::abs(eps) * len >= std::numbers::pi) {
      throw_numerical("geodesic_overflow", "step " + std::to_string(eps) + " leaves the injectivity radius");
    }
    out.push_back(srt_inverse(exp_map(v.base(), eps * v.function())));
  }
  return out;
}

/// Same, for v = sum_i e_i w_i.
inline std::vector<Pdf> pdf_variate_direction(const SpherePoint& mean, const FpcBasis& basis,
                                              const Eigen::VectorXd& weights, std::span<const double> epsilons) {
  return pdf_variate_direction(TangentVector(mean, basis.combine(weights)), epsilons);
}

}  // namespace tfcca
