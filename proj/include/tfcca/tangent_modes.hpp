#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tfcca/density.hpp"
#include "tfcca/fpca.hpp"
#include "tfcca/shape.hpp"

namespace tfcca {

/// Where the tangent coordinates of the two groups live.
enum class TangentMode {
  kSeparate,   // per-group means and bases
  kPooled,     // one mean of the union, joint basis
  kTransport,  // per-group means, group A transported to group B's mean, joint basis
};

inline const char* to_string(TangentMode m) {
  switch (m) {
    case TangentMode::kSeparate: return "separate";
    case TangentMode::kPooled: return "pooled";
    case TangentMode::kTransport: return "transport";
  }
  return "separate";
}

inline TangentMode parse_tangent_mode(const std::string& s) {
  if (s == "separate") return TangentMode::kSeparate;
  if (s == "pooled") return TangentMode::kPooled;
  if (s == "transport") return TangentMode::kTransport;
  throw_invalid("tangent_mode", "unknown tangent mode '" + s + "' (separate|pooled|transport)");
}

using GroupData = std::variant<std::vector<Pdf>, std::vector<Curve>>;

inline bool is_shape(const GroupData& g) { return std::holds_alternative<std::vector<Curve>>(g); }
inline std::size_t group_size(const GroupData& g) {
  return std::visit([](const auto& v) { return v.size(); }, g);
}

struct PipelineOptions {
  RankRule rank_a = RankRule::explained(0.95);
  RankRule rank_b = RankRule::explained(0.95);
  KarcherOptions pdf_karcher;
  ShapeOptions shape;
  ShapeKarcherOptions shape_karcher;
  // Transport mode: fit one basis on the combined transported set (true), or
  // carry group A's own basis across with its data (false).
  bool transport_joint_basis = true;
};

/// Mean and tangent images of one sample (before any basis is chosen).
struct GroupGeometry {
  bool shape = false;
  SpherePoint mean;
  std::optional<Srvf> shape_mean;  // set for curves
  std::vector<TangentVector> tangents;
  int karcher_iterations = 0;
  double karcher_gradient_norm = 0.0;
  bool karcher_converged = true;
};

inline GroupGeometry fit_group_geometry(const GroupData& data, const PipelineOptions& opts) {
  GroupGeometry g;
  if (const auto* pdfs = std::get_if<std::vector<Pdf>>(&data)) {
    auto tc = pdf_tangent_coordinates(*pdfs, std::nullopt, opts.pdf_karcher);
    g.mean = tc.mean.point();
    g.tangents = std::move(tc.tangents);
    g.karcher_iterations = tc.karcher->iterations;
    g.karcher_gradient_norm = tc.karcher->final_gradient_norm;
    g.karcher_converged = tc.karcher->converged;
  } else {
    const auto& curves = std::get<std::vector<Curve>>(data);
    std::vector<Srvf> qs;
    qs.reserve(curves.size());
    for (const auto& c : curves) qs.push_back(srvf(c, opts.shape.closure_tol));
    auto km = shape_karcher_mean(qs, opts.shape, opts.shape_karcher);
    g.shape = true;
    g.mean = km.mean.point();
    g.shape_mean = km.mean;
    g.tangents = std::move(km.tangents);
    g.karcher_iterations = km.iterations;
    g.karcher_gradient_norm = km.final_gradient_norm;
    g.karcher_converged = km.converged;
  }
  return g;
}

/// One group's coordinates in the chosen mode.
struct GroupFit {
  GroupGeometry geometry;
  FpcBasis basis;  // joint basis (at the common base point) for pooled/transport
  CoeffMatrix coeffs;

  /// Tangent vector sum_i e_i w_i expressed at this group's own mean.
  TangentVector direction(const Eigen::VectorXd& weights) const {
    const TangentVector v(basis.base, basis.combine(weights));
    if (geodesic_distance(basis.base, geometry.mean) < 1e-14) return v;
    return parallel_transport(v, basis.base, geometry.mean);
  }
};

struct TangentModeResult {
  TangentMode mode = TangentMode::kSeparate;
  GroupFit a, b;
};

/// Builds coefficient matrices from per-group geometry (separate / transport).
inline TangentModeResult assemble_tangent_mode(const GroupGeometry& ga, const GroupGeometry& gb, TangentMode mode,
                                               const PipelineOptions& opts) {
  if (ga.tangents.size() != gb.tangents.size()) throw_invalid("sample_size", "groups must have equal sample sizes");
  TangentModeResult out;
  out.mode = mode;
  out.a.geometry = ga;
  out.b.geometry = gb;
  if (mode == TangentMode::kSeparate) {
    out.a.basis = fit_fpca(ga.tangents, opts.rank_a);
    out.b.basis = fit_fpca(gb.tangents, opts.rank_b);
    out.a.coeffs = coefficients(out.a.basis, ga.tangents, "separate:a");
    out.b.coeffs = coefficients(out.b.basis, gb.tangents, "separate:b");
    return out;
  }
  if (mode == TangentMode::kPooled) {
    throw_invalid("tangent_mode", "pooled mode needs the union sample; use tangent_mode_pipeline");
  }
  if (ga.shape != gb.shape) {
    throw_invalid("mixed_kinds", "transport mode needs both groups of the same object kind");
  }
  std::vector<TangentVector> moved;
  moved.reserve(ga.tangents.size());
  for (const auto& v : ga.tangents) moved.push_back(parallel_transport(v, ga.mean, gb.mean));
  if (!opts.transport_joint_basis) {
    FpcBasis own = fit_fpca(ga.tangents, opts.rank_a);
    for (auto& e : own.eigenfunctions) e = parallel_transport(TangentVector(ga.mean, e), ga.mean, gb.mean).function();
    own.base = gb.mean;
    out.a.basis = std::move(own);
    out.b.basis = fit_fpca(gb.tangents, opts.rank_b);
    out.a.coeffs = coefficients(out.a.basis, moved, "transport:a");
    out.b.coeffs = coefficients(out.b.basis, gb.tangents, "transport:b");
    return out;
  }
  std::vector<TangentVector> joint = moved;
  joint.insert(joint.end(), gb.tangents.begin(), gb.tangents.end());
  const FpcBasis basis = fit_fpca(joint, opts.rank_a);
  out.a.basis = basis;
  out.b.basis = basis;
  out.a.coeffs = coefficients(basis, moved, "transport:a");
  out.b.coeffs = coefficients(basis, gb.tangents, "transport:b");
  return out;
}

/// Full tangent-coordinate pipeline for two paired samples.
inline TangentModeResult tangent_mode_pipeline(const GroupData& a, const GroupData& b, TangentMode mode,
                                               const PipelineOptions& opts = {}) {
  if (group_size(a) != group_size(b)) throw_invalid("sample_size", "groups must have equal sample sizes");
  if (mode != TangentMode::kSeparate && is_shape(a) != is_shape(b)) {
    throw_invalid("mixed_kinds", std::string(to_string(mode)) +
                                     " mode cannot pair PDFs with curves; use separate tangent spaces");
  }
  if (mode != TangentMode::kPooled) {
    return assemble_tangent_mode(fit_group_geometry(a, opts), fit_group_geometry(b, opts), mode, opts);
  }

  const std::size_t n = group_size(a);
  GroupData pooled;
  if (is_shape(a)) {
    auto all = std::get<std::vector<Curve>>(a);
    const auto& bb = std::get<std::vector<Curve>>(b);
    all.insert(all.end(), bb.begin(), bb.end());
    pooled = std::move(all);
  } else {
    auto all = std::get<std::vector<Pdf>>(a);
    const auto& bb = std::get<std::vector<Pdf>>(b);
    all.insert(all.end(), bb.begin(), bb.end());
    pooled = std::move(all);
  }
  const GroupGeometry g = fit_group_geometry(pooled, opts);
  TangentModeResult out;
  out.mode = mode;
  const FpcBasis basis = fit_fpca(g.tangents, opts.rank_a);
  std::vector<TangentVector> ta(g.tangents.begin(), g.tangents.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<TangentVector> tb(g.tangents.begin() + static_cast<std::ptrdiff_t>(n), g.tangents.end());
  for (auto* fit : {&out.a, &out.b}) {
    fit->geometry.shape = g.shape;
    fit->geometry.mean = g.mean;
    fit->geometry.shape_mean = g.shape_mean;
    fit->geometry.karcher_iterations = g.karcher_iterations;
    fit->geometry.karcher_gradient_norm = g.karcher_gradient_norm;
    fit->geometry.karcher_converged = g.karcher_converged;
    fit->basis = basis;
  }
  out.a.geometry.tangents = std::move(ta);
  out.b.geometry.tangents = std::move(tb);
  out.a.coeffs = coefficients(basis, out.a.geometry.tangents, "pooled:a");
  out.b.coeffs = coefficients(basis, out.b.geometry.tangents, "pooled:b");
  return out;
}

}  // namespace tfcca
