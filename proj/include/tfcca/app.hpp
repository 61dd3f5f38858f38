#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tfcca/cca.hpp"
#include "tfcca/cvr.hpp"
#include "tfcca/io.hpp"
#include "tfcca/simgen.hpp"
#include "tfcca/tangent_modes.hpp"

namespace tfcca::app {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchema = "tfcca.report/1";

struct AnalysisConfig {
  std::optional<int> rank;    // both groups unless rank_b is set
  std::optional<int> rank_b;
  std::optional<double> explained;
  TangentMode mode = TangentMode::kSeparate;
  std::vector<double> epsilons{-3, -2, -1, 0, 1, 2, 3};
  double ridge = 0.0;
  KarcherOptions karcher;
  ShapeOptions shape;
  ShapeKarcherOptions shape_karcher;
  int grid = 0;  // working grid for sample and curve input; 0 picks 1000 / 200
  int bins = 50;
  double floor = 1e-4;
  bool strict_convergence = false;
  // "sd": walk w/|w|^2, one standard deviation of the data along w per unit step.
  // "raw": walk the CCA weight vector itself.
  std::string direction_scale = "sd";
};

struct Dataset {
  std::string path;
  std::vector<std::string> ids;
  GroupData data;
  std::vector<std::pair<double, double>> rescale;
  bool from_samples = false;
};

inline const char* kind_name(const GroupData& g) { return is_shape(g) ? "curve" : "pdf"; }

inline int pdf_grid(const AnalysisConfig& c) { return c.grid > 0 ? c.grid : 1000; }
inline int curve_grid(const AnalysisConfig& c) { return c.grid > 0 ? c.grid : 200; }

inline Dataset load_dataset(const std::filesystem::path& path, const AnalysisConfig& cfg) {
  Dataset d;
  d.path = path.string();
  switch (io::detect_input_kind(path)) {
    case io::InputKind::kPdfCsv: {
      auto in = io::read_pdf_csv(path);
      d.ids = std::move(in.ids);
      d.data = std::move(in.pdfs);
      break;
    }
    case io::InputKind::kPdfSamples: {
      auto in = io::read_pdf_samples(path, Grid(pdf_grid(cfg)), cfg.bins, cfg.floor);
      d.ids = std::move(in.ids);
      d.data = std::move(in.pdfs);
      d.rescale = std::move(in.rescale);
      d.from_samples = true;
      break;
    }
    case io::InputKind::kCurves: {
      auto in = io::read_curves(path, curve_grid(cfg));
      d.ids = std::move(in.ids);
      d.data = std::move(in.curves);
      break;
    }
  }
  return d;
}

/// Reorders `b` to follow `a`'s subject order.
inline void pair_datasets(const Dataset& a, Dataset& b) {
  const auto perm = io::pair_by_id(a.ids, b.ids);
  b.ids = io::permute(b.ids, perm);
  if (!b.rescale.empty()) b.rescale = io::permute(b.rescale, perm);
  std::visit([&](auto& v) { v = io::permute(v, perm); }, b.data);
}

inline void require_kind(const Dataset& d, bool shape, const char* flag) {
  if (is_shape(d.data) != shape) {
    throw_invalid("input_kind", std::string(flag) + " must hold " + (shape ? "curves" : "PDFs") + ": " + d.path);
  }
}

// ---------------------------------------------------------------- json helpers

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Columns of m as a list of arrays.
inline json columns_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(to_json(m.col(j)));
  return a;
}

inline json grid_json(const Grid& g) {
  json a = json::array();
  for (int k = 0; k < g.size(); ++k) a.push_back(g.point(k));
  return a;
}

inline json pdf_table(const Pdf& p) {
  return {{"grid", grid_json(p.grid())}, {"density", to_json(p.function().values().col(0))}};
}

inline json curve_table(const Curve& c) {
  const auto& v = c.beta.values();
  return {{"t", grid_json(c.beta.grid())}, {"x", to_json(v.col(0))}, {"y", to_json(v.col(1))}};
}

inline json rank_rule_json(const RankRule& r) {
  if (r.kind == RankRule::Kind::kFixed) return {{"kind", "fixed"}, {"rank", r.rank}};
  return {{"kind", "explained"}, {"threshold", r.threshold}};
}

inline json karcher_json(const KarcherOptions& k) {
  return {{"step", k.step}, {"tol", k.tol}, {"max_iter", k.max_iter}};
}

inline json shape_json(const ShapeOptions& s, const ShapeKarcherOptions& k, int grid) {
  const Grid g(grid);
  return {{"grid", grid},
          {"dp_grid", s.effective_dp_grid(g)},
          {"seeds", s.effective_seeds(g)},
          {"prescreen", s.prescreen},
          {"rounds", s.rounds},
          {"refine_modes", s.refine_modes},
          {"refine_iter", s.refine_iter},
          {"closure_tol", s.closure_tol},
          {"projection_max_iter", s.projection_max_iter},
          {"karcher", {{"step", k.step}, {"tol", k.tol}, {"max_iter", k.max_iter}, {"max_halvings", k.max_halvings}}}};
}

inline RankRule rank_rule_for(const AnalysisConfig& cfg, bool shape, bool group_b) {
  if (group_b && cfg.rank_b) return RankRule::fixed(*cfg.rank_b);
  if (cfg.rank) return RankRule::fixed(*cfg.rank);
  if (cfg.explained) return RankRule::explained(*cfg.explained);
  return RankRule::explained(shape ? 0.80 : 0.95);
}

inline PipelineOptions pipeline_options(const AnalysisConfig& cfg, const Dataset& a, const Dataset& b) {
  PipelineOptions o;
  o.rank_a = rank_rule_for(cfg, is_shape(a.data), false);
  o.rank_b = rank_rule_for(cfg, is_shape(b.data), true);
  o.pdf_karcher = cfg.karcher;
  o.shape = cfg.shape;
  o.shape_karcher = cfg.shape_karcher;
  return o;
}

inline json metadata_json(const AnalysisConfig& cfg, const PipelineOptions& o, const Dataset& a, const Dataset& b) {
  json m;
  m["tool_version"] = kToolVersion;
  m["tangent_mode"] = to_string(cfg.mode);
  m["epsilons"] = cfg.epsilons;
  m["ridge"] = cfg.ridge;
  m["rank_rule"] = {{"a", rank_rule_json(o.rank_a)}, {"b", rank_rule_json(o.rank_b)}};
  m["strict_convergence"] = cfg.strict_convergence;
  m["direction_scale"] = cfg.direction_scale;
  m["inputs"] = {{"a", a.path}, {"b", b.path}};
  const bool any_pdf = !is_shape(a.data) || !is_shape(b.data);
  const bool any_shape = is_shape(a.data) || is_shape(b.data);
  if (any_pdf) m["pdf_karcher"] = karcher_json(cfg.karcher);
  if (any_shape) m["shape"] = shape_json(cfg.shape, cfg.shape_karcher, curve_grid(cfg));
  if (a.from_samples || b.from_samples) {
    m["density_estimation"] = {{"bins", cfg.bins}, {"floor", cfg.floor}, {"grid", pdf_grid(cfg)}};
  }
  return m;
}

struct Output {
  json report;
  std::vector<std::pair<std::string, std::string>> tables;  // file name, CSV text
};

inline std::string eps_label(double e) { return io::format_number(e); }

// One CSV per (group, variate): PDFs "grid,eps=..."; curves "t,x@eps,...,y@eps,...".
inline std::string direction_csv(const json& dirs, const std::vector<double>& eps) {
  std::string s;
  if (dirs[0]["table"].contains("density")) {
    s = "grid";
    for (double e : eps) s += ",eps=" + eps_label(e);
    s += "\n";
    const auto& grid = dirs[0]["table"]["grid"];
    for (std::size_t k = 0; k < grid.size(); ++k) {
      s += io::format_number(grid[k].get<double>());
      for (const auto& d : dirs) s += "," + io::format_number(d["table"]["density"][k].get<double>());
      s += "\n";
    }
    return s;
  }
  s = "t";
  for (double e : eps) s += ",x@eps=" + eps_label(e);
  for (double e : eps) s += ",y@eps=" + eps_label(e);
  s += "\n";
  const auto& t = dirs[0]["table"]["t"];
  for (std::size_t k = 0; k < t.size(); ++k) {
    s += io::format_number(t[k].get<double>());
    for (const auto& d : dirs) s += "," + io::format_number(d["table"]["x"][k].get<double>());
    for (const auto& d : dirs) s += "," + io::format_number(d["table"]["y"][k].get<double>());
    s += "\n";
  }
  return s;
}

inline json group_json(const GroupFit& fit, const Dataset& d) {
  json g;
  g["kind"] = kind_name(d.data);
  g["rank"] = fit.basis.rank;
  g["explained_fraction"] = fit.basis.explained_fraction;
  g["eigenvalues"] = to_json(fit.basis.eigenvalues.head(fit.basis.rank));
  g["total_variance"] = fit.basis.total_variance();
  g["coefficient_provenance"] = fit.coeffs.provenance;
  g["karcher"] = {{"iterations", fit.geometry.karcher_iterations},
                  {"gradient_norm", fit.geometry.karcher_gradient_norm},
                  {"converged", fit.geometry.karcher_converged}};
  if (is_shape(d.data)) {
    g["mean"] = curve_table(srvf_inverse(*fit.geometry.shape_mean));
  } else {
    g["mean"] = pdf_table(srt_inverse(fit.geometry.mean));
  }
  if (!d.rescale.empty()) {
    json r = json::array();
    for (const auto& [lo, hi] : d.rescale) r.push_back({lo, hi});
    g["rescale"] = r;
  }
  return g;
}

inline void check_convergence(const TangentModeResult& res, const AnalysisConfig& cfg) {
  if (!cfg.strict_convergence) return;
  for (const auto* f : {&res.a, &res.b}) {
    if (!f->geometry.karcher_converged) {
      throw_numerical("karcher_nonconvergence", "Karcher mean stopped at gradient norm " +
                                                    io::format_number(f->geometry.karcher_gradient_norm));
    }
  }
}

/// Shared core of pdf-cca, shape-cca and cross-cca.
inline Output run_cca_command(const std::string& command, const Dataset& a, Dataset b, const AnalysisConfig& cfg) {
  pair_datasets(a, b);
  if (cfg.mode != TangentMode::kSeparate && is_shape(a.data) != is_shape(b.data)) {
    throw_invalid("mixed_kinds", std::string(to_string(cfg.mode)) +
                                     " tangent mode cannot pair PDFs with curves; use separate");
  }
  const PipelineOptions opts = pipeline_options(cfg, a, b);
  const TangentModeResult res = tangent_mode_pipeline(a.data, b.data, cfg.mode, opts);
  check_convergence(res, cfg);
  const CcaResult cc = cca(res.a.coeffs.values, res.b.coeffs.values, cfg.ridge);

  Output out;
  json& r = out.report;
  r["schema"] = kSchema;
  r["command"] = command;
  r["tool_version"] = kToolVersion;
  r["tangent_mode"] = to_string(cfg.mode);
  r["subjects"] = a.ids;
  r["ranks"] = {res.a.basis.rank, res.b.basis.rank};
  r["correlations"] = to_json(cc.correlations);
  r["groups"]["a"] = group_json(res.a, a);
  r["groups"]["b"] = group_json(res.b, b);
  r["groups"]["a"]["weights"] = columns_json(cc.weights_1);
  r["groups"]["b"]["weights"] = columns_json(cc.weights_2);
  r["groups"]["a"]["variates"] = columns_json(cc.variates_1);
  r["groups"]["b"]["variates"] = columns_json(cc.variates_2);

  json dirs = json::array();
  const Eigen::Index m = cc.correlations.size();
  for (const char* g : {"a", "b"}) {
    const bool is_a = g[0] == 'a';
    const GroupFit& fit = is_a ? res.a : res.b;
    const Eigen::MatrixXd& w = is_a ? cc.weights_1 : cc.weights_2;
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::VectorXd wj = w.col(j);
      if (cfg.direction_scale == "sd") wj /= wj.squaredNorm();
      const TangentVector v = fit.direction(wj);
      json per = json::array();
      if (fit.geometry.shape) {
        const auto curves = shape_variate_direction(*fit.geometry.shape_mean, v, cfg.epsilons, cfg.shape);
        for (std::size_t e = 0; e < curves.size(); ++e) {
          per.push_back({{"group", g}, {"variate", j + 1}, {"epsilon", cfg.epsilons[e]}, {"table", curve_table(curves[e])}});
        }
      } else {
        const auto pdfs = pdf_variate_direction(v, cfg.epsilons);
        for (std::size_t e = 0; e < pdfs.size(); ++e) {
          per.push_back({{"group", g}, {"variate", j + 1}, {"epsilon", cfg.epsilons[e]}, {"table", pdf_table(pdfs[e])}});
        }
      }
      if (!per.empty()) {
        out.tables.emplace_back("direction_" + std::string(g) + "_" + std::to_string(j + 1) + ".csv",
                                direction_csv(per, cfg.epsilons));
      }
      for (auto& d : per) dirs.push_back(std::move(d));
    }
  }
  r["directions"] = std::move(dirs);
  r["metadata"] = metadata_json(cfg, opts, a, b);
  return out;
}

// ---------------------------------------------------------------- cvr

struct CvrConfig {
  int d = 1;
  std::vector<double> eta_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double train_fraction = 0.8;
  int repeats = 100;
  std::uint64_t seed = 0;
  bool log_response = true;
  CvrOptions fit;
};

inline std::string mean_sd_text(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f (%.2f)", mean, sd);
  return buf;
}

inline Output run_cvr_command(const Dataset& a, Dataset b, const std::map<std::string, double>& response,
                              const std::string& response_path, const AnalysisConfig& cfg, const CvrConfig& cv) {
  pair_datasets(a, b);
  if (cfg.mode != TangentMode::kSeparate && is_shape(a.data) != is_shape(b.data)) {
    throw_invalid("mixed_kinds", std::string(to_string(cfg.mode)) +
                                     " tangent mode cannot pair PDFs with curves; use separate");
  }
  Eigen::VectorXd raw(static_cast<Eigen::Index>(a.ids.size()));
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    const auto it = response.find(a.ids[i]);
    if (it == response.end()) throw_invalid("unmatched_id", "no response for subject '" + a.ids[i] + "'");
    raw(static_cast<Eigen::Index>(i)) = it->second;
  }
  if (response.size() != a.ids.size()) throw_invalid("unmatched_id", "response file has subjects not in the inputs");
  Eigen::VectorXd y = raw;
  if (cv.log_response) {
    if ((raw.array() <= 0.0).any()) throw_invalid("nonpositive_response", "log transform needs positive responses");
    y = raw.array().log().matrix();
  }

  const PipelineOptions opts = pipeline_options(cfg, a, b);
  const TangentModeResult res = tangent_mode_pipeline(a.data, b.data, cfg.mode, opts);
  check_convergence(res, cfg);
  const Eigen::MatrixXd& C1 = res.a.coeffs.values;
  const Eigen::MatrixXd& C2 = res.b.coeffs.values;

  const auto cvres = cvr_cross_validate(C1, C2, y, cv.d, cv.eta_grid, cv.train_fraction, cv.repeats, cv.seed, cv.fit);
  const CvrResult fit = cvr_fit(C1, C2, y, cv.d, cvres.trace.chosen_eta, cv.fit);
  const Eigen::MatrixXd Z1 = fit.variates(1, C1), Z2 = fit.variates(2, C2);
  Eigen::VectorXd corr(cv.d);
  for (int j = 0; j < cv.d; ++j) {
    const Eigen::VectorXd u = Z1.col(j).array() - Z1.col(j).mean();
    const Eigen::VectorXd w = Z2.col(j).array() - Z2.col(j).mean();
    corr(j) = u.dot(w) / (u.norm() * w.norm());
  }

  Output out;
  json& r = out.report;
  r["schema"] = kSchema;
  r["command"] = "cvr";
  r["tool_version"] = kToolVersion;
  r["tangent_mode"] = to_string(cfg.mode);
  r["subjects"] = a.ids;
  r["ranks"] = {res.a.basis.rank, res.b.basis.rank};
  r["groups"]["a"] = group_json(res.a, a);
  r["groups"]["b"] = group_json(res.b, b);
  r["d"] = cv.d;
  r["cv"] = {{"eta_grid", cvres.trace.eta_grid}, {"mse", cvres.trace.mse}, {"chosen_eta", cvres.trace.chosen_eta}};
  json reps = json::array();
  for (const auto& rep : cvres.repeats) {
    reps.push_back({{"chosen_eta", rep.chosen_eta}, {"mse", rep.mse}, {"c_index", rep.c_index}, {"test_rows", rep.test_rows}});
  }
  r["repeats"] = std::move(reps);
  r["mse"] = {{"mean", cvres.mse_mean}, {"sd", cvres.mse_sd}, {"text", mean_sd_text(cvres.mse_mean, cvres.mse_sd)}};
  r["c_index"] = {{"mean", cvres.c_index_mean},
                  {"sd", cvres.c_index_sd},
                  {"text", mean_sd_text(cvres.c_index_mean, cvres.c_index_sd)}};
  r["fit"] = {{"eta", fit.eta},
              {"alpha", fit.alpha},
              {"beta", to_json(fit.beta)},
              {"correlations", to_json(corr)},
              {"weights", {{"a", columns_json(fit.weights_1)}, {"b", columns_json(fit.weights_2)}}},
              {"converged", fit.converged},
              {"iterations", static_cast<int>(fit.objective_trace.size()) - 1}};
  json meta = metadata_json(cfg, opts, a, b);
  meta["response"] = {{"path", response_path}, {"transform", cv.log_response ? "log" : "none"}};
  meta["cv"] = {{"train_fraction", cv.train_fraction},
                {"repeats", cv.repeats},
                {"seed", cv.seed},
                {"tol", cv.fit.tol},
                {"max_iter", cv.fit.max_iter}};
  meta.erase("epsilons");
  r["metadata"] = std::move(meta);
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateConfig {
  std::string kind = "pdf";  // pdf | shape
  int group_a = 1, group_b = 2;
  int r = 2;
  PdfRecoveryMode pdf_mode = PdfRecoveryMode::kSeparate;
  CurveRegime regime = CurveRegime::kHigh;
  int n = 100;
  int grid = 0;
  std::uint64_t seed = 0;
};

/// Data files plus a ground-truth sidecar. PDF output is the re-synthesized
/// pair from the recovery protocol; its sidecar carries both correlation vectors.
inline Output run_simulate(const SimulateConfig& sc) {
  Output out;
  json& r = out.report;
  r["schema"] = kSchema;
  r["command"] = "simulate";
  r["tool_version"] = kToolVersion;
  std::vector<std::string> ids;
  for (int i = 0; i < sc.n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%03d", i + 1);
    ids.emplace_back(buf);
  }
  r["subjects"] = ids;
  if (sc.kind == "pdf") {
    PdfRecoverySpec spec;
    spec.group_a = sc.group_a;
    spec.group_b = sc.group_b;
    spec.r = sc.r;
    spec.mode = sc.pdf_mode;
    spec.n = sc.n;
    spec.grid = sc.grid > 0 ? sc.grid : 1000;
    spec.seed = sc.seed;
    const PdfRecovery rec = recovery_protocol_pdf(spec);
    const Grid grid(spec.grid);
    out.tables.emplace_back("group_a.csv", io::pdf_csv(grid, ids, rec.synth_a));
    out.tables.emplace_back("group_b.csv", io::pdf_csv(grid, ids, rec.synth_b));
    r["kind"] = "pdf";
    r["truth"] = {{"rho_truth", to_json(rec.rho_truth)},
                  {"rho_hat", to_json(rec.rho_hat)},
                  {"latent_a", columns_json(rec.latent.x1)},
                  {"latent_b", columns_json(rec.latent.x2)}};
    r["metadata"] = {{"groups", {sc.group_a, sc.group_b}},
                     {"r", sc.r},
                     {"mode", sc.pdf_mode == PdfRecoveryMode::kPooled ? "pooled" : "separate"},
                     {"n", sc.n},
                     {"grid", spec.grid},
                     {"seed", sc.seed},
                     {"latent_scale", spec.latent_scale},
                     {"targets", to_json(default_targets(sc.r))}};
  } else if (sc.kind == "shape") {
    CurveSimSpec spec;
    spec.regime = sc.regime;
    spec.n = sc.n;
    spec.grid = sc.grid > 0 ? sc.grid : 200;
    spec.seed = sc.seed;
    const CurveGroups g = gen_curve_groups(spec);
    out.tables.emplace_back("group_a.jsonl", io::curves_jsonl(ids, g.group_1));
    out.tables.emplace_back("group_b.jsonl", io::curves_jsonl(ids, g.group_2));
    r["kind"] = "shape";
    r["truth"] = {{"latent_correlation", g.latent_correlation},
                  {"peak_a", to_json(g.peak_1)},
                  {"peak_b", to_json(g.peak_2)}};
    r["metadata"] = {{"regime", to_string(sc.regime)},
                     {"n", sc.n},
                     {"grid", spec.grid},
                     {"seed", sc.seed},
                     {"amplitude", spec.amplitude},
                     {"kappa", spec.kappa},
                     {"kappa_range", {spec.kappa_lo, spec.kappa_hi}},
                     {"second_peak", spec.second_peak},
                     {"spread", {spec.spread_1, spec.spread_2}}};
  } else {
    throw_invalid("simulate_kind", "simulate needs 'pdf' or 'shape'");
  }
  return out;
}

// ---------------------------------------------------------------- validation

inline void require_field(const json& j, const char* key, json::value_t type, const std::string& where) {
  const bool ok = j.contains(key) && (j[key].type() == type ||
                                      (type == json::value_t::number_float && j[key].is_number()));
  if (!ok) throw_numerical("report_schema", where + " lacks a valid '" + key + "'");
}

inline bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_array() || j.is_object()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return !j.is_null();
}

/// Structural check run before any report is written.
inline void validate_report(const json& r) {
  using vt = json::value_t;
  require_field(r, "schema", vt::string, "report");
  require_field(r, "command", vt::string, "report");
  require_field(r, "tool_version", vt::string, "report");
  require_field(r, "metadata", vt::object, "report");
  require_field(r, "subjects", vt::array, "report");
  if (!all_finite(r)) throw_numerical("report_schema", "report contains non-finite or null values");
  const std::string cmd = r["command"];
  if (cmd == "simulate") {
    require_field(r, "truth", vt::object, "report");
    return;
  }
  require_field(r, "groups", vt::object, "report");
  require_field(r, "ranks", vt::array, "report");
  for (const char* g : {"a", "b"}) {
    const std::string where = std::string("group ") + g;
    require_field(r["groups"], g, vt::object, "report");
    const json& gj = r["groups"][g];
    require_field(gj, "eigenvalues", vt::array, where);
    require_field(gj, "mean", vt::object, where);
  }
  if (cmd == "cvr") {
    require_field(r, "cv", vt::object, "report");
    require_field(r, "mse", vt::object, "report");
    require_field(r, "c_index", vt::object, "report");
    require_field(r, "fit", vt::object, "report");
    return;
  }
  require_field(r, "correlations", vt::array, "report");
  require_field(r, "directions", vt::array, "report");
  double prev = 1.0;
  for (const auto& c : r["correlations"]) {
    const double v = c.get<double>();
    if (v < 0.0 || v > 1.0 || v > prev) throw_numerical("report_schema", "correlations must be nonincreasing in [0,1]");
    prev = v;
  }
  for (const auto& d : r["directions"]) {
    require_field(d, "table", vt::object, "direction");
    const json& t = d["table"];
    const std::size_t n = t.contains("grid") ? t["grid"].size() : t["t"].size();
    for (const auto& [k, v] : t.items()) {
      if (v.size() != n) throw_numerical("report_schema", "direction table column '" + k + "' is not on its grid");
    }
  }
}

inline std::string serialize(const json& r) { return r.dump(1) + "\n"; }

/// Validates, then writes the report and any CSV tables atomically.
inline void write_output(const Output& o, const std::filesystem::path& report_path,
                         const std::optional<std::filesystem::path>& table_dir) {
  validate_report(o.report);
  if (table_dir) {
    for (const auto& [name, text] : o.tables) io::write_atomic(*table_dir / name, text);
  }
  io::write_atomic(report_path, serialize(o.report));
}

}  // namespace tfcca::app
