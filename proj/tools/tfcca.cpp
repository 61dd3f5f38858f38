// tfcca: batch front end for tangent functional CCA on PDFs and closed curves.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure. Failures print
// one line "tfcca: error <kind> <reason>: <message>" on stderr.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tfcca/app.hpp"
#include "tfcca/parallel.hpp"

namespace {

using namespace tfcca;

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = io::trim(item);
    if (item.empty()) continue;
    out.push_back(io::parse_number(item, flag));
  }
  if (out.empty()) throw_invalid("empty_list", std::string(flag) + " needs at least one value");
  return out;
}

struct Common {
  std::string out;
  std::string emit_csv;
  std::string tangent_mode = "separate";
  std::string epsilons = "-3,-2,-1,0,1,2,3";
  int threads = 0;
};

void add_analysis_flags(CLI::App* cmd, app::AnalysisConfig& cfg, Common& c, bool shape_flags) {
  cmd->add_option("--out", c.out, "report path (JSON)")->required();
  cmd->add_option("--emit-csv", c.emit_csv, "directory for per-direction CSV tables");
  auto* rank = cmd->add_option("--rank", cfg.rank, "fixed number of FPCs per group")->check(CLI::PositiveNumber);
  cmd->add_option("--rank-b", cfg.rank_b, "fixed rank for group b (defaults to --rank)")->check(CLI::PositiveNumber);
  auto* expl = cmd->add_option("--explained", cfg.explained, "smallest rank reaching this explained fraction")
                   ->check(CLI::Range(0.0, 1.0));
  rank->excludes(expl);
  cmd->add_option("--tangent-mode", c.tangent_mode, "separate | pooled | transport");
  cmd->add_option("--epsilons", c.epsilons, "comma-separated steps along each variate direction");
  cmd->add_option("--direction-scale", cfg.direction_scale, "sd: unit step = one data sd along the weights; raw: CCA weights")
      ->check(CLI::IsMember({"sd", "raw"}));
  cmd->add_option("--ridge", cfg.ridge, "CCA ridge (0 = classical)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", c.threads, "worker thread cap (0 = default)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--grid", cfg.grid, "working grid for sample or curve input");
  cmd->add_option("--bins", cfg.bins, "histogram bins for sample input")->check(CLI::PositiveNumber);
  cmd->add_option("--floor", cfg.floor, "density floor added per bin")->check(CLI::NonNegativeNumber);
  cmd->add_option("--karcher-step", cfg.karcher.step, "PDF Karcher step");
  cmd->add_option("--karcher-tol", cfg.karcher.tol, "PDF Karcher gradient tolerance");
  cmd->add_option("--karcher-max-iter", cfg.karcher.max_iter, "PDF Karcher iteration cap");
  cmd->add_flag("--strict-convergence", cfg.strict_convergence, "fail (exit 3) if a Karcher mean does not converge");
  if (shape_flags) {
    cmd->add_option("--dp-grid", cfg.shape.dp_grid, "DP lattice size (0 = curve grid)");
    cmd->add_option("--seeds", cfg.shape.seeds, "starting-point seeds (0 = grid/10)");
    cmd->add_option("--prescreen", cfg.shape.prescreen, "seeds kept for DP after ranking (0 = all)");
    cmd->add_option("--rounds", cfg.shape.rounds, "rotation/warp refinement rounds");
    cmd->add_option("--refine-modes", cfg.shape.refine_modes, "Fourier modes for the smooth warp polish (0 = off)");
    cmd->add_option("--refine-iter", cfg.shape.refine_iter, "warp polish iteration cap");
    cmd->add_option("--closure-tol", cfg.shape.closure_tol, "closure residual tolerance");
    cmd->add_option("--projection-max-iter", cfg.shape.projection_max_iter, "pre-shape projection iteration cap");
    cmd->add_option("--shape-karcher-step", cfg.shape_karcher.step, "shape Karcher step");
    cmd->add_option("--shape-karcher-tol", cfg.shape_karcher.tol, "shape Karcher gradient tolerance");
    cmd->add_option("--shape-karcher-max-iter", cfg.shape_karcher.max_iter, "shape Karcher iteration cap");
  }
}

void finish_config(app::AnalysisConfig& cfg, const Common& c) {
  cfg.mode = parse_tangent_mode(c.tangent_mode);
  cfg.epsilons = parse_list(c.epsilons, "--epsilons");
  if (c.threads > 0) set_thread_count(c.threads);
}

std::optional<std::filesystem::path> csv_dir(const Common& c) {
  if (c.emit_csv.empty()) return std::nullopt;
  return std::filesystem::path(c.emit_csv);
}

int fail(const char* kind, const std::string& reason, const std::string& msg, int code) {
  std::string line = msg;
  for (auto& ch : line) {
    if (ch == '\n') ch = ' ';
  }
  std::fprintf(stderr, "tfcca: error %s %s: %s\n", kind, reason.c_str(), line.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Tangent functional CCA for PDFs and closed planar curves"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", app::kToolVersion);

  app::AnalysisConfig cfg;
  Common common;
  std::string in_a, in_b, response;

  auto* pdf = cli.add_subcommand("pdf-cca", "CCA between two paired samples of PDFs");
  pdf->add_option("--input-a", in_a, "CSV or JSON-lines PDFs")->required()->check(CLI::ExistingFile);
  pdf->add_option("--input-b", in_b, "CSV or JSON-lines PDFs")->required()->check(CLI::ExistingFile);
  add_analysis_flags(pdf, cfg, common, false);

  auto* shape = cli.add_subcommand("shape-cca", "CCA between two paired samples of closed curves");
  shape->add_option("--input-a", in_a, "JSON-lines curves")->required()->check(CLI::ExistingFile);
  shape->add_option("--input-b", in_b, "JSON-lines curves")->required()->check(CLI::ExistingFile);
  add_analysis_flags(shape, cfg, common, true);

  auto* cross = cli.add_subcommand("cross-cca", "CCA between paired PDFs and curves (separate tangent spaces)");
  cross->add_option("--pdf-input", in_a, "CSV or JSON-lines PDFs")->required()->check(CLI::ExistingFile);
  cross->add_option("--shape-input", in_b, "JSON-lines curves")->required()->check(CLI::ExistingFile);
  add_analysis_flags(cross, cfg, common, true);

  app::CvrConfig cv;
  std::string eta_grid = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  std::string response_transform = "log";
  auto* cvr = cli.add_subcommand("cvr", "canonical variate regression with cross-validated eta");
  cvr->add_option("--input-a", in_a, "PDF or curve input")->required()->check(CLI::ExistingFile);
  cvr->add_option("--input-b", in_b, "PDF or curve input")->required()->check(CLI::ExistingFile);
  cvr->add_option("--response", response, "CSV id,value (e.g. survival months)")->required()->check(CLI::ExistingFile);
  cvr->add_option("--response-transform", response_transform, "log | none");
  cvr->add_option("--d", cv.d, "number of canonical variates")->check(CLI::PositiveNumber);
  cvr->add_option("--eta-grid", eta_grid, "comma-separated eta values in [0,1]");
  cvr->add_option("--splits", cv.train_fraction, "training fraction per split")->check(CLI::Range(0.0, 1.0));
  cvr->add_option("--repeats", cv.repeats, "number of random splits")->check(CLI::PositiveNumber);
  cvr->add_option("--seed", cv.seed, "split RNG seed");
  cvr->add_option("--cvr-tol", cv.fit.tol, "relative objective decrease tolerance");
  cvr->add_option("--cvr-max-iter", cv.fit.max_iter, "CVR iteration cap");
  add_analysis_flags(cvr, cfg, common, true);
  cvr->remove_option(cvr->get_option("--epsilons"));
  cvr->remove_option(cvr->get_option("--emit-csv"));
  cvr->remove_option(cvr->get_option("--direction-scale"));

  app::SimulateConfig sc;
  std::string sim_kind, groups = "1,2", regime = "high", sim_mode = "separate", out_dir;
  int sim_threads = 0;
  auto* sim = cli.add_subcommand("simulate", "write simulated groups and a ground-truth sidecar");
  sim->add_option("kind", sim_kind, "pdf | shape")->required()->check(CLI::IsMember({"pdf", "shape"}));
  sim->add_option("--groups", groups, "PDF group pair, e.g. 1,2");
  sim->add_option("--r", sc.r, "latent dimension for PDFs")->check(CLI::PositiveNumber);
  sim->add_option("--mode", sim_mode, "separate | pooled (PDFs)");
  sim->add_option("--regime", regime, "high | moderate | weak (curves)");
  sim->add_option("--n", sc.n, "samples per group")->check(CLI::PositiveNumber);
  sim->add_option("--grid", sc.grid, "grid size (default 1000 PDFs, 200 curves)");
  sim->add_option("--seed", sc.seed, "RNG seed");
  sim->add_option("--out-dir", out_dir, "output directory")->required();
  sim->add_option("--threads", sim_threads, "worker thread cap")->check(CLI::NonNegativeNumber);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("invalid_input", "bad_arguments", e.what(), 2);
  }

  try {
    if (sim->parsed()) {
      if (sim_threads > 0) set_thread_count(sim_threads);
      sc.kind = sim_kind;
      const auto g = parse_list(groups, "--groups");
      if (g.size() != 2) throw_invalid("groups", "--groups needs two group ids");
      sc.group_a = static_cast<int>(g[0]);
      sc.group_b = static_cast<int>(g[1]);
      if (sim_mode == "pooled") {
        sc.pdf_mode = PdfRecoveryMode::kPooled;
      } else if (sim_mode != "separate") {
        throw_invalid("mode", "--mode must be separate or pooled");
      }
      sc.regime = parse_regime(regime);
      const auto out = app::run_simulate(sc);
      const std::filesystem::path dir(out_dir);
      app::write_output(out, dir / "truth.json", dir);
      return 0;
    }

    finish_config(cfg, common);
    if (pdf->parsed() || shape->parsed() || cross->parsed()) {
      const std::string command = pdf->parsed() ? "pdf-cca" : shape->parsed() ? "shape-cca" : "cross-cca";
      if (cross->parsed() && cfg.mode != TangentMode::kSeparate) {
        throw_invalid("mixed_kinds", "cross-cca pairs PDFs with curves; only separate tangent spaces apply");
      }
      const app::Dataset a = app::load_dataset(in_a, cfg);
      app::Dataset b = app::load_dataset(in_b, cfg);
      const bool shape_a = command == "shape-cca";
      const bool shape_b = command != "pdf-cca";
      app::require_kind(a, shape_a, command == "cross-cca" ? "--pdf-input" : "--input-a");
      app::require_kind(b, shape_b, command == "cross-cca" ? "--shape-input" : "--input-b");
      const auto out = app::run_cca_command(command, a, std::move(b), cfg);
      app::write_output(out, common.out, csv_dir(common));
      return 0;
    }
    if (cvr->parsed()) {
      cv.eta_grid = parse_list(eta_grid, "--eta-grid");
      if (response_transform == "none") {
        cv.log_response = false;
      } else if (response_transform != "log") {
        throw_invalid("response_transform", "--response-transform must be log or none");
      }
      const app::Dataset a = app::load_dataset(in_a, cfg);
      app::Dataset b = app::load_dataset(in_b, cfg);
      const auto resp = io::read_response(response);
      const auto out = app::run_cvr_command(a, std::move(b), resp, response, cfg, cv);
      app::write_output(out, common.out, std::nullopt);
      return 0;
    }
  } catch (const Error& e) {
    const bool input = e.kind() == ErrorKind::kInvalidInput;
    return fail(input ? "invalid_input" : "numerical", e.reason(), e.what(), input ? 2 : 3);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("invalid_input", "filesystem", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("numerical", "internal", e.what(), 3);
  }
  return 0;
}
