#include <gtest/gtest.h>

#include "cli_harness.hpp"
#include "tfcca/app.hpp"

using harness::fs::path;
using harness::load;
using harness::slurp;
using harness::run_cli;

namespace {

// One simulated PDF pair and one curve pair shared by every test.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new path(harness::scratch("cli"));
    ASSERT_EQ(run_cli("simulate pdf --groups 1,2 --r 2 --n 40 --grid 300 --seed 5 --out-dir " + (*dir_ / "pdf").string(), *dir_).code, 0);
    ASSERT_EQ(run_cli("simulate shape --regime high --n 12 --grid 60 --seed 2 --out-dir " + (*dir_ / "shape").string(), *dir_).code, 0);
  }
  static void TearDownTestSuite() {
    harness::fs::remove_all(*dir_);
    delete dir_;
  }
  static path d() { return *dir_; }
  static std::string a() { return (*dir_ / "pdf" / "group_a.csv").string(); }
  static std::string b() { return (*dir_ / "pdf" / "group_b.csv").string(); }
  static std::string sa() { return (*dir_ / "shape" / "group_a.jsonl").string(); }
  static std::string sb() { return (*dir_ / "shape" / "group_b.jsonl").string(); }
  static path* dir_;
};
path* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, IdenticalInputsCorrelateFully) {
  const path out = d() / "same.json";
  ASSERT_EQ(run_cli("pdf-cca --input-a " + a() + " --input-b " + a() + " --rank 2 --out " + out.string(), d()).code, 0);
  for (const auto& c : load(out)["correlations"]) EXPECT_NEAR(c.get<double>(), 1.0, 1e-6);
}

TEST_F(Cli, SimulatedPairMatchesLibraryProtocol) {
  const path out = d() / "sim.json";
  ASSERT_EQ(run_cli("pdf-cca --input-a " + a() + " --input-b " + b() + " --rank 2 --out " + out.string(), d()).code, 0);
  const auto rep = load(out);
  const auto truth = load(d() / "pdf" / "truth.json")["truth"];
  ASSERT_EQ(rep["correlations"].size(), 2u);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(rep["correlations"][j].get<double>(), truth["rho_hat"][j].get<double>(), 1e-8);
  }
  EXPECT_EQ(rep["ranks"], nlohmann::json({2, 2}));
  EXPECT_EQ(rep["directions"].size(), 2u * 2u * 7u);
}

TEST_F(Cli, ZeroStepReturnsGroupMeans) {
  const path out = d() / "eps0.json";
  ASSERT_EQ(run_cli("pdf-cca --input-a " + a() + " --input-b " + b() + " --rank 2 --epsilons 0 --out " + out.string(), d()).code, 0);
  const auto rep = load(out);
  for (const auto& dir : rep["directions"]) {
    const auto& mean = rep["groups"][dir["group"].get<std::string>()]["mean"]["density"];
    const auto& dens = dir["table"]["density"];
    ASSERT_EQ(mean.size(), dens.size());
    for (std::size_t k = 0; k < dens.size(); ++k) EXPECT_NEAR(dens[k].get<double>(), mean[k].get<double>(), 1e-12);
  }
}

TEST_F(Cli, ReportRoundTripsAndValidates) {
  const path out = d() / "rt.json";
  ASSERT_EQ(run_cli("pdf-cca --input-a " + a() + " --input-b " + b() + " --explained 0.9 --out " + out.string() +
                      " --emit-csv " + (d() / "tables").string(),
                  d()).code,
            0);
  const std::string text = slurp(out);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(tfcca::app::serialize(j), text);
  EXPECT_NO_THROW(tfcca::app::validate_report(j));
  EXPECT_TRUE(harness::fs::exists(d() / "tables" / "direction_a_1.csv"));
  EXPECT_EQ(j["metadata"]["rank_rule"]["a"]["kind"], "explained");
}

TEST_F(Cli, DeterministicAcrossRunsAndThreads) {
  const std::string base = "pdf-cca --input-a " + a() + " --input-b " + b() + " --rank 2 --tangent-mode pooled";
  ASSERT_EQ(run_cli(base + " --threads 1 --out " + (d() / "t1.json").string(), d()).code, 0);
  ASSERT_EQ(run_cli(base + " --threads 1 --out " + (d() / "t1b.json").string(), d()).code, 0);
  ASSERT_EQ(run_cli(base + " --threads 3 --out " + (d() / "t3.json").string(), d()).code, 0);
  EXPECT_EQ(slurp(d() / "t1.json"), slurp(d() / "t1b.json"));
  EXPECT_EQ(slurp(d() / "t1.json"), slurp(d() / "t3.json"));
}

TEST_F(Cli, ShapeCommandIsDeterministic) {
  const std::string base = "shape-cca --input-a " + sa() + " --input-b " + sb() + " --rank 2 --grid 60 --tangent-mode transport";
  ASSERT_EQ(run_cli(base + " --threads 1 --out " + (d() / "s1.json").string(), d()).code, 0);
  ASSERT_EQ(run_cli(base + " --threads 2 --out " + (d() / "s2.json").string(), d()).code, 0);
  EXPECT_EQ(slurp(d() / "s1.json"), slurp(d() / "s2.json"));
  const auto rep = load(d() / "s1.json");
  EXPECT_EQ(rep["tangent_mode"], "transport");
  EXPECT_EQ(rep["directions"][0]["table"]["x"].size(), 60u);
}

TEST_F(Cli, CrossCcaForcesSeparate) {
  const auto r = run_cli("cross-cca --pdf-input " + a() + " --shape-input " + sa() + " --rank 2 --tangent-mode pooled --out " +
                           (d() / "x.json").string(),
                       d());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("invalid_input"), std::string::npos);
}

TEST_F(Cli, CvrEndpointAndSignal) {
  // y is an exact affine function of the first canonical variate of group a with itself.
  const path same = d() / "same_cvr.json";
  ASSERT_EQ(run_cli("pdf-cca --input-a " + a() + " --input-b " + a() + " --rank 2 --out " + same.string(), d()).code, 0);
  const auto rep = load(same);
  std::string resp = "id,value\n";
  for (std::size_t i = 0; i < rep["subjects"].size(); ++i) {
    const double v = rep["groups"]["a"]["variates"][0][i].get<double>();
    resp += rep["subjects"][i].get<std::string>() + "," + tfcca::io::format_number(2.0 * v + 1.0) + "\n";
  }
  harness::spit(d() / "y.csv", resp);
  const std::string cvr = "cvr --input-a " + a() + " --input-b " + a() + " --rank 2 --response " + (d() / "y.csv").string() +
                          " --response-transform none --repeats 10 --seed 3";
  ASSERT_EQ(run_cli(cvr + " --out " + (d() / "cvr1.json").string(), d()).code, 0);
  const auto c1 = load(d() / "cvr1.json");
  EXPECT_LT(c1["mse"]["mean"].get<double>(), 1e-4);
  ASSERT_EQ(run_cli(cvr + " --threads 2 --out " + (d() / "cvr2.json").string(), d()).code, 0);
  EXPECT_EQ(slurp(d() / "cvr1.json"), slurp(d() / "cvr2.json"));

  // eta = 1 reproduces the CCA correlations.
  ASSERT_EQ(run_cli("cvr --input-a " + a() + " --input-b " + b() + " --rank 2 --d 2 --response " + (d() / "y.csv").string() +
                      " --response-transform none --repeats 3 --eta-grid 1.0 --out " + (d() / "cvr_eta1.json").string(),
                  d()).code,
            0);
  ASSERT_EQ(run_cli("pdf-cca --input-a " + a() + " --input-b " + b() + " --rank 2 --out " + (d() / "ab.json").string(), d()).code, 0);
  const auto e1 = load(d() / "cvr_eta1.json"), ab = load(d() / "ab.json");
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(e1["fit"]["correlations"][j].get<double>(), ab["correlations"][j].get<double>(), 1e-3);
  }
  const std::string text = c1["c_index"]["text"];
  EXPECT_EQ(text.size(), std::string("0.000 (0.00)").size());
}

TEST_F(Cli, InputErrorsExitTwo) {
  auto expect_invalid = [&](const std::string& args, const std::string& reason) {
    const auto r = run_cli(args, d());
    EXPECT_EQ(r.code, 2) << args;
    EXPECT_NE(r.err.find("tfcca: error invalid_input " + reason), std::string::npos) << r.err;
  };
  const std::string out = " --out " + (d() / "bad.json").string();
  expect_invalid("pdf-cca --input-a " + (d() / "missing.csv").string() + " --input-b " + b() + out, "");
  harness::spit(d() / "ragged.csv", "grid,s1,s2\n0,1,1\n0.5,1\n1,1,1\n");
  expect_invalid("pdf-cca --input-a " + (d() / "ragged.csv").string() + " --input-b " + b() + out, "ragged_csv");
  harness::spit(d() / "other.csv", "grid,x1,x2\n0,1,1\n0.5,1,1\n1,1,1\n");
  expect_invalid("pdf-cca --input-a " + (d() / "other.csv").string() + " --input-b " + b() + out, "unmatched_id");
  expect_invalid("pdf-cca --input-a " + a() + " --input-b " + b() + " --tangent-mode sideways" + out, "tangent_mode");
  expect_invalid("shape-cca --input-a " + a() + " --input-b " + b() + out, "");
  expect_invalid("pdf-cca --input-a " + a() + " --input-b " + b() + " --rank 40" + out, "rank_infeasible");
  EXPECT_FALSE(harness::fs::exists(d() / "bad.json"));
}

TEST_F(Cli, NonConvergenceExitsThreeWhenStrict) {
  const std::string base = "pdf-cca --input-a " + a() + " --input-b " + b() + " --rank 2 --karcher-max-iter 1 --karcher-tol 1e-14";
  EXPECT_EQ(run_cli(base + " --out " + (d() / "lax.json").string(), d()).code, 0);
  EXPECT_EQ(load(d() / "lax.json")["groups"]["a"]["karcher"]["converged"], false);
  const auto r = run_cli(base + " --strict-convergence --out " + (d() / "strict.json").string(), d());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("tfcca: error numerical karcher_nonconvergence"), std::string::npos) << r.err;
}

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(run_cli("simulate pdf --groups 1,2 --r 2 --n 40 --grid 300 --seed 5 --threads 2 --out-dir " + (d() / "pdf2").string(), d()).code, 0);
  EXPECT_EQ(slurp(d() / "pdf" / "group_a.csv"), slurp(d() / "pdf2" / "group_a.csv"));
  EXPECT_EQ(slurp(d() / "pdf" / "truth.json"), slurp(d() / "pdf2" / "truth.json"));
}
