// End-to-end checks of the command-line binary. The binary path arrives
// through PDSPLIT_BIN (set by the test harness).

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "pdsplit/config.hpp"
#include "pdsplit/diagnostics.hpp"
#include "pdsplit/trace.hpp"

using namespace pdsplit;

namespace {

std::string binary() {
  const char* bin = std::getenv("PDSPLIT_BIN");
  if (!bin) throw std::runtime_error("PDSPLIT_BIN not set");
  return bin;
}

int exit_code(int system_status) {
  return WIFEXITED(system_status) ? WEXITSTATUS(system_status) : -1;
}

int run_cli(const std::string& args) {
  std::string cmd = binary() + " " + args + " >/tmp/pdsplit_cli_out.txt 2>&1";
  return exit_code(std::system(cmd.c_str()));
}

std::string cli_output() {
  std::ifstream in("/tmp/pdsplit_cli_out.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kQuadConfig = R"({
  "problem": {
    "type": "custom",
    "primal_dims": [2, 2],
    "dual_dims": [2, 2],
    "L": [{"i": 0, "j": 0, "matrix": [[1.0, 0.2], [0.0, 0.8]]},
          {"i": 1, "j": 1, "matrix": [[0.7, 0.0], [0.3, 1.1]]},
          {"i": 1, "j": 0, "matrix": [[0.4, 0.0], [0.0, 0.4]]}],
    "g": [{"type": "quadratic_diag", "diag": [1.0, 1.0]},
          {"type": "quadratic_diag", "diag": [1.0, 1.0]}],
    "h": [{"type": "squared_loss", "targets": [1.0, -2.0]},
          {"type": "squared_loss", "targets": [0.5, 1.5]}]
  },
  "algorithm": "ahu",
  "schedule": {"kind": "uniform_random", "B": 1, "seed": 3},
  "stepsize": {"mode": "rate"},
  "iters": 1500,
  "seed": 5,
  "kkt_every": 50,
  "output": "/tmp/pdsplit_cli_trace.csv"
})";

}  // namespace

TEST(Cli, RunProducesTraceWithFinalKkt) {
  write_file("/tmp/pdsplit_cli_cfg.json", kQuadConfig);
  int rc = run_cli("run --config /tmp/pdsplit_cli_cfg.json");
  EXPECT_EQ(rc, 0) << cli_output();
  auto rows = read_trace("/tmp/pdsplit_cli_trace.csv");
  EXPECT_EQ(rows.size(), 1501u);
  EXPECT_FALSE(std::isnan(rows.back().kkt));
  EXPECT_LE(rows.back().kkt, 1e-8);
}

TEST(Cli, SynchronousAutoRunReachesTightKkt) {
  std::string cfg(kQuadConfig);
  auto pos = cfg.find("\"uniform_random\", \"B\": 1");
  ASSERT_NE(pos, std::string::npos);
  cfg.replace(pos, std::string("\"uniform_random\", \"B\": 1").size(),
              "\"none\", \"B\": 0");
  pos = cfg.find("\"mode\": \"rate\"");
  cfg.replace(pos, std::string("\"mode\": \"rate\"").size(),
              "\"mode\": \"auto\"");
  write_file("/tmp/pdsplit_sync_cfg.json", cfg);
  ASSERT_EQ(run_cli("run --config /tmp/pdsplit_sync_cfg.json "
                    "--out /tmp/tr_sync.csv"),
            0)
      << cli_output();
  auto rows = read_trace("/tmp/tr_sync.csv");
  EXPECT_LE(rows.back().kkt, 1e-8);
}

TEST(Cli, DeterministicRerunsAreByteIdentical) {
  write_file("/tmp/pdsplit_cli_cfg.json", kQuadConfig);
  ASSERT_EQ(run_cli("run --config /tmp/pdsplit_cli_cfg.json --out /tmp/tr_a.csv"), 0)
      << cli_output();
  ASSERT_EQ(run_cli("run --config /tmp/pdsplit_cli_cfg.json --out /tmp/tr_b.csv"), 0)
      << cli_output();
  EXPECT_EQ(slurp("/tmp/tr_a.csv"), slurp("/tmp/tr_b.csv"));
  ASSERT_EQ(run_cli("run --config /tmp/pdsplit_cli_cfg.json --seed 9 "
                    "--out /tmp/tr_c.csv"),
            0);
  EXPECT_NE(slurp("/tmp/tr_a.csv"), slurp("/tmp/tr_c.csv"));
}

TEST(Cli, CheckAcceptsHonestTraceAndFlagsDoubledC) {
  write_file("/tmp/pdsplit_cli_cfg.json", kQuadConfig);
  ASSERT_EQ(run_cli("run --config /tmp/pdsplit_cli_cfg.json --out /tmp/tr_ok.csv"), 0);
  EXPECT_EQ(run_cli("check --trace /tmp/tr_ok.csv --config /tmp/pdsplit_cli_cfg.json"),
            0)
      << cli_output();

  // Tamper the certificate: rerun the same experiment but emit the
  // envelope column from an inflated contraction factor.
  ExperimentConfig cfg = load_config("/tmp/pdsplit_cli_cfg.json");
  BuiltProblem built = build_problem(cfg);
  ProblemConstants cst = compute_constants(built.spec);
  RatePlan rp = rate_constants_deterministic(cst, cfg.schedule.B);
  PrimalDualPoint zs =
      reference_solution(built.spec, ReferenceMode::exact_quadratic);
  SolverConfig sc;
  sc.algorithm = Algorithm::ahu_delayed;
  sc.plan = rp.plan;
  ScheduleConfig sched_cfg = cfg.schedule;
  sched_cfg.seed = hash_key(cfg.seeds[0], 0x5eedu, sched_cfg.seed);
  sc.schedule = build_schedule(sched_cfg);
  sc.max_iters = cfg.iters;
  sc.reference = zs;
  RateCertificate inflated = rp.certificate;
  // Inflate until the envelope provably undercuts the true trajectory.
  sc.certificate = inflated;
  for (double mult : {2.0, 4.0, 16.0, 64.0, 256.0}) {
    inflated.c = mult * rp.certificate.c;
    inflated.factor = 1.0 / (1.0 + inflated.c);
    sc.certificate = inflated;
    IterateLog log = run(built.spec, sc);
    bool violated = false;
    for (const auto& r : log.records)
      if (!std::isnan(r.envelope_bound) && !std::isnan(r.dist_D_sq) &&
          r.dist_D_sq > r.envelope_bound * (1 + 1e-8))
        violated = true;
    if (violated) {
      write_trace(log, "/tmp/tr_bad.csv");
      break;
    }
  }
  EXPECT_EQ(run_cli("check --trace /tmp/tr_bad.csv --config /tmp/pdsplit_cli_cfg.json"),
            3)
      << cli_output();
}

TEST(Cli, TuneReportsBoundsAndInapplicability) {
  write_file("/tmp/pdsplit_cli_cfg.json", kQuadConfig);
  ASSERT_EQ(run_cli("tune --config /tmp/pdsplit_cli_cfg.json"), 0)
      << cli_output();
  std::string report = cli_output();
  EXPECT_NE(report.find("R_s"), std::string::npos);
  EXPECT_NE(report.find("rate certificate"), std::string::npos);

  // Formation h is an indicator: the total-coupling rules do not apply.
  write_file("/tmp/pdsplit_form_cfg.json", R"({
    "problem": {"type": "formation", "m": 3, "horizon": 2},
    "algorithm": "ahu",
    "schedule": {"kind": "uniform_random", "B": 1, "seed": 0}
  })");
  EXPECT_EQ(run_cli("tune --config /tmp/pdsplit_form_cfg.json"), 1);
  EXPECT_NE(cli_output().find("mu_h"), std::string::npos);
}

TEST(Cli, OracleWritesLoadablePoint) {
  write_file("/tmp/pdsplit_cli_cfg.json", kQuadConfig);
  ASSERT_EQ(run_cli("oracle --config /tmp/pdsplit_cli_cfg.json "
                    "--out /tmp/pdsplit_zstar.txt"),
            0)
      << cli_output();
  PrimalDualPoint z = read_point("/tmp/pdsplit_zstar.txt");
  ExperimentConfig cfg = load_config("/tmp/pdsplit_cli_cfg.json");
  BuiltProblem built = build_problem(cfg);
  EXPECT_LE(kkt_residual(built.spec, z).combined, 1e-9);
}

TEST(Cli, MultiSeedRunWritesOneTracePerSeed) {
  std::string cfg(kQuadConfig);
  auto pos = cfg.find("\"seed\": 5");
  ASSERT_NE(pos, std::string::npos);
  cfg.replace(pos, std::string("\"seed\": 5").size(), "\"seeds\": [1, 2, 3]");
  pos = cfg.find("\"iters\": 1500");
  cfg.replace(pos, std::string("\"iters\": 1500").size(), "\"iters\": 100");
  write_file("/tmp/pdsplit_multi_cfg.json", cfg);
  std::string cmd = "PDSPLIT_THREADS=2 " + binary() +
                    " run --config /tmp/pdsplit_multi_cfg.json "
                    "--out /tmp/tr_multi.csv >/tmp/pdsplit_cli_out.txt 2>&1";
  ASSERT_EQ(exit_code(std::system(cmd.c_str())), 0) << cli_output();
  auto r1 = read_trace("/tmp/tr_multi_s1.csv");
  auto r2 = read_trace("/tmp/tr_multi_s2.csv");
  auto r3 = read_trace("/tmp/tr_multi_s3.csv");
  EXPECT_EQ(r1.size(), 101u);
  EXPECT_EQ(r2.size(), 101u);
  EXPECT_EQ(r3.size(), 101u);
  // Different seeds give different delay patterns, hence different runs.
  EXPECT_NE(slurp("/tmp/tr_multi_s1.csv"), slurp("/tmp/tr_multi_s2.csv"));
}

TEST(Cli, ConfigErrorsExitOne) {
  write_file("/tmp/pdsplit_bad_cfg.json", R"({"problem": {"type": "nope"}})");
  EXPECT_EQ(run_cli("run --config /tmp/pdsplit_bad_cfg.json"), 1);
  EXPECT_EQ(run_cli("run --config /tmp/does_not_exist.json"), 1);
  // The baseline is scoped to the formation problem.
  write_file("/tmp/pdsplit_dd_bad.json", R"({
    "problem": {"type": "logistic", "m": 2, "samples_per_agent": 3,
                "feature_dim": 4, "lambda": 0.2, "seed": 0},
    "algorithm": "dual_decomposition"})");
  EXPECT_EQ(run_cli("run --config /tmp/pdsplit_dd_bad.json"), 1);
}

TEST(Cli, DualDecompositionRunOnFormation) {
  write_file("/tmp/pdsplit_dd_cfg.json", R"({
    "problem": {"type": "formation", "m": 3, "horizon": 2},
    "algorithm": "dual_decomposition",
    "schedule": {"kind": "uniform_random", "B": 1, "seed": 2},
    "iters": 60,
    "alpha": 1.0,
    "output": "/tmp/tr_dd.csv"
  })");
  ASSERT_EQ(run_cli("run --config /tmp/pdsplit_dd_cfg.json"), 0)
      << cli_output();
  auto rows = read_trace("/tmp/tr_dd.csv");
  EXPECT_EQ(rows.size(), 61u);
  EXPECT_FALSE(std::isnan(rows.back().step_norm));
}

TEST(Cli, DivergenceExitsTwo) {
  std::string cfg = R"({
    "problem": {
      "type": "custom",
      "primal_dims": [2], "dual_dims": [2],
      "L": [{"i": 0, "j": 0, "matrix": [[1.0, 0.0], [0.0, 1.0]]}],
      "g": [{"type": "quadratic_diag", "diag": [0.01, 0.01]}],
      "h": [{"type": "squared_loss", "targets": [1.0, -2.0]}]
    },
    "algorithm": "ahu",
    "schedule": {"kind": "none", "B": 0},
    "stepsize": {"mode": "manual", "gamma": [80.0], "sigma": [80.0]},
    "iters": 5000,
    "reference": "none",
    "output": "/tmp/tr_div.csv"
  })";
  write_file("/tmp/pdsplit_div_cfg.json", cfg);
  EXPECT_EQ(run_cli("run --config /tmp/pdsplit_div_cfg.json"), 2)
      << cli_output();
}
