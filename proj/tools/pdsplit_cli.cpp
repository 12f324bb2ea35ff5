// Command-line front end: run experiments, print stepsize/rate reports,
// replay traces against the convergence theory, and cache reference
// solutions.
//
// Exit codes: 0 success, 1 configuration error, 2 divergence or
// numerical failure, 3 theory-check violation.

#include <CLI11.hpp>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pdsplit/config.hpp"
#include "pdsplit/pdsplit.hpp"
#include "pdsplit/trace.hpp"

namespace {

using namespace pdsplit;

int thread_count_from_env() {
  const char* env = std::getenv("PDSPLIT_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

std::vector<double> expand_probs(const ExperimentConfig& cfg, int m) {
  if (cfg.algorithm != Algorithm::ahu_randomized) return {};
  std::vector<double> p = cfg.p;
  if (p.empty())
    throw ConfigError("config: ahu_randomized needs 'p'");
  if (p.size() == 1) p.assign(static_cast<std::size_t>(m), p[0]);
  if (static_cast<int>(p.size()) != m)
    throw ConfigError("config: 'p' must have one entry per agent");
  return p;
}

std::optional<PrimalDualPoint> resolve_reference(const ExperimentConfig& cfg,
                                                 const ProblemSpec& spec) {
  if (cfg.reference == "none") return std::nullopt;
  if (cfg.reference == "auto") {
    try {
      return reference_solution(spec, ReferenceMode::exact_quadratic);
    } catch (const ConfigError&) {
      return reference_solution(spec, ReferenceMode::synchronous_polish);
    }
  }
  return read_point(cfg.reference);
}

std::string seed_trace_path(const std::string& base, std::uint64_t seed,
                            bool multi) {
  if (!multi) return base;
  auto dot = base.rfind('.');
  std::string stem = dot == std::string::npos ? base : base.substr(0, dot);
  std::string ext = dot == std::string::npos ? "" : base.substr(dot);
  return stem + "_s" + std::to_string(seed) + ext;
}

int cmd_run(const std::string& config_path, std::optional<long> seed_override,
            const std::string& out_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed_override)
    cfg.seeds.assign(1, static_cast<std::uint64_t>(*seed_override));
  if (!out_override.empty()) cfg.output = out_override;

  BuiltProblem built = build_problem(cfg);
  if (cfg.algorithm == Algorithm::dual_decomposition && !built.dd)
    throw ConfigError(
        "config: dual_decomposition is scoped to the formation problem");
  ProblemConstants cst = compute_constants(built.spec);
  std::vector<double> p = expand_probs(cfg, built.spec.agents());
  PlanWithCertificate pc =
      cfg.algorithm == Algorithm::dual_decomposition
          ? PlanWithCertificate{manual_plan(
                std::vector<double>(built.spec.agents(), 1.0),
                std::vector<double>(built.spec.agents(), 1.0)),
                                std::nullopt}
          : resolve_plan(cfg, built.spec, cst, p);
  std::optional<PrimalDualPoint> reference =
      resolve_reference(cfg, built.spec);

  const bool multi = cfg.seeds.size() > 1;
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::vector<std::string> paths;
  for (std::uint64_t s : seeds)
    paths.push_back(seed_trace_path(cfg.output, s, multi));

  auto one = [&](std::size_t idx) {
    std::uint64_t seed = seeds[idx];
    SolverConfig sc;
    sc.algorithm = cfg.algorithm;
    sc.plan = pc.plan;
    ScheduleConfig sched = cfg.schedule;
    if (sched.kind == ScheduleKind::uniform_random)
      sched.seed = hash_key(seed, 0x5eedu, sched.seed);
    sc.schedule = build_schedule(sched);
    sc.max_iters = cfg.iters;
    sc.activation_probs = p;
    sc.seed = seed;
    sc.reference = reference;
    sc.certificate = pc.certificate;
    sc.kkt_every = cfg.kkt_every;
    IterateLog log = cfg.algorithm == Algorithm::dual_decomposition
                         ? run_dual_decomposition(*built.dd, cfg.alpha, sc)
                         : run(built.spec, sc);
    write_trace(log, paths[idx]);
    return log;
  };

  if (multi) {
    int threads = thread_count_from_env();
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mtx;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t idx = next.fetch_add(1);
          if (idx >= seeds.size() || failed.load()) return;
          try {
            one(idx);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(err_mtx);
            failed.store(true);
            if (first_error.empty()) first_error = e.what();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failed.load()) throw Error(first_error);
    std::printf("wrote %zu traces (%s ... %s)\n", paths.size(),
                paths.front().c_str(), paths.back().c_str());
  } else {
    IterateLog log = one(0);
    const IterateRecord& last = log.records.back();
    std::printf("iterations: %ld\n", log.iterations);
    std::printf("local computations: %ld\n", log.local_computations);
    if (!std::isnan(last.kkt)) std::printf("final kkt: %.6e\n", last.kkt);
    if (!std::isnan(last.dist_D_sq))
      std::printf("final dist_D: %.6e\n", std::sqrt(last.dist_D_sq));
    std::printf("trace: %s\n", paths[0].c_str());
  }
  return 0;
}

void print_plan(const char* name, const StepsizePlan& plan) {
  std::printf("%s\n", name);
  std::printf("  gamma:");
  for (double g : plan.gamma) std::printf(" %.10g", g);
  std::printf("\n  sigma:");
  for (double s : plan.sigma) std::printf(" %.10g", s);
  std::printf("\n");
}

int cmd_tune(const std::string& config_path) {
  ExperimentConfig cfg = load_config(config_path);
  BuiltProblem built = build_problem(cfg);
  ProblemConstants cst = compute_constants(built.spec);
  Coupling coupling = classify_coupling(built.spec);
  const int B = cfg.schedule.B;

  std::printf("agents: %d\n", built.spec.agents());
  std::printf("coupling: %s\n",
              coupling == Coupling::partial ? "partial" : "total");
  std::printf("delay bound B: %d\n", B);
  std::printf("beta: %.10g\n", cst.beta);
  std::printf("|beta_bar|^2_{Mg^-1}: %.10g\n", cst.beta_bar_weighted);
  std::printf("mu_g min: %.10g\n", cst.mu_g_min());
  std::printf("mu_h min: %.10g\n", cst.mu_h_min());
  std::printf("R_s: %.10g\n", cst.R_s);
  std::printf("C_s: %.10g\n", cst.C_s);

  switch (cfg.algorithm) {
    case Algorithm::vu_condat_delayed: {
      if (coupling != Coupling::partial)
        throw ConfigError(
            "tune: vu_condat requires partial coupling (block-diagonal L)");
      StepsizePlan plan = stepsizes_partial(cst, default_dual_stepsizes(cst),
                                            B, cfg.stepsize.margin);
      print_plan("partial-coupling bound (default dual stepsizes):", plan);
      break;
    }
    case Algorithm::ahu_delayed: {
      print_plan("total-coupling bound:",
                 stepsizes_total(cst, B, cfg.stepsize.margin));
      RatePlan rp = rate_constants_deterministic(cst, B, cfg.stepsize.margin);
      print_plan("linear-rate stepsizes:", rp.plan);
      std::printf("rate certificate: c2 = %.10g, c = %.10g, factor = %.10g "
                  "per iteration in the D metric\n",
                  rp.certificate.c2, rp.certificate.c, rp.certificate.factor);
      break;
    }
    case Algorithm::ahu_randomized: {
      std::vector<double> p = expand_probs(cfg, built.spec.agents());
      print_plan("randomized bound:",
                 stepsizes_random(cst, B, p, cfg.stepsize.margin));
      RatePlan rp = rate_constants_random(cst, B, p);
      print_plan("linear-rate stepsizes:", rp.plan);
      std::printf("rate certificate: c = %.10g, factor = %.10g per iteration "
                  "in the M metric (in expectation), delta1 = %.10g, "
                  "delta2 = %.10g\n",
                  rp.certificate.c, rp.certificate.factor,
                  rp.certificate.delta1, rp.certificate.delta2);
      break;
    }
    case Algorithm::dual_decomposition:
      std::printf("dual decomposition: subgradient stepsize alpha/sqrt(k+1) "
                  "with alpha = %.10g\n", cfg.alpha);
      break;
  }
  return 0;
}

int cmd_check(const std::string& trace_path, const std::string& config_path,
              double tol) {
  ExperimentConfig cfg = load_config(config_path);
  std::vector<TraceRow> rows = read_trace(trace_path);
  if (rows.empty()) throw ConfigError("check: empty trace");

  // Envelope: compare the recorded metric distance against the recorded
  // bound column. The randomized bound holds in expectation, so a
  // single realization is reported but not failed.
  const bool randomized = cfg.algorithm == Algorithm::ahu_randomized;
  bool have_envelope = false;
  long first_violation = -1;
  for (const auto& r : rows) {
    if (std::isnan(r.envelope_bound)) continue;
    double measured = randomized ? r.dist_M_sq : r.dist_D_sq;
    if (std::isnan(measured)) continue;
    have_envelope = true;
    if (measured > r.envelope_bound * (1.0 + tol) && first_violation < 0)
      first_violation = r.k;
  }
  if (have_envelope) {
    if (first_violation < 0) {
      std::printf("envelope: holds at tolerance %g for %zu rows\n", tol,
                  rows.size());
    } else if (randomized) {
      std::printf("envelope: single realization exceeds the in-expectation "
                  "bound at k = %ld (informational)\n", first_violation);
    } else {
      std::printf("envelope: VIOLATED at k = %ld\n", first_violation);
      return 3;
    }
  } else {
    std::printf("envelope: no bound column in trace (not a rate-mode run)\n");
  }

  // Quasi-Fejer excess from the best available metric column.
  auto column = [&](double TraceRow::* f) {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.*f);
    return out;
  };
  auto all_nan = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isnan(x)) return false;
    return true;
  };
  std::vector<double> dist = column(&TraceRow::dist_P_sq);
  const char* metric = "P";
  if (all_nan(dist)) {
    dist = column(&TraceRow::dist_D_sq);
    metric = "D";
  }
  if (all_nan(dist)) {
    dist = column(&TraceRow::dist_M_sq);
    metric = "M";
  }
  if (!all_nan(dist)) {
    FejerReport rep = fejer_track(dist);
    std::printf("quasi-Fejer (%s metric): total excess %.6e, tail beyond "
                "half the run %.6e\n",
                metric, rep.total_excess,
                rep.tail_beyond(rep.excess.size() / 2));
  } else {
    std::printf("quasi-Fejer: no distance columns in trace\n");
  }
  return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& out_path) {
  ExperimentConfig cfg = load_config(config_path);
  BuiltProblem built = build_problem(cfg);
  PrimalDualPoint z = [&] {
    try {
      return reference_solution(built.spec, ReferenceMode::exact_quadratic);
    } catch (const ConfigError&) {
      return reference_solution(built.spec, ReferenceMode::synchronous_polish);
    }
  }();
  write_point(z, out_path);
  std::printf("kkt residual at oracle: %.6e\n",
              kkt_residual(built.spec, z).combined);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed primal-dual proximal splitting solvers"};
  app.require_subcommand(1);

  std::string config_path, trace_path, out_path;
  long seed = -1;
  double tol = 1e-8;

  CLI::App* run_cmd = app.add_subcommand("run", "run a configured experiment");
  run_cmd->add_option("--config", config_path, "config file")->required();
  run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--out", out_path, "trace output path");

  CLI::App* tune_cmd =
      app.add_subcommand("tune", "print stepsize bounds and rate certificates");
  tune_cmd->add_option("--config", config_path, "config file")->required();

  CLI::App* check_cmd =
      app.add_subcommand("check", "replay a trace against the theory");
  check_cmd->add_option("--trace", trace_path, "trace CSV")->required();
  check_cmd->add_option("--config", config_path, "config file")->required();
  check_cmd->add_option("--tol", tol, "envelope tolerance");

  CLI::App* oracle_cmd =
      app.add_subcommand("oracle", "compute and cache the reference solution");
  oracle_cmd->add_option("--config", config_path, "config file")->required();
  oracle_cmd->add_option("--out", out_path, "output point file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path,
                     seed >= 0 ? std::optional<long>(seed) : std::nullopt,
                     out_path);
    if (tune_cmd->parsed()) return cmd_tune(config_path);
    if (check_cmd->parsed()) return cmd_check(trace_path, config_path, tol);
    if (oracle_cmd->parsed()) return cmd_oracle(config_path, out_path);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
