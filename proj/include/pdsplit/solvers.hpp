#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdsplit/delay.hpp"
#include "pdsplit/errors.hpp"
#include "pdsplit/functions.hpp"
#include "pdsplit/problem.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/tuning.hpp"

namespace pdsplit {

enum class Algorithm {
  vu_condat_delayed,
  ahu_delayed,
  ahu_randomized,
  dual_decomposition,
};

enum class StopKind { iters_only, kkt_tol, dist_tol };

struct StopRule {
  StopKind kind = StopKind::iters_only;
  double eps = 0.0;
  // dist_tol measures plain Euclidean distance; primal_only restricts it
  // to the x part (the quantity the experiments plot).
  bool primal_only = false;
  int check_every = 1;
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::vu_condat_delayed;
  StepsizePlan plan;
  DelaySchedule schedule = DelaySchedule::none();
  long max_iters = 1000;
  std::vector<double> activation_probs;  // randomized only
  std::uint64_t seed = 0;
  StopRule stop;
  std::optional<PrimalDualPoint> start;
  std::optional<PrimalDualPoint> reference;      // enables distance columns
  std::optional<RateCertificate> certificate;    // enables envelope column
  bool keep_iterates = false;
  int kkt_every = 0;  // 0 disables the KKT column
  double dd_alpha = 1.0;  // dual-decomposition subgradient scale
};

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct IterateRecord {
  long k = 0;
  double step_norm = kMissing;
  double dist_P_sq = kMissing;
  double dist_D_sq = kMissing;
  double dist_M_sq = kMissing;
  double dist_x_sq = kMissing;  // plain Euclidean on the primal part
  double kkt = kMissing;
  double envelope_bound = kMissing;
  std::uint64_t active_mask = 0;
  bool has_active_mask = false;
};

struct IterateLog {
  std::vector<IterateRecord> records;
  std::vector<PrimalDualPoint> iterates;  // only when keep_iterates
  PrimalDualPoint final;
  long iterations = 0;        // completed iterations (records = iterations+1)
  long local_computations = 0;  // total agent activations
};

// ---------------------------------------------------------------------------
// Single-agent update rules
// ---------------------------------------------------------------------------

// One Vu-Condat step for agent i under partial coupling. Only the
// gradient argument is outdated; the agent's own primal and dual blocks
// and the diagonal block L_ii are local.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> step_vu_condat(
    const ProblemSpec& spec, int i, const Eigen::VectorXd& x_i,
    const Eigen::VectorXd& u_i, const LocalView& view,
    const StepsizePlan& plan) {
  const double gamma = plan.gamma[static_cast<std::size_t>(i)];
  const double sigma = plan.sigma[static_cast<std::size_t>(i)];
  Eigen::VectorXd grad = spec.f.grad_block(i, view.x);
  Eigen::VectorXd arg = x_i - gamma * grad;
  const bool has_Lii = spec.L.block_nonzero(i, i);
  if (has_Lii) arg.noalias() -= gamma * spec.L.block(i, i).transpose() * u_i;
  Eigen::VectorXd x_next = spec.g[static_cast<std::size_t>(i)].prox(gamma, arg);
  Eigen::VectorXd dual_arg = u_i;
  if (has_Lii)
    dual_arg.noalias() += sigma * spec.L.block(i, i) * (2.0 * x_next - x_i);
  Eigen::VectorXd u_next =
      spec.h[static_cast<std::size_t>(i)].prox_conj(sigma, dual_arg);
  return {std::move(x_next), std::move(u_next)};
}

// One AHU-type step for agent i. Both linear operations act on outdated
// vectors, and the primal and dual views may carry different delays.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> step_ahu(
    const ProblemSpec& spec, int i, const Eigen::VectorXd& x_i,
    const Eigen::VectorXd& u_i, const LocalView& view,
    const StepsizePlan& plan) {
  const double gamma = plan.gamma[static_cast<std::size_t>(i)];
  const double sigma = plan.sigma[static_cast<std::size_t>(i)];
  Eigen::VectorXd grad = spec.f.grad_block(i, view.x);
  Eigen::VectorXd col = Eigen::VectorXd::Zero(x_i.size());
  Eigen::VectorXd row = Eigen::VectorXd::Zero(u_i.size());
  const int m = spec.agents();
  for (int j = 0; j < m; ++j) {
    if (spec.L.block_nonzero(j, i))
      col.noalias() += spec.L.block(j, i).transpose() *
                       (j == i ? u_i : view.u_block(j));
    if (spec.L.block_nonzero(i, j))
      row.noalias() += spec.L.block(i, j) * (j == i ? x_i : view.x_block(j));
  }
  Eigen::VectorXd x_next = spec.g[static_cast<std::size_t>(i)].prox(
      gamma, x_i - gamma * col - gamma * grad);
  Eigen::VectorXd u_next =
      spec.h[static_cast<std::size_t>(i)].prox_conj(sigma, u_i + sigma * row);
  return {std::move(x_next), std::move(u_next)};
}

// ---------------------------------------------------------------------------
// Diagnostics hooks shared with the driver
// ---------------------------------------------------------------------------

struct KktReport {
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double combined = 0.0;
  double gamma_probe = 1.0;
  double sigma_probe = 1.0;
};

// Prox fixed-point residual of the optimality system at z, measured with
// fixed positive probe stepsizes. Zero exactly at primal-dual solutions,
// for any probe choice.
inline KktReport kkt_residual(const ProblemSpec& spec, const PrimalDualPoint& z,
                              double gamma_probe = 1.0,
                              double sigma_probe = 1.0) {
  if (!(gamma_probe > 0) || !(sigma_probe > 0))
    throw ConfigError("kkt_residual: probe stepsizes must be positive");
  KktReport rep;
  rep.gamma_probe = gamma_probe;
  rep.sigma_probe = sigma_probe;
  BlockVector grad = spec.f.grad(z.x);
  BlockVector Ltu = spec.L.apply_adjoint(z.u);
  BlockVector Lx = spec.L.apply(z.x);
  double psq = 0.0, dsq = 0.0;
  for (int i = 0; i < spec.agents(); ++i) {
    Eigen::VectorXd xi = spec.g[static_cast<std::size_t>(i)].prox(
        gamma_probe, z.x[i] - gamma_probe * (grad[i] + Ltu[i]));
    psq += (z.x[i] - xi).squaredNorm();
    Eigen::VectorXd ui = spec.h[static_cast<std::size_t>(i)].prox_conj(
        sigma_probe, z.u[i] + sigma_probe * Lx[i]);
    dsq += (z.u[i] - ui).squaredNorm();
  }
  rep.primal_residual = std::sqrt(psq);
  rep.dual_residual = std::sqrt(dsq);
  rep.combined = std::sqrt(psq + dsq);
  return rep;
}

// ---------------------------------------------------------------------------
// Iteration driver
// ---------------------------------------------------------------------------

namespace detail {

struct RunMetrics {
  std::optional<SaddleMetricP> P;
  std::optional<DiagonalBlockMetric> D;
  std::optional<DiagonalBlockMetric> M;
};

inline RunMetrics make_run_metrics(const ProblemSpec& spec,
                                   const SolverConfig& config) {
  RunMetrics m;
  if (!config.plan.gamma.empty()) {
    m.D = make_metric_D(config.plan.gamma, config.plan.sigma);
    SaddleMetricP P(config.plan.gamma, config.plan.sigma, spec.L);
    if (classify_coupling(spec) == Coupling::partial &&
        P.validate_positive_definite())
      m.P = std::move(P);
  }
  std::vector<double> mu_g(spec.agents()), mu_h(spec.agents());
  bool ok = true;
  for (int i = 0; i < spec.agents(); ++i) {
    mu_g[static_cast<std::size_t>(i)] = spec.g[static_cast<std::size_t>(i)].mu;
    mu_h[static_cast<std::size_t>(i)] = spec.h[static_cast<std::size_t>(i)].mu_h;
    ok = ok && mu_g[static_cast<std::size_t>(i)] > 0 &&
         mu_h[static_cast<std::size_t>(i)] > 0;
  }
  if (ok) m.M = make_metric_M(mu_g, mu_h);
  return m;
}

inline void fill_distances(IterateRecord& rec, const PrimalDualPoint& z,
                           const PrimalDualPoint& ref, const RunMetrics& m) {
  if (m.P) rec.dist_P_sq = m.P->distance_sq(z, ref);
  if (m.D) rec.dist_D_sq = m.D->distance_sq(z, ref);
  if (m.M) rec.dist_M_sq = m.M->distance_sq(z, ref);
  rec.dist_x_sq = (z.x - ref.x).squared_norm();
}

inline bool stop_satisfied(const ProblemSpec& spec, const SolverConfig& config,
                           const PrimalDualPoint& z, long k) {
  switch (config.stop.kind) {
    case StopKind::iters_only:
      return false;
    case StopKind::kkt_tol: {
      if (config.stop.check_every > 1 && k % config.stop.check_every != 0)
        return false;
      return kkt_residual(spec, z).combined <= config.stop.eps;
    }
    case StopKind::dist_tol: {
      if (!config.reference)
        throw ConfigError("stop rule dist_tol requires a reference point");
      if (config.stop.check_every > 1 && k % config.stop.check_every != 0)
        return false;
      double d2 = config.stop.primal_only
                      ? (z.x - config.reference->x).squared_norm()
                      : z.squared_distance(*config.reference);
      return d2 <= config.stop.eps * config.stop.eps;
    }
  }
  return false;
}

}  // namespace detail

// Runs Algorithm 1 (vu_condat_delayed), Algorithm 2 (ahu_delayed) or
// Algorithm 3 (ahu_randomized). The driver is iteration-synchronous:
// all updates at iteration k read history up to k, then z^{k+1} is
// recorded and becomes visible to future views. Idle agents of the
// randomized variant carry their blocks unchanged.
inline IterateLog run(const ProblemSpec& spec, const SolverConfig& config) {
  spec.validate();
  config.plan.validate_positive();
  if (static_cast<int>(config.plan.gamma.size()) != spec.agents())
    throw ConfigError("run: stepsize plan size mismatch");
  const int m = spec.agents();

  const Coupling coupling_kind = classify_coupling(spec);
  if (config.algorithm == Algorithm::vu_condat_delayed &&
      coupling_kind != Coupling::partial)
    throw ConfigError(
        "run: vu_condat_delayed requires partial coupling (block-diagonal L); "
        "use ahu_delayed for total coupling");
  if (config.algorithm == Algorithm::dual_decomposition)
    throw ConfigError("run: dual decomposition uses run_dual_decomposition");

  const bool randomized = config.algorithm == Algorithm::ahu_randomized;
  if (randomized) {
    if (static_cast<int>(config.activation_probs.size()) != m)
      throw ConfigError("run: need one activation probability per agent");
    for (double p : config.activation_probs)
      if (!(p > 0) || p > 1.0)
        throw ConfigError("run: activation probabilities must lie in (0, 1]");
    if (m > 64)
      throw ConfigError("run: activation mask supports at most 64 agents");
  }

  CouplingSets coupling = derive_coupling_sets(spec);
  detail::RunMetrics metrics = detail::make_run_metrics(spec, config);

  PrimalDualPoint z = config.start ? *config.start : zeros_point(spec.dims);
  HistoryBuffer history(config.schedule.bound(), spec.dims);
  history.record(z);

  IterateLog log;
  log.records.reserve(static_cast<std::size_t>(config.max_iters) + 1);
  if (config.keep_iterates) log.iterates.push_back(z);

  double envelope_d0 = kMissing;
  if (config.certificate && config.reference) {
    if (config.certificate->metric == RateMetricTag::D && metrics.D)
      envelope_d0 = metrics.D->distance_sq(z, *config.reference);
    else if (config.certificate->metric == RateMetricTag::M && metrics.M)
      envelope_d0 = metrics.M->distance_sq(z, *config.reference);
  }

  auto make_record = [&](long k, double step_norm, std::uint64_t mask,
                         bool has_mask) {
    IterateRecord rec;
    rec.k = k;
    rec.step_norm = step_norm;
    if (config.reference)
      detail::fill_distances(rec, z, *config.reference, metrics);
    if (config.kkt_every > 0 && (k % config.kkt_every == 0))
      rec.kkt = kkt_residual(spec, z).combined;
    if (!std::isnan(envelope_d0))
      rec.envelope_bound =
          envelope_d0 * std::pow(config.certificate->factor, static_cast<double>(k));
    rec.active_mask = mask;
    rec.has_active_mask = has_mask;
    return rec;
  };

  log.records.push_back(make_record(0, kMissing, 0, false));

  for (long k = 0; k < config.max_iters; ++k) {
    PrimalDualPoint z_next = z;
    std::uint64_t mask = 0;
    for (int i = 0; i < m; ++i) {
      bool active = true;
      if (randomized) {
        double draw = uniform_draw(config.seed, 0xac71u,
                                   static_cast<std::uint64_t>(k),
                                   static_cast<std::uint64_t>(i));
        active = draw < config.activation_probs[static_cast<std::size_t>(i)];
      }
      if (!active) continue;
      mask |= (1ULL << i);
      LocalView view = local_view(history, config.schedule, coupling, i, k);
      auto [x_next, u_next] =
          config.algorithm == Algorithm::vu_condat_delayed
              ? step_vu_condat(spec, i, z.x[i], z.u[i], view, config.plan)
              : step_ahu(spec, i, z.x[i], z.u[i], view, config.plan);
      z_next.x[i] = std::move(x_next);
      z_next.u[i] = std::move(u_next);
      ++log.local_computations;
    }
    if (!z_next.all_finite())
      throw DivergenceError("run: iterate became non-finite", k + 1);

    double step_norm = std::sqrt(z_next.squared_distance(z));
    z = std::move(z_next);
    history.record(z);
    if (config.keep_iterates) log.iterates.push_back(z);
    log.records.push_back(make_record(k + 1, step_norm, mask, randomized));
    log.iterations = k + 1;

    if (detail::stop_satisfied(spec, config, z, k + 1)) break;
  }
  log.final = z;
  return log;
}

// ---------------------------------------------------------------------------
// Dual decomposition baseline
// ---------------------------------------------------------------------------

// Local strongly convex costs coupled through a smooth quadratic f, with
// per-agent affine constraints E_i w_i = b_i and box sets W_i. This is
// the structured form the subgradient baseline needs; the generic
// ProblemSpec hides it behind prox oracles.
struct AffineConstrainedProblem {
  BlockDims dims;  // dual side holds the constraint row counts
  SmoothOracle f;
  std::vector<Eigen::MatrixXd> Q;
  std::vector<Eigen::MatrixXd> E;
  std::vector<Eigen::VectorXd> b;
  std::vector<Eigen::VectorXd> box_lo;  // empty vector = unconstrained
  std::vector<Eigen::VectorXd> box_hi;
  std::vector<std::vector<int>> f_dependency;
};

namespace detail {

// minimize 1/2 w^T A w + c^T w subject to lo <= w <= hi, by cyclic
// projected coordinate minimization. A must be positive definite.
inline Eigen::VectorXd box_qp_coordinate_descent(
    const Eigen::MatrixXd& A, const Eigen::VectorXd& c,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, Eigen::VectorXd w,
    double tol = 1e-10, int max_sweeps = 20000) {
  const Eigen::Index n = A.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      double g = A.row(l).dot(w) + c[l];
      double cand = w[l] - g / A(l, l);
      cand = std::min(std::max(cand, lo[l]), hi[l]);
      max_change = std::max(max_change, std::abs(cand - w[l]));
      w[l] = cand;
    }
    if (max_change <= tol * (1.0 + w.cwiseAbs().maxCoeff())) return w;
  }
  throw NumericalError("box QP: coordinate descent did not converge");
}

}  // namespace detail

// Subgradient dual decomposition: each agent solves its local
// regularized subproblem exactly (neighbors frozen at delayed values),
// then ascends on the E_i w_i = b_i multipliers with stepsize
// alpha / sqrt(k+1). Exchanged primal variables pass through the same
// delay machinery as the primal-dual engines.
inline IterateLog run_dual_decomposition(const AffineConstrainedProblem& prob,
                                         double alpha,
                                         const SolverConfig& config) {
  const int m = prob.dims.agents();
  if (!(alpha > 0)) throw ConfigError("dual decomposition: alpha must be > 0");
  if (!prob.f.quad)
    throw ConfigError(
        "dual decomposition: baseline supports quadratic coupling terms only");

  // Own-block Hessian slices of f, fixed across iterations.
  auto off = detail::block_offsets(prob.dims.primal);
  std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(m));
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol(static_cast<std::size_t>(m));
  std::vector<bool> boxed(static_cast<std::size_t>(m), false);
  for (int i = 0; i < m; ++i) {
    const int ni = prob.dims.primal[static_cast<std::size_t>(i)];
    Eigen::MatrixXd Hii = prob.f.quad->Q.block(off[static_cast<std::size_t>(i)],
                                               off[static_cast<std::size_t>(i)],
                                               ni, ni);
    A[static_cast<std::size_t>(i)] = prob.Q[static_cast<std::size_t>(i)] + Hii;
    boxed[static_cast<std::size_t>(i)] =
        prob.box_lo[static_cast<std::size_t>(i)].size() > 0;
    if (!boxed[static_cast<std::size_t>(i)])
      chol[static_cast<std::size_t>(i)].compute(A[static_cast<std::size_t>(i)]);
  }

  CouplingSets coupling;
  {
    // Only the f-coupling matters for exchanged variables here.
    coupling.n_in.assign(static_cast<std::size_t>(m), {});
    coupling.n_out.assign(static_cast<std::size_t>(m), {});
    coupling.m_p.assign(static_cast<std::size_t>(m), {});
    coupling.m_d.assign(static_cast<std::size_t>(m), {});
    for (int i = 0; i < m; ++i)
      for (int j : prob.f_dependency[static_cast<std::size_t>(i)])
        if (j != i) coupling.n_in[static_cast<std::size_t>(i)].push_back(j);
  }

  PrimalDualPoint z = config.start ? *config.start : zeros_point(prob.dims);
  HistoryBuffer history(config.schedule.bound(), prob.dims);
  history.record(z);

  IterateLog log;
  auto make_record = [&](long k, double step_norm) {
    IterateRecord rec;
    rec.k = k;
    rec.step_norm = step_norm;
    if (config.reference)
      rec.dist_x_sq = (z.x - config.reference->x).squared_norm();
    return rec;
  };
  log.records.push_back(make_record(0, kMissing));
  if (config.keep_iterates) log.iterates.push_back(z);

  for (long k = 0; k < config.max_iters; ++k) {
    PrimalDualPoint z_next = z;
    const double step = alpha / std::sqrt(static_cast<double>(k) + 1.0);
    for (int i = 0; i < m; ++i) {
      LocalView view = local_view(history, config.schedule, coupling, i, k);
      // Linear term of the local quadratic model: freeze neighbors,
      // zero the own block, and read the gradient there.
      BlockVector probe = view.x;
      probe[i].setZero();
      Eigen::VectorXd c = prob.f.grad_block(i, probe);
      c.noalias() +=
          prob.E[static_cast<std::size_t>(i)].transpose() * z.u[i];
      Eigen::VectorXd w;
      if (boxed[static_cast<std::size_t>(i)]) {
        w = detail::box_qp_coordinate_descent(
            A[static_cast<std::size_t>(i)], c,
            prob.box_lo[static_cast<std::size_t>(i)],
            prob.box_hi[static_cast<std::size_t>(i)], z.x[i]);
      } else {
        w = chol[static_cast<std::size_t>(i)].solve(-c);
      }
      z_next.x[i] = w;
      z_next.u[i] =
          z.u[i] + step * (prob.E[static_cast<std::size_t>(i)] * w -
                           prob.b[static_cast<std::size_t>(i)]);
      ++log.local_computations;
    }
    if (!z_next.all_finite())
      throw DivergenceError("dual decomposition: iterate non-finite", k + 1);
    double step_norm = std::sqrt(z_next.squared_distance(z));
    z = std::move(z_next);
    history.record(z);
    if (config.keep_iterates) log.iterates.push_back(z);
    log.records.push_back(make_record(k + 1, step_norm));
    log.iterations = k + 1;
    if (config.stop.kind == StopKind::dist_tol && config.reference) {
      double d2 = (z.x - config.reference->x).squared_norm();
      if (d2 <= config.stop.eps * config.stop.eps) break;
    }
  }
  log.final = z;
  return log;
}

}  // namespace pdsplit
