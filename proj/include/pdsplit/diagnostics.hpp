#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/problem.hpp"
#include "pdsplit/solvers.hpp"
#include "pdsplit/tuning.hpp"

namespace pdsplit {

enum class ReferenceMode { exact_quadratic, synchronous_polish };

namespace detail {

inline bool is_quadratic_spec(const ProblemSpec& spec) {
  if (!spec.f.quad) return false;
  for (const auto& gi : spec.g)
    if (!gi.quad) return false;
  for (const auto& hi : spec.h)
    if (!hi.h.quad && !hi.h.point) return false;
  return true;
}

// Direct solve of the stacked optimality system when f and g are
// quadratic and each h is quadratic or the indicator of a point.
// Smooth dual blocks are eliminated through u = Q_h L x + b_h; point
// blocks stay as equality constraints with free multipliers.
inline PrimalDualPoint exact_quadratic_solution(const ProblemSpec& spec) {
  if (!detail::is_quadratic_spec(spec))
    throw ConfigError(
        "reference_solution: exact_quadratic needs quadratic f and g and "
        "quadratic or point-indicator h");
  const int m = spec.agents();
  const int n = spec.dims.total_primal();
  auto poff = detail::block_offsets(spec.dims.primal);
  auto doff = detail::block_offsets(spec.dims.dual);

  Eigen::MatrixXd H = spec.f.quad->Q;
  Eigen::VectorXd q = spec.f.quad->b;
  for (int i = 0; i < m; ++i) {
    const auto& gq = *spec.g[static_cast<std::size_t>(i)].quad;
    H.block(poff[static_cast<std::size_t>(i)], poff[static_cast<std::size_t>(i)],
            spec.dims.primal[static_cast<std::size_t>(i)],
            spec.dims.primal[static_cast<std::size_t>(i)]) += gq.Q;
    q.segment(poff[static_cast<std::size_t>(i)],
              spec.dims.primal[static_cast<std::size_t>(i)]) += gq.b;
  }

  Eigen::MatrixXd L = spec.L.dense();
  std::vector<int> point_agents;
  int n_point = 0;
  for (int i = 0; i < m; ++i) {
    if (spec.h[static_cast<std::size_t>(i)].h.point) {
      point_agents.push_back(i);
      n_point += spec.dims.dual[static_cast<std::size_t>(i)];
    } else {
      const auto& hq = *spec.h[static_cast<std::size_t>(i)].h.quad;
      Eigen::MatrixXd Li =
          L.middleRows(doff[static_cast<std::size_t>(i)],
                       spec.dims.dual[static_cast<std::size_t>(i)]);
      H.noalias() += Li.transpose() * hq.Q * Li;
      q.noalias() += Li.transpose() * hq.b;
    }
  }

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + n_point, n + n_point);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + n_point);
  K.topLeftCorner(n, n) = H;
  rhs.head(n) = -q;
  int row = n;
  for (int i : point_agents) {
    const int ri = spec.dims.dual[static_cast<std::size_t>(i)];
    Eigen::MatrixXd Li = L.middleRows(doff[static_cast<std::size_t>(i)], ri);
    K.block(row, 0, ri, n) = Li;
    K.block(0, row, n, ri) = Li.transpose();
    rhs.segment(row, ri) =
        spec.h[static_cast<std::size_t>(i)].h.point->point;
    row += ri;
  }

  Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(rhs);
  double resid = (K * sol - rhs).norm();
  if (!(resid <= 1e-8 * (1.0 + rhs.norm())))
    throw NumericalError(
        "reference_solution: optimality system is numerically singular");
  PrimalDualPoint z;
  z.x = BlockVector::from_flat(sol.head(n), spec.dims.primal);
  z.u = BlockVector::zeros(spec.dims.dual);
  row = n;
  for (int i : point_agents) {
    const int ri = spec.dims.dual[static_cast<std::size_t>(i)];
    z.u[i] = sol.segment(row, ri);
    row += ri;
  }
  for (int i = 0; i < m; ++i) {
    if (spec.h[static_cast<std::size_t>(i)].h.point) continue;
    const auto& hq = *spec.h[static_cast<std::size_t>(i)].h.quad;
    z.u[i] = hq.Q * spec.L.apply_row(i, z.x) + hq.b;
  }
  if (!z.all_finite())
    throw NumericalError("reference_solution: singular optimality system");
  return z;
}

// Synchronous Vu-Condat stepsizes for the polish oracle. Partial
// coupling uses the per-agent B=0 rule; total coupling falls back to
// the classical global-norm condition, which stays valid when L_ii
// carries none of L's mass.
inline StepsizePlan polish_plan(const ProblemSpec& spec,
                                const ProblemConstants& cst) {
  if (classify_coupling(spec) == Coupling::partial)
    return stepsizes_partial(cst, default_dual_stepsizes(cst), 0, 0.9);
  double L_norm = operator_norm(spec.L.dense());
  double s = L_norm > 0 ? 1.0 / L_norm : 1.0;
  double den = s * L_norm * L_norm + 0.5 * cst.beta;
  double g = den > 0 ? 0.9 / den : 1.0;
  StepsizePlan plan;
  plan.gamma.assign(static_cast<std::size_t>(spec.agents()), g);
  plan.sigma.assign(static_cast<std::size_t>(spec.agents()), s);
  plan.provenance = PlanProvenance::manual;
  return plan;
}

}  // namespace detail

// High-precision primal-dual solution used by every distance-based
// theory check. exact_quadratic solves the stacked optimality system
// directly; synchronous_polish runs the delay-free engine until the
// combined KKT residual is tiny.
inline PrimalDualPoint reference_solution(const ProblemSpec& spec,
                                          ReferenceMode mode,
                                          double kkt_tol = 1e-12,
                                          long max_iters = 1000000) {
  spec.validate();
  if (mode == ReferenceMode::exact_quadratic)
    return detail::exact_quadratic_solution(spec);

  // Polish: the full synchronous Vu-Condat iteration, driven directly
  // (the delayed engine refuses total coupling by contract).
  ProblemConstants cst = compute_constants(spec);
  StepsizePlan plan = detail::polish_plan(spec, cst);
  PrimalDualPoint z = zeros_point(spec.dims);
  for (long k = 0; k < max_iters; ++k) {
    BlockVector grad = spec.f.grad(z.x);
    BlockVector Ltu = spec.L.apply_adjoint(z.u);
    PrimalDualPoint z_next = z;
    for (int i = 0; i < spec.agents(); ++i)
      z_next.x[i] = spec.g[static_cast<std::size_t>(i)].prox(
          plan.gamma[static_cast<std::size_t>(i)],
          z.x[i] -
              plan.gamma[static_cast<std::size_t>(i)] * (Ltu[i] + grad[i]));
    BlockVector extrap = z_next.x;
    for (int i = 0; i < spec.agents(); ++i)
      extrap[i] = 2.0 * z_next.x[i] - z.x[i];
    BlockVector Lx = spec.L.apply(extrap);
    for (int i = 0; i < spec.agents(); ++i)
      z_next.u[i] = spec.h[static_cast<std::size_t>(i)].prox_conj(
          plan.sigma[static_cast<std::size_t>(i)],
          z.u[i] + plan.sigma[static_cast<std::size_t>(i)] * Lx[i]);
    if (!z_next.all_finite())
      throw NumericalError("reference_solution: polish diverged");
    z = std::move(z_next);
    if (k % 10 == 0 && kkt_residual(spec, z).combined <= kkt_tol) return z;
  }
  if (kkt_residual(spec, z).combined <= kkt_tol) return z;
  throw NumericalError(
      "reference_solution: synchronous polish did not reach the requested "
      "KKT tolerance");
}

// ---------------------------------------------------------------------------
// Quasi-Fejer tracking
// ---------------------------------------------------------------------------

// Positive parts of the per-iteration increase of the squared metric
// distance to z*. A quasi-Fejer monotone sequence has summable excess;
// the report certifies that operationally: bounded total plus a
// vanishing tail.
struct FejerReport {
  std::vector<double> excess;   // excess[k] = [d(k+1) - d(k)]_+
  double total_excess = 0.0;

  double tail_beyond(std::size_t checkpoint) const {
    double s = 0.0;
    for (std::size_t k = checkpoint; k < excess.size(); ++k) s += excess[k];
    return s;
  }
};

inline FejerReport fejer_track(const std::vector<double>& dist_sq) {
  FejerReport rep;
  if (dist_sq.size() < 2) return rep;
  rep.excess.reserve(dist_sq.size() - 1);
  for (std::size_t k = 0; k + 1 < dist_sq.size(); ++k) {
    double e = std::max(dist_sq[k + 1] - dist_sq[k], 0.0);
    rep.excess.push_back(e);
    rep.total_excess += e;
  }
  return rep;
}

// Metric distances of a completed run. Prefers recomputing from kept
// iterates (any metric); falls back to the logged columns.
inline std::vector<double> metric_distances(const IterateLog& log,
                                            const PrimalDualPoint& zstar,
                                            const DiagonalBlockMetric& metric) {
  if (log.iterates.empty())
    throw ConfigError("metric_distances: run was logged without iterates");
  std::vector<double> d;
  d.reserve(log.iterates.size());
  for (const auto& z : log.iterates) d.push_back(metric.distance_sq(z, zstar));
  return d;
}

inline std::vector<double> metric_distances(const IterateLog& log,
                                            const PrimalDualPoint& zstar,
                                            const SaddleMetricP& metric) {
  if (log.iterates.empty())
    throw ConfigError("metric_distances: run was logged without iterates");
  std::vector<double> d;
  d.reserve(log.iterates.size());
  for (const auto& z : log.iterates) d.push_back(metric.distance_sq(z, zstar));
  return d;
}

inline FejerReport fejer_track(const IterateLog& log,
                               const PrimalDualPoint& zstar,
                               const DiagonalBlockMetric& metric) {
  return fejer_track(metric_distances(log, zstar, metric));
}

inline FejerReport fejer_track(const IterateLog& log,
                               const PrimalDualPoint& zstar,
                               const SaddleMetricP& metric) {
  return fejer_track(metric_distances(log, zstar, metric));
}

// ---------------------------------------------------------------------------
// Rate envelopes
// ---------------------------------------------------------------------------

struct EnvelopeRow {
  long k = 0;
  double measured = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
};

struct EnvelopeReport {
  std::vector<EnvelopeRow> rows;
  bool holds = true;
  long first_violation = -1;
  double tol = 0.0;
};

// Deterministic check of measured(k) <= factor^k * measured(0) * (1+tol)
// at every index of dist_sq.
inline EnvelopeReport envelope_check(const std::vector<double>& dist_sq,
                                     const RateCertificate& certificate,
                                     double tol) {
  if (dist_sq.empty()) throw ConfigError("envelope_check: empty distances");
  EnvelopeReport rep;
  rep.tol = tol;
  const double d0 = dist_sq[0];
  double bound = d0;
  for (std::size_t k = 0; k < dist_sq.size(); ++k) {
    EnvelopeRow row;
    row.k = static_cast<long>(k);
    row.measured = dist_sq[k];
    row.bound = bound;
    row.ratio = bound > 0 ? dist_sq[k] / bound : (dist_sq[k] > 0 ? 1e300 : 1.0);
    rep.rows.push_back(row);
    if (row.ratio > 1.0 + tol && rep.first_violation < 0) {
      rep.holds = false;
      rep.first_violation = row.k;
    }
    bound *= certificate.factor;
  }
  return rep;
}

// Monte-Carlo variant: the bound is on the expectation, so the ensemble
// mean is compared at declared checkpoints with multiplicative slack.
inline EnvelopeReport envelope_check_ensemble(
    const std::vector<std::vector<double>>& per_seed_dist_sq,
    const std::vector<long>& checkpoints, const RateCertificate& certificate,
    double slack) {
  if (per_seed_dist_sq.empty())
    throw ConfigError("envelope_check_ensemble: no ensemble members");
  const std::size_t len = per_seed_dist_sq.front().size();
  for (const auto& d : per_seed_dist_sq)
    if (d.size() != len)
      throw ConfigError("envelope_check_ensemble: ragged ensemble");
  EnvelopeReport rep;
  rep.tol = slack - 1.0;
  double mean0 = 0.0;
  for (const auto& d : per_seed_dist_sq) mean0 += d[0];
  mean0 /= static_cast<double>(per_seed_dist_sq.size());
  for (long k : checkpoints) {
    if (k < 0 || static_cast<std::size_t>(k) >= len)
      throw ConfigError("envelope_check_ensemble: checkpoint out of range");
    double mean = 0.0;
    for (const auto& d : per_seed_dist_sq) mean += d[static_cast<std::size_t>(k)];
    mean /= static_cast<double>(per_seed_dist_sq.size());
    EnvelopeRow row;
    row.k = k;
    row.measured = mean;
    row.bound = mean0 * std::pow(certificate.factor, static_cast<double>(k));
    row.ratio = row.bound > 0 ? mean / row.bound : (mean > 0 ? 1e300 : 1.0);
    rep.rows.push_back(row);
    if (row.ratio > slack && rep.first_violation < 0) {
      rep.holds = false;
      rep.first_violation = k;
    }
  }
  return rep;
}

// Runs one job per seed on up to `threads` workers and collects results
// in seed order, so the reduction is deterministic.
template <typename Fn>
std::vector<std::vector<double>> ensemble_runs(const std::vector<std::uint64_t>& seeds,
                                               int threads, Fn&& job) {
  std::vector<std::vector<double>> out(seeds.size());
  if (threads < 1) threads = 1;
  std::vector<std::thread> pool;
  std::size_t next = 0;
  std::mutex mtx;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t idx;
        {
          std::lock_guard<std::mutex> lock(mtx);
          if (next >= seeds.size()) return;
          idx = next++;
        }
        out[idx] = job(seeds[idx]);
      }
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace pdsplit
