#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/functions.hpp"
#include "pdsplit/problem.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/solvers.hpp"

namespace pdsplit {

// ---------------------------------------------------------------------------
// Formation control
// ---------------------------------------------------------------------------

// Each agent is a 2-D double integrator, exactly discretized with step
// dt. Its decision vector stacks the state trajectory xi(1..T) (position
// and velocity) and the input trajectory a(0..T-1) (acceleration), so
// n_i = 6T. Dynamics enter as E_i w_i = b_i; position extraction as
// C_hat w_i = positions over the horizon.
struct FormationConfig {
  int m = 5;
  int horizon = 3;
  double dt = 1.0;
  std::vector<double> lambda;                    // per-agent; size 1 = shared
  std::vector<std::vector<int>> neighbors;       // A_i; empty = ring
  std::vector<std::pair<std::pair<int, int>, Eigen::Vector2d>> d;  // ((i,j), d_ij)
  bool arrow_targets = true;     // derive d from the arrow preset when d empty
  std::vector<Eigen::MatrixXd> Q;  // empty = identity
  double input_lo = -5.0, input_hi = 5.0;
  double state_lo = -100.0, state_hi = 100.0;
  std::vector<Eigen::Vector4d> initial_states;  // empty = polygon
  double polygon_radius = 5.0;
};

struct FormationProblem {
  ProblemSpec spec;
  AffineConstrainedProblem dd;  // the same instance in baseline form
  std::vector<Eigen::MatrixXd> E;
  std::vector<Eigen::VectorXd> b;
  Eigen::MatrixXd C_hat;
};

namespace detail {

inline Eigen::Vector2d arrow_target(int i) {
  if (i == 0) return {0.0, 0.0};
  int wing = (i + 1) / 2;
  double sign = (i % 2 == 1) ? -1.0 : 1.0;
  return {sign * wing, -static_cast<double>(wing)};
}

}  // namespace detail

inline FormationProblem build_formation(const FormationConfig& cfg) {
  if (cfg.m < 2) throw ConfigError("formation: need m >= 2");
  if (cfg.horizon < 1) throw ConfigError("formation: need horizon >= 1");
  if (!(cfg.dt > 0)) throw ConfigError("formation: dt must be positive");
  const int m = cfg.m, T = cfg.horizon;
  const int n_state = 4, n_input = 2;
  const int ni = n_state * T + n_input * T;
  const int ri = n_state * T + ni;

  // Exact discretization of the double integrator.
  Eigen::Matrix4d Ad = Eigen::Matrix4d::Identity();
  Ad(0, 2) = cfg.dt;
  Ad(1, 3) = cfg.dt;
  Eigen::Matrix<double, 4, 2> Bd;
  Bd << 0.5 * cfg.dt * cfg.dt, 0, 0, 0.5 * cfg.dt * cfg.dt, cfg.dt, 0, 0,
      cfg.dt;

  std::vector<std::vector<int>> neighbors = cfg.neighbors;
  if (neighbors.empty()) {
    neighbors.assign(m, {});
    for (int i = 0; i < m; ++i) neighbors[i].push_back((i + 1) % m);
  }
  if (static_cast<int>(neighbors.size()) != m)
    throw ConfigError("formation: neighbor list size mismatch");

  std::vector<double> lambda = cfg.lambda;
  if (lambda.empty()) lambda.assign(m, 1.0);
  if (lambda.size() == 1) lambda.assign(m, lambda[0]);
  if (static_cast<int>(lambda.size()) != m)
    throw ConfigError("formation: lambda size mismatch");

  std::vector<Eigen::Vector4d> x0 = cfg.initial_states;
  if (x0.empty()) {
    for (int i = 0; i < m; ++i) {
      double ang = 2.0 * M_PI * i / m;
      x0.push_back(Eigen::Vector4d(cfg.polygon_radius * std::cos(ang),
                                   cfg.polygon_radius * std::sin(ang), 0.0,
                                   0.0));
    }
  }
  if (static_cast<int>(x0.size()) != m)
    throw ConfigError("formation: initial state count mismatch");

  // Per-pair relative-position targets over the horizon.
  auto target_for = [&](int i, int j) -> Eigen::Vector2d {
    for (const auto& [ij, dij] : cfg.d)
      if (ij.first == i && ij.second == j) return dij;
    if (!cfg.arrow_targets && !cfg.d.empty())
      throw ConfigError("formation: missing d for pair (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
    return detail::arrow_target(i) - detail::arrow_target(j);
  };

  // C_hat extracts positions at t = 1..T.
  Eigen::MatrixXd C_hat = Eigen::MatrixXd::Zero(2 * T, ni);
  for (int t = 0; t < T; ++t) {
    C_hat(2 * t, n_state * t) = 1.0;
    C_hat(2 * t + 1, n_state * t + 1) = 1.0;
  }

  std::vector<CouplingPair> pairs;
  for (int i = 0; i < m; ++i)
    for (int j : neighbors[i]) {
      if (j < 0 || j >= m || j == i)
        throw ConfigError("formation: bad neighbor index");
      Eigen::Vector2d dij = target_for(i, j);
      Eigen::VectorXd dstack(2 * T);
      for (int t = 0; t < T; ++t) dstack.segment<2>(2 * t) = dij;
      pairs.push_back(CouplingPair{i, j, lambda[i], dstack});
    }

  std::vector<int> primal_dims(m, ni), dual_dims(m, ri);
  BlockDims dims(primal_dims, dual_dims);

  FormationProblem out;
  out.C_hat = C_hat;
  out.spec.dims = dims;
  out.spec.f = make_quadratic_coupling(primal_dims, pairs, C_hat);
  out.spec.f_dependency = out.spec.f.depends_on;
  out.spec.L = BlockLinearMap(dims);

  for (int i = 0; i < m; ++i) {
    // E_i w_i = b_i: xi(t+1) - Ad xi(t) - Bd a(t) = 0, xi(0) fixed.
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n_state * T, ni);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_state * T);
    for (int t = 0; t < T; ++t) {
      E.block(n_state * t, n_state * t, n_state, n_state) =
          Eigen::Matrix4d::Identity();
      if (t > 0)
        E.block(n_state * t, n_state * (t - 1), n_state, n_state) = -Ad;
      E.block(n_state * t, n_state * T + n_input * t, n_state, n_input) = -Bd;
    }
    b.head(n_state) = Ad * x0[i];
    out.E.push_back(E);
    out.b.push_back(b);

    Eigen::MatrixXd Q = i < static_cast<int>(cfg.Q.size())
                            ? cfg.Q[i]
                            : Eigen::MatrixXd::Identity(ni, ni);
    if (Q.rows() != ni || Q.cols() != ni)
      throw ConfigError("formation: Q_" + std::to_string(i) + " must be " +
                        std::to_string(ni) + "x" + std::to_string(ni));
    ProxOracle g = make_quadratic_prox(Q);
    if (!(g.mu > 0))
      throw ConfigError("formation: Q_" + std::to_string(i) +
                        " must be positive definite (mu_g > 0)");
    out.spec.g.push_back(std::move(g));

    // W_i: state box on the trajectory part, input box on the rest.
    Eigen::VectorXd lo(ni), hi(ni);
    lo.head(n_state * T).setConstant(cfg.state_lo);
    hi.head(n_state * T).setConstant(cfg.state_hi);
    lo.tail(n_input * T).setConstant(cfg.input_lo);
    hi.tail(n_input * T).setConstant(cfg.input_hi);

    ProxOracle h = make_stacked_prox(
        {{make_point_indicator(b), n_state * T},
         {make_box_indicator(lo, hi), ni}});
    out.spec.h.push_back(ConjugateProxOracle{std::move(h), 0.0});

    // L_ii w_i = (E_i w_i, w_i).
    Eigen::MatrixXd Lii(ri, ni);
    Lii.topRows(n_state * T) = E;
    Lii.bottomRows(ni) = Eigen::MatrixXd::Identity(ni, ni);
    out.spec.L.set_block(i, i, Lii);

    out.dd.Q.push_back(Q);
    out.dd.E.push_back(E);
    out.dd.b.push_back(b);
    out.dd.box_lo.push_back(lo);
    out.dd.box_hi.push_back(hi);
  }

  out.spec.validate();
  out.dd.dims = BlockDims(primal_dims, std::vector<int>(m, n_state * T));
  out.dd.f = out.spec.f;
  out.dd.f_dependency = out.spec.f_dependency;
  return out;
}

// ---------------------------------------------------------------------------
// Regularized logistic regression
// ---------------------------------------------------------------------------

struct LogisticConfig {
  int m = 3;
  int samples_per_agent = 10;
  int feature_dim = 6;
  double lambda = 0.1;
  std::uint64_t seed = 0;
};

struct RegressionProblem {
  ProblemSpec spec;
  std::vector<Eigen::MatrixXd> data;    // per-agent sample matrix (s x n)
  std::vector<Eigen::VectorXd> labels;  // logistic only
  std::vector<Eigen::VectorXd> targets; // elastic net only
};

namespace detail {

inline std::vector<int> split_dims(int total, int m) {
  if (total < m) throw ConfigError("builder: feature_dim must be >= m");
  std::vector<int> dims(m, total / m);
  for (int i = 0; i < total % m; ++i) ++dims[i];
  return dims;
}

// Fills the row-i blocks of L with the column slices of the agent's
// data matrix; rows span every primal block, so the coupling is total.
inline void fill_data_rows(BlockLinearMap& L, int i,
                           const Eigen::MatrixXd& Xi,
                           const std::vector<int>& dims) {
  int off = 0;
  for (int j = 0; j < static_cast<int>(dims.size()); ++j) {
    L.set_block(i, j, Xi.middleCols(off, dims[j]));
    off += dims[j];
  }
}

}  // namespace detail

// min over w of sum_i sum_{j in I_i} log(1 + exp(-y_j <x_j, w>)) + lambda |w|^2.
// g is the separable regularizer, h_i the per-agent loss, the rows of
// agent i's block row of L are its data points. mu_h = 4 since the
// scalar logistic curvature is at most 1/4.
inline RegressionProblem build_logistic(const LogisticConfig& cfg) {
  if (cfg.m < 1) throw ConfigError("logistic: need m >= 1");
  if (cfg.samples_per_agent < 1)
    throw ConfigError("logistic: need at least one sample per agent");
  if (!(cfg.lambda > 0)) throw ConfigError("logistic: lambda must be positive");
  const int m = cfg.m, s = cfg.samples_per_agent, n = cfg.feature_dim;
  std::vector<int> primal_dims = detail::split_dims(n, m);
  std::vector<int> dual_dims(m, s);
  BlockDims dims(primal_dims, dual_dims);

  Eigen::VectorXd w_true(n);
  for (int t = 0; t < n; ++t)
    w_true[t] = normal_draw(cfg.seed, 0xfeedu, static_cast<std::uint64_t>(t));

  RegressionProblem out;
  out.spec.dims = dims;
  out.spec.L = BlockLinearMap(dims);
  out.spec.f = zero_smooth(primal_dims);
  out.spec.f_dependency.assign(m, {});
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd Xi(s, n);
    for (int r = 0; r < s; ++r)
      for (int t = 0; t < n; ++t)
        Xi(r, t) = normal_draw(cfg.seed, 0xda7a0u + i,
                               static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(t)) /
                   std::sqrt(static_cast<double>(n));
    Eigen::VectorXd yi(s);
    for (int r = 0; r < s; ++r) {
      double score = Xi.row(r).dot(w_true);
      yi[r] = score >= 0 ? 1.0 : -1.0;
    }
    detail::fill_data_rows(out.spec.L, i, Xi, primal_dims);
    out.spec.g.push_back(make_elastic_net_sized(0.0, cfg.lambda, primal_dims[i]));
    out.spec.h.push_back(ConjugateProxOracle{make_logistic_loss(yi), 4.0});
    out.data.push_back(std::move(Xi));
    out.labels.push_back(std::move(yi));
  }
  out.spec.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Distributed elastic net
// ---------------------------------------------------------------------------

struct ElasticNetConfig {
  int m = 3;
  int samples_per_agent = 10;
  int feature_dim = 6;
  double lambda1 = 0.1;
  double lambda2 = 0.5;
  std::uint64_t seed = 0;
  double noise = 0.1;
};

inline RegressionProblem build_elastic_net(const ElasticNetConfig& cfg) {
  if (cfg.m < 1) throw ConfigError("elastic_net: need m >= 1");
  if (cfg.samples_per_agent < 1)
    throw ConfigError("elastic_net: need at least one sample per agent");
  if (!(cfg.lambda2 > 0))
    throw ConfigError("elastic_net: lambda2 must be positive");
  if (cfg.lambda1 < 0) throw ConfigError("elastic_net: lambda1 must be >= 0");
  const int m = cfg.m, s = cfg.samples_per_agent, n = cfg.feature_dim;
  std::vector<int> primal_dims = detail::split_dims(n, m);
  std::vector<int> dual_dims(m, s);
  BlockDims dims(primal_dims, dual_dims);

  Eigen::VectorXd w_true(n);
  for (int t = 0; t < n; ++t)
    w_true[t] = normal_draw(cfg.seed, 0xbeefu, static_cast<std::uint64_t>(t));

  RegressionProblem out;
  out.spec.dims = dims;
  out.spec.L = BlockLinearMap(dims);
  out.spec.f = zero_smooth(primal_dims);
  out.spec.f_dependency.assign(m, {});
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd Xi(s, n);
    for (int r = 0; r < s; ++r)
      for (int t = 0; t < n; ++t)
        Xi(r, t) = normal_draw(cfg.seed, 0xe1a0u + i,
                               static_cast<std::uint64_t>(r),
                               static_cast<std::uint64_t>(t)) /
                   std::sqrt(static_cast<double>(n));
    Eigen::VectorXd di = Xi * w_true;
    for (int r = 0; r < s; ++r)
      di[r] += cfg.noise * normal_draw(cfg.seed, 0x7015eu + i,
                                       static_cast<std::uint64_t>(r));
    detail::fill_data_rows(out.spec.L, i, Xi, primal_dims);
    out.spec.g.push_back(
        make_elastic_net_sized(cfg.lambda1, cfg.lambda2, primal_dims[i]));
    out.spec.h.push_back(ConjugateProxOracle{make_squared_loss(di), 1.0});
    out.data.push_back(std::move(Xi));
    out.targets.push_back(std::move(di));
  }
  out.spec.validate();
  return out;
}

}  // namespace pdsplit
