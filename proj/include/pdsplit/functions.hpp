#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdsplit/block.hpp"
#include "pdsplit/errors.hpp"

namespace pdsplit {

// Optional structure tags consumed by the exact KKT reference solver.
// q(v) = 1/2 v^T Q v + b^T v.
struct QuadraticForm {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
};

struct PointIndicator {
  Eigen::VectorXd point;
};

// Prox oracle for one proper closed convex function q: prox(rho, v) =
// argmin_z q(z) + (1/2 rho) |v - z|^2. mu is the strong-convexity
// modulus of q (0 when merely convex). eval is optional and used by
// diagnostics only.
struct ProxOracle {
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> prox;
  double mu = 0.0;
  std::function<double(const Eigen::VectorXd&)> eval;
  // Samples a point of dom q near v; identity for full-domain functions.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> domain_project;

  std::optional<QuadraticForm> quad;
  std::optional<PointIndicator> point;

  Eigen::VectorXd operator()(double rho, const Eigen::VectorXd& v) const {
    if (!(rho > 0)) throw ConfigError("prox: rho must be positive");
    return prox(rho, v);
  }
};

// prox_{sigma h*}(v) through the Moreau decomposition, so h* never has
// to be formed: v - sigma * prox_{h/sigma}(v/sigma).
inline Eigen::VectorXd moreau_conjugate_prox(const ProxOracle& h, double sigma,
                                             const Eigen::VectorXd& v) {
  if (!(sigma > 0))
    throw ConfigError("moreau_conjugate_prox: sigma must be positive");
  return v - sigma * h.prox(1.0 / sigma, v / sigma);
}

// Wraps h together with the strong-convexity modulus of its conjugate
// (mu_h = 1 / Lipschitz(grad h) when h is smooth, 0 otherwise).
struct ConjugateProxOracle {
  ProxOracle h;
  double mu_h = 0.0;

  Eigen::VectorXd prox_conj(double sigma, const Eigen::VectorXd& v) const {
    return moreau_conjugate_prox(h, sigma, v);
  }
};

// Gradient oracle for the coupling-smooth term f. grad_block(i, x)
// returns nabla_i f(x); beta is the global Lipschitz constant of
// nabla f and beta_bar the per-block coupling constants.
struct SmoothOracle {
  std::function<double(const BlockVector&)> eval;
  std::function<Eigen::VectorXd(int, const BlockVector&)> grad_block;
  double beta = 0.0;
  std::vector<double> beta_bar;
  // Blocks j whose value nabla_i f actually reads (excluding i itself).
  std::vector<std::vector<int>> depends_on;
  // Present when f(x) = 1/2 x^T H x + b^T x on the flat vector.
  std::optional<QuadraticForm> quad;

  BlockVector grad(const BlockVector& x) const {
    std::vector<Eigen::VectorXd> g;
    g.reserve(x.block_count());
    for (int i = 0; i < x.block_count(); ++i) g.push_back(grad_block(i, x));
    return BlockVector(std::move(g));
  }
};

inline SmoothOracle zero_smooth(const std::vector<int>& primal_dims) {
  SmoothOracle f;
  f.eval = [](const BlockVector&) { return 0.0; };
  std::vector<int> dims = primal_dims;
  f.grad_block = [dims](int i, const BlockVector&) {
    return Eigen::VectorXd::Zero(dims[i]).eval();
  };
  f.beta = 0.0;
  f.beta_bar.assign(primal_dims.size(), 0.0);
  f.depends_on.assign(primal_dims.size(), {});
  int n = 0;
  for (int d : primal_dims) n += d;
  f.quad = QuadraticForm{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  return f;
}

// ---------------------------------------------------------------------------
// Built-in function library
// ---------------------------------------------------------------------------

// g(v) = 1/2 v^T Q v with Q symmetric PSD: prox is (I + rho Q)^{-1} v.
inline ProxOracle make_quadratic_prox(const Eigen::MatrixXd& Q) {
  if (Q.rows() != Q.cols())
    throw ConfigError("quadratic prox: Q must be square");
  if (!Q.isApprox(Q.transpose(), 1e-12))
    throw ConfigError("quadratic prox: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  double mu = es.eigenvalues().minCoeff();
  if (mu < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
    throw ConfigError("quadratic prox: Q must be positive semidefinite");
  ProxOracle p;
  Eigen::MatrixXd Qc = Q;
  const bool diagonal =
      (Qc - Eigen::MatrixXd(Qc.diagonal().asDiagonal())).isZero(0.0);
  if (diagonal) {
    Eigen::VectorXd d = Qc.diagonal();
    p.prox = [d](double rho, const Eigen::VectorXd& v) {
      return (v.array() / (1.0 + rho * d.array())).matrix().eval();
    };
  } else {
    p.prox = [Qc](double rho, const Eigen::VectorXd& v) {
      Eigen::MatrixXd A =
          Eigen::MatrixXd::Identity(Qc.rows(), Qc.cols()) + rho * Qc;
      return Eigen::LLT<Eigen::MatrixXd>(A).solve(v).eval();
    };
  }
  p.mu = std::max(mu, 0.0);
  p.eval = [Qc](const Eigen::VectorXd& v) { return 0.5 * v.dot(Qc * v); };
  p.quad = QuadraticForm{Qc, Eigen::VectorXd::Zero(Q.rows())};
  return p;
}

inline ProxOracle make_diagonal_quadratic_prox(const Eigen::VectorXd& qdiag) {
  if ((qdiag.array() < 0).any())
    throw ConfigError("diagonal quadratic prox: negative curvature entry");
  ProxOracle p;
  Eigen::VectorXd q = qdiag;
  p.prox = [q](double rho, const Eigen::VectorXd& v) {
    return (v.array() / (1.0 + rho * q.array())).matrix().eval();
  };
  p.mu = qdiag.minCoeff();
  p.eval = [q](const Eigen::VectorXd& v) {
    return 0.5 * (v.array().square() * q.array()).sum();
  };
  p.quad = QuadraticForm{Eigen::MatrixXd(q.asDiagonal()),
                         Eigen::VectorXd::Zero(q.size())};
  return p;
}

// h(v) = 1/2 |v - d|^2 (squared loss against targets d).
inline ProxOracle make_squared_loss(const Eigen::VectorXd& d) {
  ProxOracle p;
  Eigen::VectorXd dc = d;
  p.prox = [dc](double rho, const Eigen::VectorXd& v) {
    return ((v + rho * dc) / (1.0 + rho)).eval();
  };
  p.mu = 1.0;
  p.eval = [dc](const Eigen::VectorXd& v) { return 0.5 * (v - dc).squaredNorm(); };
  p.quad = QuadraticForm{Eigen::MatrixXd::Identity(d.size(), d.size()), -dc};
  return p;
}

inline Eigen::VectorXd project_box(const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi,
                                   const Eigen::VectorXd& v) {
  if (lo.size() != hi.size() || lo.size() != v.size())
    throw StructuralError("project_box: size mismatch");
  if ((lo.array() > hi.array()).any())
    throw ConfigError("project_box: lo > hi in some coordinate");
  return v.cwiseMax(lo).cwiseMin(hi);
}

inline Eigen::VectorXd project_point(const Eigen::VectorXd& b,
                                     const Eigen::VectorXd& v) {
  if (b.size() != v.size()) throw StructuralError("project_point: size mismatch");
  return b;
}

inline ProxOracle make_box_indicator(const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi) {
  if ((lo.array() > hi.array()).any())
    throw ConfigError("box indicator: lo > hi in some coordinate");
  ProxOracle p;
  Eigen::VectorXd l = lo, h = hi;
  p.prox = [l, h](double, const Eigen::VectorXd& v) {
    return project_box(l, h, v);
  };
  p.mu = 0.0;
  p.eval = [l, h](const Eigen::VectorXd& v) {
    bool inside = (v.array() >= l.array() - 1e-12).all() &&
                  (v.array() <= h.array() + 1e-12).all();
    return inside ? 0.0 : std::numeric_limits<double>::infinity();
  };
  p.domain_project = [l, h](const Eigen::VectorXd& v) {
    return project_box(l, h, v);
  };
  return p;
}

inline ProxOracle make_point_indicator(const Eigen::VectorXd& b) {
  ProxOracle p;
  Eigen::VectorXd bc = b;
  p.prox = [bc](double, const Eigen::VectorXd& v) {
    return project_point(bc, v);
  };
  p.mu = 0.0;
  p.eval = [bc](const Eigen::VectorXd& v) {
    return (v - bc).norm() <= 1e-10 * (1.0 + bc.norm())
               ? 0.0
               : std::numeric_limits<double>::infinity();
  };
  p.domain_project = [bc](const Eigen::VectorXd&) { return bc; };
  p.point = PointIndicator{bc};
  return p;
}

namespace detail {

// 1 / (1 + exp(t)) without overflow.
inline double logistic_sigmoid_neg(double t) {
  if (t >= 0) {
    double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

// Solves w + rho * (-y) / (1 + exp(y w)) = v for the scalar logistic
// prox. Newton with a bisection safeguard on [v - rho, v + rho].
inline double logistic_prox_scalar(double y, double rho, double v) {
  auto residual = [&](double w) {
    return w - rho * y * logistic_sigmoid_neg(y * w) - v;
  };
  double lo = v - rho, hi = v + rho;
  double w = v;
  for (int it = 0; it < 100; ++it) {
    double r = residual(w);
    if (std::abs(r) <= 1e-13) return w;
    if (r > 0)
      hi = std::min(hi, w);
    else
      lo = std::max(lo, w);
    double s = logistic_sigmoid_neg(y * w);
    double deriv = 1.0 + rho * y * y * s * (1.0 - s);
    double step = r / deriv;
    double cand = w - step;
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    w = cand;
  }
  if (std::abs(residual(w)) > 1e-12)
    throw NumericalError("logistic prox: Newton did not converge");
  return w;
}

}  // namespace detail

// h(v) = sum_j log(1 + exp(-y_j v_j)) with labels y_j in {-1, +1}.
inline ProxOracle make_logistic_loss(const Eigen::VectorXd& labels) {
  for (Eigen::Index j = 0; j < labels.size(); ++j)
    if (labels[j] != 1.0 && labels[j] != -1.0)
      throw ConfigError("logistic loss: labels must be +1 or -1");
  ProxOracle p;
  Eigen::VectorXd y = labels;
  p.prox = [y](double rho, const Eigen::VectorXd& v) {
    if (v.size() != y.size())
      throw StructuralError("logistic prox: size mismatch");
    Eigen::VectorXd w(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j)
      w[j] = detail::logistic_prox_scalar(y[j], rho, v[j]);
    return w;
  };
  p.mu = 0.0;
  p.eval = [y](const Eigen::VectorXd& v) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      double t = -y[j] * v[j];
      s += t > 30 ? t : std::log1p(std::exp(t));
    }
    return s;
  };
  return p;
}

// g(w) = lambda1 |w|_1 + lambda2 |w|^2, the elastic net regularizer.
// lambda2 > 0 is required so that g is strongly convex (mu = 2 lambda2).
inline ProxOracle make_elastic_net(double lambda1, double lambda2) {
  if (lambda1 < 0) throw ConfigError("elastic net: lambda1 must be >= 0");
  if (!(lambda2 > 0))
    throw ConfigError("elastic net: lambda2 must be positive");
  ProxOracle p;
  p.prox = [lambda1, lambda2](double rho, const Eigen::VectorXd& v) {
    double t = rho * lambda1;
    Eigen::VectorXd w(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      double s = std::abs(v[j]) <= t ? 0.0 : v[j] - (v[j] > 0 ? t : -t);
      w[j] = s / (1.0 + 2.0 * rho * lambda2);
    }
    return w;
  };
  p.mu = 2.0 * lambda2;
  p.eval = [lambda1, lambda2](const Eigen::VectorXd& v) {
    return lambda1 * v.lpNorm<1>() + lambda2 * v.squaredNorm();
  };
  return p;
}

// The elastic net with lambda1 = 0 is quadratic; callers that need the
// structure tag at a known dimension use this helper.
inline ProxOracle make_elastic_net_sized(double lambda1, double lambda2,
                                         int dim) {
  ProxOracle p = make_elastic_net(lambda1, lambda2);
  if (lambda1 == 0.0)
    p.quad = QuadraticForm{2.0 * lambda2 * Eigen::MatrixXd::Identity(dim, dim),
                           Eigen::VectorXd::Zero(dim)};
  else
    p.quad.reset();
  return p;
}

// Concatenation of prox oracles acting on consecutive coordinate slices.
inline ProxOracle make_stacked_prox(std::vector<std::pair<ProxOracle, int>> parts) {
  if (parts.empty()) throw ConfigError("stacked prox: no parts");
  ProxOracle p;
  auto shared = std::make_shared<std::vector<std::pair<ProxOracle, int>>>(
      std::move(parts));
  int total = 0;
  double mu = std::numeric_limits<double>::infinity();
  bool has_eval = true;
  for (const auto& [oracle, len] : *shared) {
    if (len < 1) throw ConfigError("stacked prox: part length < 1");
    total += len;
    mu = std::min(mu, oracle.mu);
    has_eval = has_eval && static_cast<bool>(oracle.eval);
  }
  p.prox = [shared, total](double rho, const Eigen::VectorXd& v) {
    if (v.size() != total) throw StructuralError("stacked prox: size mismatch");
    Eigen::VectorXd w(total);
    int off = 0;
    for (const auto& [oracle, len] : *shared) {
      w.segment(off, len) = oracle.prox(rho, v.segment(off, len));
      off += len;
    }
    return w;
  };
  p.mu = mu;
  if (has_eval) {
    p.eval = [shared, total](const Eigen::VectorXd& v) {
      double s = 0.0;
      int off = 0;
      for (const auto& [oracle, len] : *shared) {
        s += oracle.eval(v.segment(off, len));
        off += len;
      }
      return s;
    };
  }
  p.domain_project = [shared, total](const Eigen::VectorXd& v) {
    Eigen::VectorXd w(total);
    int off = 0;
    for (const auto& [oracle, len] : *shared) {
      w.segment(off, len) = oracle.domain_project
                                ? oracle.domain_project(v.segment(off, len))
                                : v.segment(off, len);
      off += len;
    }
    return w;
  };
  return p;
}

// ---------------------------------------------------------------------------
// Smooth quadratic oracles
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> block_offsets(const std::vector<int>& dims) {
  std::vector<int> off(dims.size() + 1, 0);
  for (std::size_t i = 0; i < dims.size(); ++i) off[i + 1] = off[i] + dims[i];
  return off;
}

}  // namespace detail

// f(x) = 1/2 x^T H x + b^T x on the flat vector, with exact beta and
// beta_bar computed from H. Dependencies are read off the block
// sparsity of H.
inline SmoothOracle make_quadratic_smooth(const Eigen::MatrixXd& H,
                                          const Eigen::VectorXd& lin,
                                          const std::vector<int>& primal_dims) {
  const int n = [&] {
    int s = 0;
    for (int d : primal_dims) s += d;
    return s;
  }();
  if (H.rows() != n || H.cols() != n || lin.size() != n)
    throw StructuralError("quadratic smooth: dimension mismatch");
  if (!H.isApprox(H.transpose(), 1e-12))
    throw ConfigError("quadratic smooth: H must be symmetric");

  const int m = static_cast<int>(primal_dims.size());
  auto off = detail::block_offsets(primal_dims);

  SmoothOracle f;
  Eigen::MatrixXd Hc = H;
  Eigen::VectorXd bc = lin;
  std::vector<int> dims = primal_dims;
  f.eval = [Hc, bc, dims](const BlockVector& x) {
    Eigen::VectorXd v = x.flat();
    return 0.5 * v.dot(Hc * v) + bc.dot(v);
  };
  f.grad_block = [Hc, bc, off, dims](int i, const BlockVector& x) {
    Eigen::VectorXd g = bc.segment(off[i], dims[i]);
    for (int j = 0; j < static_cast<int>(dims.size()); ++j) {
      const auto block = Hc.block(off[i], off[j], dims[i], dims[j]);
      if (!block.isZero(0.0)) g.noalias() += block * x[j];
    }
    return g;
  };
  f.beta = operator_norm(H);
  f.beta_bar.resize(m);
  f.depends_on.assign(m, {});
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd row = H.middleRows(off[i], primal_dims[i]);
    row.middleCols(off[i], primal_dims[i]).setZero();
    f.beta_bar[i] = operator_norm(row);
    for (int j = 0; j < m; ++j)
      if (j != i &&
          !H.block(off[i], off[j], primal_dims[i], primal_dims[j]).isZero(0.0))
        f.depends_on[i].push_back(j);
  }
  f.quad = QuadraticForm{Hc, bc};
  return f;
}

// One pairwise term of the coupling cost: agent `i` pays
// lambda/2 |C_hat (x_i - x_j) - d|^2.
struct CouplingPair {
  int i = 0;
  int j = 0;
  double lambda = 1.0;
  Eigen::VectorXd d;
};

// f(x) = sum over pairs of lambda/2 |C_hat (x_i - x_j) - d_ij|^2.
// Exact Hessian-based beta and beta_bar; since f is quadratic the
// block-Lipschitz inequality holds with these values.
inline SmoothOracle make_quadratic_coupling(const std::vector<int>& primal_dims,
                                            const std::vector<CouplingPair>& pairs,
                                            const Eigen::MatrixXd& C_hat) {
  const int m = static_cast<int>(primal_dims.size());
  const int n = [&] {
    int s = 0;
    for (int d : primal_dims) s += d;
    return s;
  }();
  auto off = detail::block_offsets(primal_dims);

  Eigen::MatrixXd CtC = C_hat.transpose() * C_hat;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(n);
  for (const auto& p : pairs) {
    if (p.i < 0 || p.i >= m || p.j < 0 || p.j >= m || p.i == p.j)
      throw StructuralError("quadratic coupling: bad pair indices");
    if (primal_dims[p.i] != primal_dims[p.j])
      throw StructuralError("quadratic coupling: paired blocks must match");
    if (C_hat.cols() != primal_dims[p.i])
      throw StructuralError("quadratic coupling: C_hat column mismatch");
    if (p.d.size() != C_hat.rows())
      throw StructuralError("quadratic coupling: target size mismatch");
    const int ni = primal_dims[p.i];
    H.block(off[p.i], off[p.i], ni, ni) += p.lambda * CtC;
    H.block(off[p.j], off[p.j], ni, ni) += p.lambda * CtC;
    H.block(off[p.i], off[p.j], ni, ni) -= p.lambda * CtC;
    H.block(off[p.j], off[p.i], ni, ni) -= p.lambda * CtC;
    Eigen::VectorXd t = p.lambda * C_hat.transpose() * p.d;
    lin.segment(off[p.i], ni) -= t;
    lin.segment(off[p.j], ni) += t;
  }
  return make_quadratic_smooth(H, lin, primal_dims);
}

}  // namespace pdsplit
