#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/rng.hpp"

namespace pdsplit {

// Block partition of the primal space R^n and the dual space R^r into m
// agent-owned pieces. Agent i owns x_i in R^{primal[i]} and u_i in
// R^{dual[i]}.
struct BlockDims {
  std::vector<int> primal;
  std::vector<int> dual;

  BlockDims() = default;
  BlockDims(std::vector<int> primal_dims, std::vector<int> dual_dims)
      : primal(std::move(primal_dims)), dual(std::move(dual_dims)) {
    if (primal.empty() || primal.size() != dual.size())
      throw StructuralError("BlockDims: need m >= 1 primal and dual sizes");
    for (int n : primal)
      if (n < 1) throw StructuralError("BlockDims: primal block size < 1");
    for (int r : dual)
      if (r < 1) throw StructuralError("BlockDims: dual block size < 1");
  }

  int agents() const { return static_cast<int>(primal.size()); }
  int total_primal() const {
    int n = 0;
    for (int d : primal) n += d;
    return n;
  }
  int total_dual() const {
    int r = 0;
    for (int d : dual) r += d;
    return r;
  }
};

// A dense real vector partitioned into m blocks.
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::vector<Eigen::VectorXd> blocks)
      : blocks_(std::move(blocks)) {}

  static BlockVector zeros(const std::vector<int>& dims) {
    std::vector<Eigen::VectorXd> b;
    b.reserve(dims.size());
    for (int d : dims) b.push_back(Eigen::VectorXd::Zero(d));
    return BlockVector(std::move(b));
  }

  static BlockVector from_flat(const Eigen::VectorXd& v,
                               const std::vector<int>& dims) {
    std::vector<Eigen::VectorXd> b;
    b.reserve(dims.size());
    int off = 0;
    for (int d : dims) {
      if (off + d > v.size())
        throw StructuralError("BlockVector::from_flat: vector too short");
      b.push_back(v.segment(off, d));
      off += d;
    }
    if (off != v.size())
      throw StructuralError("BlockVector::from_flat: vector too long");
    return BlockVector(std::move(b));
  }

  int block_count() const { return static_cast<int>(blocks_.size()); }
  const Eigen::VectorXd& operator[](int i) const { return blocks_[i]; }
  Eigen::VectorXd& operator[](int i) { return blocks_[i]; }

  std::vector<int> dims() const {
    std::vector<int> d;
    d.reserve(blocks_.size());
    for (const auto& b : blocks_) d.push_back(static_cast<int>(b.size()));
    return d;
  }

  int size() const {
    int n = 0;
    for (const auto& b : blocks_) n += static_cast<int>(b.size());
    return n;
  }

  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(size());
    int off = 0;
    for (const auto& b : blocks_) {
      v.segment(off, b.size()) = b;
      off += static_cast<int>(b.size());
    }
    return v;
  }

  double dot(const BlockVector& other) const {
    check_conformant(other);
    double s = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      s += blocks_[i].dot(other.blocks_[i]);
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  bool all_finite() const {
    for (const auto& b : blocks_)
      if (!b.allFinite()) return false;
    return true;
  }

  BlockVector operator-(const BlockVector& other) const {
    check_conformant(other);
    std::vector<Eigen::VectorXd> b;
    b.reserve(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      b.push_back(blocks_[i] - other.blocks_[i]);
    return BlockVector(std::move(b));
  }

 private:
  void check_conformant(const BlockVector& other) const {
    if (other.blocks_.size() != blocks_.size())
      throw StructuralError("BlockVector: block count mismatch");
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (other.blocks_[i].size() != blocks_[i].size())
        throw StructuralError("BlockVector: block size mismatch");
  }

  std::vector<Eigen::VectorXd> blocks_;
};

// Stacked primal-dual variable z = (x, u).
struct PrimalDualPoint {
  BlockVector x;
  BlockVector u;

  bool all_finite() const { return x.all_finite() && u.all_finite(); }
  double squared_distance(const PrimalDualPoint& other) const {
    return (x - other.x).squared_norm() + (u - other.u).squared_norm();
  }
};

inline PrimalDualPoint zeros_point(const BlockDims& dims) {
  return PrimalDualPoint{BlockVector::zeros(dims.primal),
                         BlockVector::zeros(dims.dual)};
}

namespace detail {

// Power iteration on A^T A from a fixed-seed pseudorandom unit start.
// A deterministic all-ones start is unusable here: it is exactly
// orthogonal to the top singular vector of graph-difference Hessians
// such as [[1,-1],[-1,1]], so the iteration would silently converge to
// a smaller singular value.
inline Eigen::VectorXd power_start(Eigen::Index n, std::uint64_t salt) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = 0.5 + u01(hash_key(0x51ab8f00dULL + salt, static_cast<std::uint64_t>(i)));
  v.normalize();
  return v;
}

}  // namespace detail

struct OperatorNormResult {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Spectral norm estimate of a dense matrix by power iteration, with a
// relative-change stopping rule. Deterministic for a given matrix.
inline OperatorNormResult operator_norm_full(const Eigen::MatrixXd& A,
                                             double tol = 1e-10,
                                             int max_iters = 10000) {
  if (tol <= 0) throw ConfigError("operator_norm: tol must be positive");
  OperatorNormResult res;
  if (A.size() == 0 || A.isZero(0.0)) return res;

  for (std::uint64_t attempt = 0; attempt < 4; ++attempt) {
    Eigen::VectorXd v = detail::power_start(A.cols(), attempt);
    double est = 0.0;
    bool stalled = false;
    for (int it = 0; it < max_iters; ++it) {
      Eigen::VectorXd y = A * v;
      double s = y.norm();
      if (s == 0.0) {
        stalled = true;  // start landed in the null space; retry
        break;
      }
      double change = std::abs(s - est);
      est = s;
      ++res.iterations;
      if (it >= 1 && change <= tol * std::max(est, 1e-300)) {
        res.value = est;
        res.converged = true;
        return res;
      }
      Eigen::VectorXd z = A.transpose() * y;
      double zn = z.norm();
      if (zn == 0.0) {
        stalled = true;
        break;
      }
      v = z / zn;
    }
    if (!stalled) {
      res.value = est;
      res.converged = false;  // hit the cap; est is the best available
      return res;
    }
  }
  return res;  // only reachable for the zero map
}

inline double operator_norm(const Eigen::MatrixXd& A, double tol = 1e-10,
                            int max_iters = 10000) {
  return operator_norm_full(A, tol, max_iters).value;
}

// The m x m block operator L. Block (i, j) maps R^{n_j} -> R^{r_i};
// absent blocks are structural zeros.
class BlockLinearMap {
 public:
  BlockLinearMap() = default;
  explicit BlockLinearMap(BlockDims dims)
      : dims_(std::move(dims)),
        blocks_(static_cast<std::size_t>(dims_.agents()) * dims_.agents()),
        nonzero_(blocks_.size(), 0) {}

  const BlockDims& dims() const { return dims_; }
  int agents() const { return dims_.agents(); }

  void set_block(int i, int j, Eigen::MatrixXd block) {
    check_index(i, j);
    if (block.rows() != dims_.dual[i] || block.cols() != dims_.primal[j])
      throw StructuralError("BlockLinearMap: block (" + std::to_string(i) +
                            "," + std::to_string(j) + ") must be " +
                            std::to_string(dims_.dual[i]) + "x" +
                            std::to_string(dims_.primal[j]));
    nonzero_[idx(i, j)] = block.isZero(0.0) ? 0 : 1;
    blocks_[idx(i, j)] = std::move(block);
  }

  void clear_block(int i, int j) {
    check_index(i, j);
    blocks_[idx(i, j)].reset();
    nonzero_[idx(i, j)] = 0;
  }

  bool has_block(int i, int j) const {
    check_index(i, j);
    return blocks_[idx(i, j)].has_value();
  }

  // Present and not identically zero; cached at insertion.
  bool block_nonzero(int i, int j) const {
    check_index(i, j);
    return nonzero_[idx(i, j)] != 0;
  }

  const Eigen::MatrixXd& block(int i, int j) const {
    check_index(i, j);
    const auto& b = blocks_[idx(i, j)];
    if (!b) throw StructuralError("BlockLinearMap: block absent");
    return *b;
  }

  // L_{i.} x = sum_j L_ij x_j
  Eigen::VectorXd apply_row(int i, const BlockVector& x) const {
    check_agent(i);
    check_primal(x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dims_.dual[i]);
    for (int j = 0; j < agents(); ++j) {
      const auto& b = blocks_[idx(i, j)];
      if (b) out.noalias() += (*b) * x[j];
    }
    return out;
  }

  // L_{.i}^T u = sum_j L_ji^T u_j
  Eigen::VectorXd apply_col_adjoint(int i, const BlockVector& u) const {
    check_agent(i);
    check_dual(u);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dims_.primal[i]);
    for (int j = 0; j < agents(); ++j) {
      const auto& b = blocks_[idx(j, i)];
      if (b) out.noalias() += b->transpose() * u[j];
    }
    return out;
  }

  BlockVector apply(const BlockVector& x) const {
    check_primal(x);
    std::vector<Eigen::VectorXd> out;
    out.reserve(agents());
    for (int i = 0; i < agents(); ++i) out.push_back(apply_row(i, x));
    return BlockVector(std::move(out));
  }

  BlockVector apply_adjoint(const BlockVector& u) const {
    check_dual(u);
    std::vector<Eigen::VectorXd> out;
    out.reserve(agents());
    for (int i = 0; i < agents(); ++i) out.push_back(apply_col_adjoint(i, u));
    return BlockVector(std::move(out));
  }

  bool is_block_diagonal() const {
    for (int i = 0; i < agents(); ++i)
      for (int j = 0; j < agents(); ++j)
        if (i != j && block_nonzero(i, j)) return false;
    return true;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(dims_.total_dual(),
                                              dims_.total_primal());
    int roff = 0;
    for (int i = 0; i < agents(); ++i) {
      int coff = 0;
      for (int j = 0; j < agents(); ++j) {
        const auto& b = blocks_[idx(i, j)];
        if (b) D.block(roff, coff, dims_.dual[i], dims_.primal[j]) = *b;
        coff += dims_.primal[j];
      }
      roff += dims_.dual[i];
    }
    return D;
  }

  // Dense assembly of block row i (r_i x n) and block column i (r x n_i).
  Eigen::MatrixXd dense_row(int i) const {
    check_agent(i);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(dims_.dual[i],
                                              dims_.total_primal());
    int coff = 0;
    for (int j = 0; j < agents(); ++j) {
      const auto& b = blocks_[idx(i, j)];
      if (b) R.block(0, coff, dims_.dual[i], dims_.primal[j]) = *b;
      coff += dims_.primal[j];
    }
    return R;
  }

  Eigen::MatrixXd dense_col(int i) const {
    check_agent(i);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(dims_.total_dual(),
                                              dims_.primal[i]);
    int roff = 0;
    for (int j = 0; j < agents(); ++j) {
      const auto& b = blocks_[idx(j, i)];
      if (b) C.block(roff, 0, dims_.dual[j], dims_.primal[i]) = *b;
      roff += dims_.dual[j];
    }
    return C;
  }

  double norm_diag(int i, double tol = 1e-10) const {
    check_agent(i);
    const auto& b = blocks_[idx(i, i)];
    if (!b) return 0.0;
    return operator_norm(*b, tol);
  }
  double norm_row(int i, double tol = 1e-10) const {
    return operator_norm(dense_row(i), tol);
  }
  double norm_col(int i, double tol = 1e-10) const {
    return operator_norm(dense_col(i), tol);
  }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * agents() + j;
  }
  void check_agent(int i) const {
    if (i < 0 || i >= agents())
      throw StructuralError("BlockLinearMap: agent index out of range");
  }
  void check_index(int i, int j) const {
    check_agent(i);
    check_agent(j);
  }
  void check_primal(const BlockVector& x) const {
    if (x.block_count() != agents())
      throw StructuralError("BlockLinearMap: primal block count mismatch");
    for (int j = 0; j < agents(); ++j)
      if (x[j].size() != dims_.primal[j])
        throw StructuralError("BlockLinearMap: primal block size mismatch");
  }
  void check_dual(const BlockVector& u) const {
    if (u.block_count() != agents())
      throw StructuralError("BlockLinearMap: dual block count mismatch");
    for (int j = 0; j < agents(); ++j)
      if (u[j].size() != dims_.dual[j])
        throw StructuralError("BlockLinearMap: dual block size mismatch");
  }

  BlockDims dims_;
  std::vector<std::optional<Eigen::MatrixXd>> blocks_;
  std::vector<char> nonzero_;
};

enum class MetricKind { D, Mg, Mh, M, PiInvD, Custom };

// Block-diagonal metric with one positive scalar weight per block.
// A metric may cover the primal side, the dual side, or both.
struct DiagonalBlockMetric {
  MetricKind kind = MetricKind::Custom;
  std::vector<double> primal_weights;  // empty when the metric ignores x
  std::vector<double> dual_weights;    // empty when the metric ignores u

  DiagonalBlockMetric() = default;
  DiagonalBlockMetric(MetricKind k, std::vector<double> pw,
                      std::vector<double> dw)
      : kind(k), primal_weights(std::move(pw)), dual_weights(std::move(dw)) {
    for (double w : primal_weights)
      if (!(w > 0)) throw ConfigError("metric weight must be positive");
    for (double w : dual_weights)
      if (!(w > 0)) throw ConfigError("metric weight must be positive");
  }

  double primal_norm_sq(const BlockVector& x) const {
    if (primal_weights.empty())
      throw ConfigError("metric has no primal weights");
    if (static_cast<int>(primal_weights.size()) != x.block_count())
      throw StructuralError("metric/vector block count mismatch");
    double s = 0.0;
    for (int i = 0; i < x.block_count(); ++i)
      s += primal_weights[i] * x[i].squaredNorm();
    return s;
  }

  double dual_norm_sq(const BlockVector& u) const {
    if (dual_weights.empty()) throw ConfigError("metric has no dual weights");
    if (static_cast<int>(dual_weights.size()) != u.block_count())
      throw StructuralError("metric/vector block count mismatch");
    double s = 0.0;
    for (int i = 0; i < u.block_count(); ++i)
      s += dual_weights[i] * u[i].squaredNorm();
    return s;
  }

  double norm_sq(const PrimalDualPoint& z) const {
    double s = 0.0;
    if (!primal_weights.empty()) s += primal_norm_sq(z.x);
    if (!dual_weights.empty()) s += dual_norm_sq(z.u);
    return s;
  }

  double distance_sq(const PrimalDualPoint& a, const PrimalDualPoint& b) const {
    return norm_sq(PrimalDualPoint{a.x - b.x, a.u - b.u});
  }
};

inline std::vector<double> reciprocal(const std::vector<double>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) {
    if (!(x > 0)) throw ConfigError("reciprocal of nonpositive weight");
    out.push_back(1.0 / x);
  }
  return out;
}

// D = blkdiag(Gamma^{ -1}, Sigma^{-1}).
inline DiagonalBlockMetric make_metric_D(const std::vector<double>& gamma,
                                         const std::vector<double>& sigma) {
  return DiagonalBlockMetric(MetricKind::D, reciprocal(gamma),
                             reciprocal(sigma));
}

inline DiagonalBlockMetric make_metric_Mg(const std::vector<double>& mu_g) {
  return DiagonalBlockMetric(MetricKind::Mg, mu_g, {});
}

inline DiagonalBlockMetric make_metric_Mh(const std::vector<double>& mu_h) {
  return DiagonalBlockMetric(MetricKind::Mh, {}, mu_h);
}

inline DiagonalBlockMetric make_metric_M(const std::vector<double>& mu_g,
                                         const std::vector<double>& mu_h) {
  return DiagonalBlockMetric(MetricKind::M, mu_g, mu_h);
}

inline DiagonalBlockMetric make_metric_Pi_inv_D(
    const std::vector<double>& p, const std::vector<double>& gamma,
    const std::vector<double>& sigma) {
  std::vector<double> pw = reciprocal(gamma);
  std::vector<double> dw = reciprocal(sigma);
  if (p.size() != pw.size() || p.size() != dw.size())
    throw StructuralError("activation probability count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0)) throw ConfigError("activation probability must be > 0");
    pw[i] /= p[i];
    dw[i] /= p[i];
  }
  return DiagonalBlockMetric(MetricKind::PiInvD, std::move(pw),
                             std::move(dw));
}

// The saddle metric [[Gamma^{-1}, -L^T], [-L, Sigma^{-1}]]. Positive
// definite exactly when Gamma^{-1} - L^T Sigma L is.
struct SaddleMetricP {
  std::vector<double> gamma;
  std::vector<double> sigma;
  const BlockLinearMap* L = nullptr;

  SaddleMetricP(std::vector<double> g, std::vector<double> s,
                const BlockLinearMap& map)
      : gamma(std::move(g)), sigma(std::move(s)), L(&map) {
    for (double v : gamma)
      if (!(v > 0)) throw ConfigError("SaddleMetricP: gamma must be > 0");
    for (double v : sigma)
      if (!(v > 0)) throw ConfigError("SaddleMetricP: sigma must be > 0");
    if (static_cast<int>(gamma.size()) != map.agents() ||
        static_cast<int>(sigma.size()) != map.agents())
      throw StructuralError("SaddleMetricP: stepsize count mismatch");
  }

  double norm_sq(const PrimalDualPoint& z) const {
    double s = 0.0;
    for (int i = 0; i < L->agents(); ++i) {
      s += z.x[i].squaredNorm() / gamma[i];
      s += z.u[i].squaredNorm() / sigma[i];
    }
    BlockVector Lx = L->apply(z.x);
    return s - 2.0 * Lx.dot(z.u);
  }

  double distance_sq(const PrimalDualPoint& a, const PrimalDualPoint& b) const {
    return norm_sq(PrimalDualPoint{a.x - b.x, a.u - b.u});
  }

  // Cholesky of the dense Schur complement, attempted only at moderate
  // size; larger problems rely on the stepsize condition that produced
  // the metric.
  bool validate_positive_definite(int max_total_dim = 2000) const {
    const BlockDims& d = L->dims();
    if (d.total_primal() + d.total_dual() > max_total_dim) return true;
    Eigen::MatrixXd Ld = L->dense();
    Eigen::MatrixXd S =
        Eigen::MatrixXd::Zero(d.total_primal(), d.total_primal());
    int off = 0;
    for (int i = 0; i < d.agents(); ++i) {
      S.diagonal().segment(off, d.primal[i]).array() += 1.0 / gamma[i];
      off += d.primal[i];
    }
    Eigen::VectorXd sig(d.total_dual());
    off = 0;
    for (int i = 0; i < d.agents(); ++i) {
      sig.segment(off, d.dual[i]).setConstant(sigma[i]);
      off += d.dual[i];
    }
    S -= Ld.transpose() * sig.asDiagonal() * Ld;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    return llt.info() == Eigen::Success;
  }
};

}  // namespace pdsplit
