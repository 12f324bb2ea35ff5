#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "pdsplit/block.hpp"
#include "pdsplit/errors.hpp"
#include "pdsplit/functions.hpp"

namespace pdsplit {

// A validated problem instance:
//   minimize f(x) + sum_i g_i(x_i) + h_i(L_{i.} x)
// with strongly convex g_i. f_dependency[i] lists the blocks j != i that
// nabla_i f reads; it is declared by the builder rather than probed,
// since a numerical probe can miss dependencies.
struct ProblemSpec {
  BlockDims dims;
  SmoothOracle f;
  std::vector<ProxOracle> g;
  std::vector<ConjugateProxOracle> h;
  BlockLinearMap L;
  std::vector<std::vector<int>> f_dependency;

  int agents() const { return dims.agents(); }

  void validate() const {
    const int m = agents();
    if (static_cast<int>(g.size()) != m || static_cast<int>(h.size()) != m)
      throw StructuralError("ProblemSpec: need one g and one h per agent");
    if (L.agents() != m)
      throw StructuralError("ProblemSpec: L block count mismatch");
    if (static_cast<int>(f.beta_bar.size()) != m)
      throw StructuralError("ProblemSpec: beta_bar size mismatch");
    if (static_cast<int>(f_dependency.size()) != m)
      throw StructuralError("ProblemSpec: f_dependency size mismatch");
    for (int i = 0; i < m; ++i) {
      if (!(g[i].mu > 0))
        throw ConfigError("ProblemSpec: g_" + std::to_string(i) +
                          " must be strongly convex (mu_g > 0)");
      for (int j : f_dependency[i])
        if (j < 0 || j >= m)
          throw StructuralError("ProblemSpec: f_dependency index out of range");
    }
  }
};

enum class Coupling { partial, total };

// Partial coupling: agents interact only through f (L block-diagonal).
inline Coupling classify_coupling(const ProblemSpec& spec) {
  return spec.L.is_block_diagonal() ? Coupling::partial : Coupling::total;
}

// Per-agent communication sets. N_in/N_out describe the coupling through
// f, M_p/M_d the coupling through L. Self-loops are excluded throughout:
// an agent always holds its own blocks with zero delay and never
// messages itself.
struct CouplingSets {
  std::vector<std::vector<int>> n_in;
  std::vector<std::vector<int>> n_out;
  std::vector<std::vector<int>> m_p;  // {j != i : L_ji != 0}
  std::vector<std::vector<int>> m_d;  // {j != i : L_ij != 0}
};

inline CouplingSets derive_coupling_sets(
    const ProblemSpec& spec, const std::vector<std::vector<int>>& f_dependency) {
  const int m = spec.agents();
  if (static_cast<int>(f_dependency.size()) != m)
    throw StructuralError("derive_coupling_sets: dependency size mismatch");
  CouplingSets cs;
  cs.n_in.assign(m, {});
  cs.n_out.assign(m, {});
  cs.m_p.assign(m, {});
  cs.m_d.assign(m, {});
  for (int i = 0; i < m; ++i) {
    for (int j : f_dependency[i]) {
      if (j < 0 || j >= m)
        throw StructuralError("derive_coupling_sets: index out of range");
      if (j == i) continue;
      cs.n_in[i].push_back(j);
    }
    std::sort(cs.n_in[i].begin(), cs.n_in[i].end());
    cs.n_in[i].erase(std::unique(cs.n_in[i].begin(), cs.n_in[i].end()),
                     cs.n_in[i].end());
  }
  for (int i = 0; i < m; ++i)
    for (int j : cs.n_in[i]) cs.n_out[j].push_back(i);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      if (spec.L.block_nonzero(j, i)) cs.m_p[i].push_back(j);
      if (spec.L.block_nonzero(i, j)) cs.m_d[i].push_back(j);
    }
  }
  return cs;
}

inline CouplingSets derive_coupling_sets(const ProblemSpec& spec) {
  return derive_coupling_sets(spec, spec.f_dependency);
}

// All-to-all sets; used to build fully populated views for diagnostics.
inline CouplingSets full_coupling(int m) {
  CouplingSets cs;
  cs.n_in.assign(m, {});
  cs.n_out.assign(m, {});
  cs.m_p.assign(m, {});
  cs.m_d.assign(m, {});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (j != i) {
        cs.n_in[i].push_back(j);
        cs.n_out[i].push_back(j);
        cs.m_p[i].push_back(j);
        cs.m_d[i].push_back(j);
      }
  return cs;
}

// Every scalar the stepsize rules and rate certificates consume.
// R_s is +infinity when some h_i is not smooth (mu_h^i = 0); the tuning
// layer turns that sentinel into a precise inapplicability diagnosis.
struct ProblemConstants {
  double beta = 0.0;
  std::vector<double> beta_bar;
  std::vector<double> mu_g;
  std::vector<double> mu_h;
  std::vector<double> norm_L_diag;
  std::vector<double> norm_L_row;
  std::vector<double> norm_L_col;
  double R_s = 0.0;
  double C_s = 0.0;
  double beta_bar_weighted = 0.0;  // |beta_bar|^2_{M_g^{-1}}

  double mu_g_min() const {
    return *std::min_element(mu_g.begin(), mu_g.end());
  }
  double mu_h_min() const {
    return *std::min_element(mu_h.begin(), mu_h.end());
  }
  std::vector<int> nonsmooth_h_agents() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < mu_h.size(); ++i)
      if (!(mu_h[i] > 0)) out.push_back(static_cast<int>(i));
    return out;
  }
};

// Operator-norm estimates are inflated by a hair before use so that a
// power-iteration underestimate cannot void the stepsize bounds.
inline constexpr double kNormSafetyInflation = 1e-6;

inline ProblemConstants compute_constants(const ProblemSpec& spec,
                                          double norm_tol = 1e-10) {
  spec.validate();
  const int m = spec.agents();
  ProblemConstants c;
  c.beta = spec.f.beta;
  c.beta_bar = spec.f.beta_bar;
  c.mu_g.resize(m);
  c.mu_h.resize(m);
  c.norm_L_diag.resize(m);
  c.norm_L_row.resize(m);
  c.norm_L_col.resize(m);
  for (int i = 0; i < m; ++i) {
    c.mu_g[i] = spec.g[i].mu;
    c.mu_h[i] = spec.h[i].mu_h;
    const double inflate = 1.0 + kNormSafetyInflation;
    c.norm_L_diag[i] = spec.L.norm_diag(i, norm_tol) * inflate;
    c.norm_L_row[i] = spec.L.norm_row(i, norm_tol) * inflate;
    c.norm_L_col[i] = spec.L.norm_col(i, norm_tol) * inflate;
  }
  c.R_s = 0.0;
  c.C_s = 0.0;
  c.beta_bar_weighted = 0.0;
  for (int i = 0; i < m; ++i) {
    if (c.mu_h[i] > 0)
      c.R_s += c.norm_L_row[i] * c.norm_L_row[i] / c.mu_h[i];
    else if (c.norm_L_row[i] > 0)
      c.R_s = std::numeric_limits<double>::infinity();
    c.C_s += c.norm_L_col[i] * c.norm_L_col[i] / c.mu_g[i];
    c.beta_bar_weighted += c.beta_bar[i] * c.beta_bar[i] / c.mu_g[i];
  }
  // A single non-smooth h_i makes the R_s-based rules inapplicable even
  // if its row happens to be zero only numerically; keep the sentinel
  // strict.
  for (int i = 0; i < m; ++i)
    if (!(c.mu_h[i] > 0)) c.R_s = std::numeric_limits<double>::infinity();
  return c;
}

}  // namespace pdsplit
