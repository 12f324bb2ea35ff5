#pragma once

// Shared randomized test instances. All quadratic, so the exact KKT
// reference solver applies and every theory suite has a trustworthy z*.

#include <vector>

#include "pdsplit/pdsplit.hpp"
#include "support/oracles.hpp"

namespace test_instances {

using namespace pdsplit;
namespace to = test_oracles;

// Partial coupling: block-diagonal L, strongly convex quadratic g,
// smooth quadratic h, and a quadratic coupling f over a chain, so the
// delay-dependent beta_bar term is exercised.
inline ProblemSpec random_partial(std::uint64_t seed, int m = 3, int ni = 2,
                                  int ri = 2, bool with_coupling = true) {
  BlockDims dims(std::vector<int>(m, ni), std::vector<int>(m, ri));
  ProblemSpec spec;
  spec.dims = dims;
  spec.L = BlockLinearMap(dims);
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd Lii = to::rand_mat(ri, ni, seed, 50 + i);
    spec.L.set_block(i, i, Lii);
    spec.g.push_back(make_quadratic_prox(to::rand_spd(ni, seed, 1.0, 80 + i)));
    spec.h.push_back(ConjugateProxOracle{
        make_squared_loss(2.0 * to::rand_vec(ri, seed, 110 + i)), 1.0});
  }
  if (with_coupling) {
    std::vector<CouplingPair> pairs;
    for (int i = 0; i + 1 < m; ++i)
      pairs.push_back(CouplingPair{i, i + 1, 0.5,
                                   to::rand_vec(ni, seed, 140 + i)});
    spec.f = make_quadratic_coupling(dims.primal, pairs,
                                     Eigen::MatrixXd::Identity(ni, ni));
  } else {
    spec.f = zero_smooth(dims.primal);
  }
  spec.f_dependency = spec.f.depends_on;
  spec.validate();
  return spec;
}

// Total coupling: every block of L present at moderate scale, unit
// strong convexity on both sides (the rate-suite configuration), plus
// an optional quadratic coupling f.
inline ProblemSpec random_total(std::uint64_t seed, int m = 4, int ni = 3,
                                int ri = 2, bool with_coupling = true) {
  BlockDims dims(std::vector<int>(m, ni), std::vector<int>(m, ri));
  ProblemSpec spec;
  spec.dims = dims;
  spec.L = BlockLinearMap(dims);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i == j || uniform_draw(seed, 7u, i, j) < 0.6)
        spec.L.set_block(i, j, to::rand_mat(ri, ni, seed, 10 * i + j));
  if (spec.L.is_block_diagonal())
    spec.L.set_block(0, m - 1, to::rand_mat(ri, ni, seed, 99));
  for (int i = 0; i < m; ++i) {
    spec.g.push_back(
        make_quadratic_prox(Eigen::MatrixXd::Identity(ni, ni)));
    spec.h.push_back(ConjugateProxOracle{
        make_squared_loss(2.0 * to::rand_vec(ri, seed, 200 + i)), 1.0});
  }
  if (with_coupling) {
    std::vector<CouplingPair> pairs{
        CouplingPair{0, 1, 0.3, to::rand_vec(ni, seed, 300)}};
    spec.f = make_quadratic_coupling(dims.primal, pairs,
                                     Eigen::MatrixXd::Identity(ni, ni));
  } else {
    spec.f = zero_smooth(dims.primal);
  }
  spec.f_dependency = spec.f.depends_on;
  spec.validate();
  return spec;
}

inline PrimalDualPoint random_start(const BlockDims& dims, std::uint64_t seed) {
  PrimalDualPoint z;
  std::vector<Eigen::VectorXd> xb, ub;
  for (int i = 0; i < dims.agents(); ++i) {
    xb.push_back(to::rand_vec(dims.primal[i], seed, 400 + i));
    ub.push_back(to::rand_vec(dims.dual[i], seed, 500 + i));
  }
  z.x = BlockVector(std::move(xb));
  z.u = BlockVector(std::move(ub));
  return z;
}

}  // namespace test_instances
