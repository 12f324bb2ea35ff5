#include <gtest/gtest.h>

#include "pdsplit/block.hpp"
#include "support/oracles.hpp"

using namespace pdsplit;
namespace to = test_oracles;

namespace {

BlockLinearMap random_map(const BlockDims& dims, std::uint64_t seed,
                          double keep_prob = 1.0) {
  BlockLinearMap L(dims);
  for (int i = 0; i < dims.agents(); ++i)
    for (int j = 0; j < dims.agents(); ++j) {
      if (keep_prob < 1.0 &&
          uniform_draw(seed, 0xb10cu, i, j) >= keep_prob)
        continue;
      L.set_block(i, j, to::rand_mat(dims.dual[i], dims.primal[j], seed,
                                     100 * i + j));
    }
  return L;
}

BlockVector random_block_vector(const std::vector<int>& dims,
                                std::uint64_t seed, std::uint64_t tag = 0) {
  std::vector<Eigen::VectorXd> blocks;
  for (std::size_t i = 0; i < dims.size(); ++i)
    blocks.push_back(to::rand_vec(dims[i], seed, tag * 64 + i));
  return BlockVector(std::move(blocks));
}

}  // namespace

TEST(BlockDims, ValidatesShapes) {
  EXPECT_THROW(BlockDims({}, {}), StructuralError);
  EXPECT_THROW(BlockDims({1, 0}, {1, 1}), StructuralError);
  EXPECT_THROW(BlockDims({1}, {1, 1}), StructuralError);
  BlockDims d({2, 3}, {1, 4});
  EXPECT_EQ(d.agents(), 2);
  EXPECT_EQ(d.total_primal(), 5);
  EXPECT_EQ(d.total_dual(), 5);
}

TEST(ApplyMap, BlockIdentity) {
  BlockDims dims({2, 2}, {2, 2});
  BlockLinearMap L(dims);
  L.set_block(0, 0, Eigen::MatrixXd::Identity(2, 2));
  L.set_block(1, 1, Eigen::MatrixXd::Identity(2, 2));
  BlockVector x = random_block_vector(dims.primal, 7);
  BlockVector y = L.apply(x);
  EXPECT_EQ((y[0] - x[0]).norm(), 0.0);
  EXPECT_EQ((y[1] - x[1]).norm(), 0.0);
}

TEST(ApplyMap, SingleOffDiagonalBlock) {
  // Only block (0,1) = [[1, 2]]; x = ((0), (3,4)) -> ((11), (0)).
  BlockDims dims({1, 2}, {1, 1});
  BlockLinearMap L(dims);
  Eigen::MatrixXd b(1, 2);
  b << 1, 2;
  L.set_block(0, 1, b);
  BlockVector x(std::vector<Eigen::VectorXd>{
      Eigen::VectorXd::Zero(1), (Eigen::VectorXd(2) << 3, 4).finished()});
  BlockVector y = L.apply(x);
  EXPECT_DOUBLE_EQ(y[0][0], 11.0);
  EXPECT_DOUBLE_EQ(y[1][0], 0.0);
}

TEST(ApplyMap, MatchesDenseOracle) {
  BlockDims dims({2, 3, 2}, {1, 2, 1});
  BlockLinearMap L = random_map(dims, 42);
  BlockVector x = random_block_vector(dims.primal, 5);
  Eigen::VectorXd dense = L.dense() * x.flat();
  EXPECT_LE((L.apply(x).flat() - dense).norm(), 1e-13 * (1 + dense.norm()));
}

TEST(ApplyMap, DimensionMismatchThrows) {
  BlockDims dims({2, 2}, {2, 2});
  BlockLinearMap L(dims);
  EXPECT_THROW(L.set_block(0, 0, Eigen::MatrixXd::Zero(3, 2)),
               StructuralError);
  BlockVector bad = random_block_vector({2, 3}, 1);
  EXPECT_THROW(L.apply(bad), StructuralError);
  EXPECT_THROW(L.apply_row(2, random_block_vector({2, 2}, 1)),
               StructuralError);
}

TEST(ApplyRow, BlockDiagonalReducesToDiagonalBlock) {
  BlockDims dims({2, 3}, {2, 3});
  BlockLinearMap L(dims);
  L.set_block(0, 0, to::rand_mat(2, 2, 3, 0));
  L.set_block(1, 1, to::rand_mat(3, 3, 3, 1));
  BlockVector x = random_block_vector(dims.primal, 9);
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd expect = L.block(i, i) * x[i];
    EXPECT_EQ((L.apply_row(i, x) - expect).norm(), 0.0);
  }
}

TEST(ApplyColAdjoint, ColumnSumOnes) {
  BlockDims dims({1, 1}, {1, 1});
  BlockLinearMap L(dims);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) L.set_block(i, j, Eigen::MatrixXd::Ones(1, 1));
  BlockVector u(std::vector<Eigen::VectorXd>{Eigen::VectorXd::Ones(1),
                                             Eigen::VectorXd::Ones(1)});
  EXPECT_DOUBLE_EQ(L.apply_col_adjoint(0, u)[0], 2.0);
}

TEST(AdjointIdentity, HoldsOnRandomInputs) {
  // <Lx, u> = sum_i <x_i, L_{.i}^T u> to within roundoff.
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    BlockDims dims({3, 2, 4}, {2, 2, 3});
    BlockLinearMap L = random_map(dims, seed, 0.7);
    BlockVector x = random_block_vector(dims.primal, seed + 10);
    BlockVector u = random_block_vector(dims.dual, seed + 20, 1);
    double lhs = L.apply(x).dot(u);
    double rhs = 0.0;
    for (int i = 0; i < dims.agents(); ++i)
      rhs += x[i].dot(L.apply_col_adjoint(i, u));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * (1 + std::abs(lhs)));
    double rhs2 = x.dot(L.apply_adjoint(u));
    EXPECT_LE(std::abs(lhs - rhs2),
              1e-10 * (1 + x.norm() * u.norm()));
  }
}

TEST(AdjointIdentity, RowDecomposition) {
  BlockDims dims({2, 3}, {3, 1});
  BlockLinearMap L = random_map(dims, 77, 0.8);
  BlockVector x = random_block_vector(dims.primal, 78);
  BlockVector y = L.apply(x);
  for (int i = 0; i < dims.agents(); ++i)
    EXPECT_EQ((y[i] - L.apply_row(i, x)).norm(), 0.0);
}

TEST(MetricNorm, ZeroVectorAndIdentityWeights) {
  BlockDims dims({2, 2}, {1, 1});
  PrimalDualPoint z = zeros_point(dims);
  auto D = make_metric_D({1.0, 1.0}, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(D.norm_sq(z), 0.0);
  z.x[0] << 1, 2;
  z.x[1] << 3, 4;
  z.u[0] << 5;
  z.u[1] << 6;
  EXPECT_DOUBLE_EQ(D.norm_sq(z), 1 + 4 + 9 + 16 + 25 + 36);
}

TEST(MetricNorm, RejectsNonpositiveWeights) {
  EXPECT_THROW(make_metric_M({1.0, 0.0}, {1.0, 1.0}), ConfigError);
  EXPECT_THROW(make_metric_D({1.0, -2.0}, {1.0, 1.0}), ConfigError);
}

TEST(MetricNorm, Homogeneity) {
  BlockDims dims({3, 2}, {2, 2});
  auto M = make_metric_M({0.5, 2.0}, {1.5, 3.0});
  PrimalDualPoint z{random_block_vector(dims.primal, 11),
                    random_block_vector(dims.dual, 12)};
  double base = M.norm_sq(z);
  PrimalDualPoint z3 = z;
  for (int i = 0; i < 2; ++i) {
    z3.x[i] *= -3.0;
    z3.u[i] *= -3.0;
  }
  EXPECT_NEAR(M.norm_sq(z3), 9.0 * base, 1e-10 * (1 + base));
  EXPECT_GT(base, 0.0);
}

TEST(SaddleMetricP, PositiveDefiniteUnderStepsizeCondition) {
  // gamma under the B=0 partial-coupling bound makes P positive definite.
  BlockDims dims({2, 3}, {2, 3});
  BlockLinearMap L(dims);
  L.set_block(0, 0, to::rand_mat(2, 2, 21, 0));
  L.set_block(1, 1, to::rand_mat(3, 3, 21, 1));
  std::vector<double> sigma(2), gamma(2);
  for (int i = 0; i < 2; ++i) {
    double nii = to::svd_norm(L.block(i, i));
    sigma[i] = 1.0 / nii;
    gamma[i] = 0.99 / (sigma[i] * nii * nii);
  }
  SaddleMetricP P(gamma, sigma, L);
  EXPECT_TRUE(P.validate_positive_definite());
  for (int t = 0; t < 1000; ++t) {
    PrimalDualPoint z{random_block_vector(dims.primal, 1000 + t),
                      random_block_vector(dims.dual, 2000 + t, 1)};
    EXPECT_GT(P.norm_sq(z), 0.0);
  }
  // P norm expands to |x|^2_{Gamma^-1} + |u|^2_{Sigma^-1} - 2 <Lx, u>.
  PrimalDualPoint z{random_block_vector(dims.primal, 31),
                    random_block_vector(dims.dual, 32, 1)};
  double manual = 0.0;
  for (int i = 0; i < 2; ++i)
    manual += z.x[i].squaredNorm() / gamma[i] +
              z.u[i].squaredNorm() / sigma[i];
  manual -= 2.0 * L.apply(z.x).dot(z.u);
  EXPECT_NEAR(P.norm_sq(z), manual, 1e-12 * (1 + std::abs(manual)));
}

TEST(SaddleMetricP, DetectsIndefiniteness) {
  BlockDims dims({1}, {1});
  BlockLinearMap L(dims);
  L.set_block(0, 0, Eigen::MatrixXd::Ones(1, 1));
  // gamma * sigma * |L|^2 = 4 > 1: Schur complement 1/2 - 2 < 0.
  SaddleMetricP P({2.0}, {2.0}, L);
  EXPECT_FALSE(P.validate_positive_definite());
}

TEST(OperatorNorm, IdentityAndDiagonal) {
  EXPECT_NEAR(operator_norm(Eigen::MatrixXd::Identity(4, 4)), 1.0, 1e-9);
  Eigen::MatrixXd D = Eigen::Vector2d(3.0, 1.0).asDiagonal();
  EXPECT_NEAR(operator_norm(D), 3.0, 1e-9);
}

TEST(OperatorNorm, ZeroOperatorIsZeroNotError) {
  EXPECT_EQ(operator_norm(Eigen::MatrixXd::Zero(3, 5)), 0.0);
}

TEST(OperatorNorm, MatchesSvdOracle) {
  for (std::uint64_t seed : {10u, 11u, 12u, 13u, 14u, 15u}) {
    Eigen::MatrixXd A = to::rand_mat(5, 7, seed);
    double expect = to::svd_norm(A);
    EXPECT_NEAR(operator_norm(A, 1e-10), expect, 1e-8 * expect);
  }
}

TEST(OperatorNorm, GraphDifferenceHessian) {
  // Top singular vector orthogonal to the all-ones direction.
  Eigen::MatrixXd H(2, 2);
  H << 1, -1, -1, 1;
  EXPECT_NEAR(operator_norm(H), 2.0, 1e-9);
}

TEST(OperatorNorm, ScalingHomogeneity) {
  Eigen::MatrixXd A = to::rand_mat(6, 4, 99);
  double base = operator_norm(A, 1e-10);
  EXPECT_NEAR(operator_norm((-2.5 * A).eval(), 1e-10), 2.5 * base,
              2e-9 * base);
}

TEST(OperatorNorm, DeterministicAcrossCalls) {
  Eigen::MatrixXd A = to::rand_mat(8, 8, 123);
  EXPECT_EQ(operator_norm(A), operator_norm(A));
}

TEST(MetricNorm, ActivationWeightedMetric) {
  // Pi^{-1} D weights: 1/(p_i gamma_i) primal, 1/(p_i sigma_i) dual.
  auto m = make_metric_Pi_inv_D({0.5, 0.25}, {1.0, 2.0}, {4.0, 1.0});
  BlockDims dims({1, 1}, {1, 1});
  PrimalDualPoint z = zeros_point(dims);
  z.x[0][0] = 1.0;
  z.x[1][0] = 1.0;
  z.u[0][0] = 1.0;
  z.u[1][0] = 1.0;
  EXPECT_DOUBLE_EQ(m.norm_sq(z), 2.0 + 2.0 + 0.5 + 4.0);
  EXPECT_THROW(make_metric_Pi_inv_D({0.0, 0.5}, {1.0, 1.0}, {1.0, 1.0}),
               ConfigError);
}

TEST(BlockVector, FlatRoundTrip) {
  std::vector<int> dims{2, 3, 1};
  BlockVector v = random_block_vector(dims, 55);
  BlockVector w = BlockVector::from_flat(v.flat(), dims);
  EXPECT_EQ((v - w).norm(), 0.0);
  EXPECT_THROW(BlockVector::from_flat(v.flat(), {2, 3}), StructuralError);
  EXPECT_TRUE(v.all_finite());
}
