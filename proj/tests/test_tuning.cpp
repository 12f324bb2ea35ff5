#include <gtest/gtest.h>

#include <cmath>

#include "pdsplit/builders.hpp"
#include "pdsplit/tuning.hpp"
#include "support/oracles.hpp"

using namespace pdsplit;

namespace {

ProblemConstants constants(double beta, std::vector<double> beta_bar,
                           std::vector<double> mu_g, std::vector<double> mu_h,
                           std::vector<double> nL_diag,
                           std::vector<double> nL_row,
                           std::vector<double> nL_col) {
  ProblemConstants c;
  c.beta = beta;
  c.beta_bar = std::move(beta_bar);
  c.mu_g = std::move(mu_g);
  c.mu_h = std::move(mu_h);
  c.norm_L_diag = std::move(nL_diag);
  c.norm_L_row = std::move(nL_row);
  c.norm_L_col = std::move(nL_col);
  c.R_s = 0.0;
  c.C_s = 0.0;
  c.beta_bar_weighted = 0.0;
  for (std::size_t i = 0; i < c.mu_g.size(); ++i) {
    if (c.mu_h[i] > 0)
      c.R_s += c.norm_L_row[i] * c.norm_L_row[i] / c.mu_h[i];
    else
      c.R_s = std::numeric_limits<double>::infinity();
    c.C_s += c.norm_L_col[i] * c.norm_L_col[i] / c.mu_g[i];
    c.beta_bar_weighted += c.beta_bar[i] * c.beta_bar[i] / c.mu_g[i];
  }
  return c;
}

ProblemConstants direct(double beta, double bbw, double Rs, double Cs,
                        double mug, double muh, int m = 2) {
  ProblemConstants c;
  c.beta = beta;
  c.beta_bar.assign(m, 0.0);
  c.mu_g.assign(m, mug);
  c.mu_h.assign(m, muh);
  c.norm_L_diag.assign(m, 1.0);
  c.norm_L_row.assign(m, 1.0);
  c.norm_L_col.assign(m, 1.0);
  c.R_s = Rs;
  c.C_s = Cs;
  c.beta_bar_weighted = bbw;
  return c;
}

}  // namespace

TEST(PartialBound, PlugInArithmetic) {
  // |L_ii| = 1, sigma = 1, beta = 1, B = 0, beta_bar = 0 -> bound 1/2.
  ProblemConstants c = direct(1.0, 0.0, 2.0, 2.0, 1.0, 1.0);
  StepsizePlan p = stepsizes_partial(c, {1.0, 1.0}, 0, 1.0);
  EXPECT_NEAR(p.gamma[0], 0.5, 1e-12);
  // B = 2, |beta_bar|^2 = 1, beta = 1, sigma |L|^2 = 1 -> 1/(1+1+2) = 1/4.
  ProblemConstants c2 = direct(1.0, 1.0, 2.0, 2.0, 1.0, 1.0);
  StepsizePlan p2 = stepsizes_partial(c2, {1.0, 1.0}, 2, 1.0);
  EXPECT_NEAR(p2.gamma[0], 0.25, 1e-12);
}

TEST(PartialBound, SeparableSmoothIndependentOfDelay) {
  ProblemConstants c = direct(0.7, 0.0, 1.0, 1.0, 1.0, 1.0);
  StepsizePlan p0 = stepsizes_partial(c, {1.0, 1.0}, 0);
  StepsizePlan p9 = stepsizes_partial(c, {1.0, 1.0}, 9);
  EXPECT_EQ(p0.gamma, p9.gamma);
}

TEST(PartialBound, RecheckHoldsStrictly) {
  ProblemConstants c = direct(1.0, 0.5, 2.0, 2.0, 1.0, 1.0);
  for (int B : {0, 1, 3, 7}) {
    StepsizePlan p = stepsizes_partial(c, {0.5, 2.0}, B);
    EXPECT_TRUE(recheck_plan(p, c, B));
  }
}

TEST(PartialBound, ZeroDenominatorRejected) {
  ProblemConstants c = direct(0.0, 0.0, 0.0, 0.0, 1.0, 1.0);
  c.norm_L_diag = {0.0, 0.0};
  EXPECT_THROW(stepsizes_partial(c, {1.0, 1.0}, 0), ConfigError);
}

TEST(TotalBound, PlugInArithmetic) {
  // B = 0, C_s = 2, R_s = 2, beta = 0, beta_bar = 0: sigma = 1/2, gamma = 1.
  ProblemConstants c = direct(0.0, 0.0, 2.0, 2.0, 1.0, 1.0);
  StepsizePlan p = stepsizes_total(c, 0, 1.0);
  EXPECT_NEAR(p.sigma[0], 0.5, 1e-12);
  EXPECT_NEAR(p.gamma[0], 1.0, 1e-12);
}

TEST(TotalBound, QuadraticDelayDependence) {
  ProblemConstants c = direct(0.0, 0.0, 2.0, 2.0, 1.0, 1.0);
  StepsizePlan p1 = stepsizes_total(c, 1);
  StepsizePlan p3 = stepsizes_total(c, 3);  // B+1 doubles
  EXPECT_NEAR(p1.sigma[0] / p3.sigma[0], 4.0, 1e-12);
}

TEST(TotalBound, IndicatorHInapplicable) {
  FormationConfig cfg;
  cfg.m = 2;
  auto prob = build_formation(cfg);
  ProblemConstants cst = compute_constants(prob.spec);
  try {
    stepsizes_total(cst, 1);
    FAIL() << "expected InapplicabilityError";
  } catch (const InapplicabilityError& e) {
    EXPECT_NE(std::string(e.what()).find("mu_h"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
}

TEST(RandomBound, PlugInArithmetic) {
  // p = 1, B = 0: sigma = margin / (2 C_s).
  ProblemConstants c = direct(0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
  StepsizePlan p = stepsizes_random(c, 0, {1.0, 1.0}, 1.0);
  EXPECT_NEAR(p.sigma[0], 1.0 / (2.0 * c.C_s), 1e-12);
  // B = 2, p = 0.5, C_s = 1 -> sigma = 1/(2 (4 * 0.5 + 1)) = 1/6.
  ProblemConstants c2 = direct(0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
  c2.C_s = 1.0;
  StepsizePlan p2 = stepsizes_random(c2, 2, {0.5, 0.5}, 1.0);
  EXPECT_NEAR(p2.sigma[0], 1.0 / 6.0, 1e-12);
}

TEST(RandomBound, LargerStepsForLazierAgents) {
  ProblemConstants c = direct(0.3, 0.2, 1.5, 2.5, 1.0, 1.0);
  StepsizePlan p = stepsizes_random(c, 3, {0.2, 0.9});
  EXPECT_GT(p.sigma[0], p.sigma[1]);
  EXPECT_GT(p.gamma[0], p.gamma[1]);
  EXPECT_TRUE(recheck_plan(p, c, 3, {0.2, 0.9}));
}

TEST(DeterministicRate, PlugInArithmetic) {
  // B=0, mu_g = mu_h = 1, R_s = C_s = 1, beta = beta_bar = 0:
  // c2 = min{1/1, 1/2} = 1/2, c_max = 1/2.
  ProblemConstants c = direct(0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
  RatePlan rp = rate_constants_deterministic(c, 0, 1.0);
  EXPECT_NEAR(rp.certificate.c2, 0.5, 1e-12);
  EXPECT_NEAR(rp.certificate.c, 0.5, 1e-12);
  EXPECT_NEAR(rp.certificate.factor, 1.0 / 1.5, 1e-12);
  EXPECT_NEAR(rp.plan.gamma[0], 0.5, 1e-12);
  EXPECT_NEAR(rp.plan.sigma[0], 0.5, 1e-12);
}

TEST(DeterministicRate, ScalingShrinksC2) {
  ProblemConstants c = direct(0.5, 0.0, 1.0, 1.0, 1.0, 1.0);
  double base = rate_constants_deterministic(c, 1).certificate.c2;
  ProblemConstants scaled = c;
  scaled.R_s *= 3.0;
  scaled.C_s *= 3.0;
  scaled.beta *= 3.0;
  EXPECT_LT(rate_constants_deterministic(scaled, 1).certificate.c2, base);
}

TEST(DeterministicRate, DelayShrinksC) {
  ProblemConstants c = direct(0.5, 0.3, 2.0, 2.0, 1.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int B : {0, 1, 2, 4, 8}) {
    double cc = rate_constants_deterministic(c, B).certificate.c;
    EXPECT_LT(cc, prev);
    prev = cc;
  }
}

TEST(RandomRate, BoundaryBracketing) {
  // Feasible at the returned c, infeasible just above it.
  ProblemConstants c = direct(0.4, 0.1, 3.0, 2.0, 1.0, 1.5);
  for (int B : {0, 2, 5}) {
    std::vector<double> p{0.3, 0.7};
    RatePlan rp = rate_constants_random(c, B, p);
    double cc = rp.certificate.c;
    EXPECT_LT(cc, 0.3);
    EXPECT_TRUE(pdsplit::detail::random_rate_feasible(c, B, p, cc));
    EXPECT_FALSE(
        pdsplit::detail::random_rate_feasible(c, B, p, cc * (1 + 1e-6)));
  }
}

TEST(RandomRate, BZeroReducesToDeltaCap) {
  // With B = 0 the condition is c <= min{delta1, delta2}.
  ProblemConstants c = direct(0.2, 0.0, 1.0, 1.0, 1.0, 1.0);
  std::vector<double> p{0.9, 0.9};
  RatePlan rp = rate_constants_random(c, 0, p);
  auto d = pdsplit::detail::random_rate_deltas(c, 0, p, rp.certificate.c);
  EXPECT_LE(rp.certificate.c, std::min(d.delta1, d.delta2) * (1 + 1e-8));
  EXPECT_NEAR(rp.certificate.c, std::min(d.delta1, d.delta2),
              1e-6 * rp.certificate.c);
}

TEST(RandomRate, DegenerateConstantsReportedAsNumericalFailure) {
  // Enormous R_s with tiny strong convexity pushes the largest feasible
  // c below the 1e-14 floor.
  ProblemConstants c = direct(0.0, 0.0, 1e20, 1.0, 1e-6, 1e-6);
  c.mu_g = {1e-6, 1e-6};
  c.mu_h = {1e-6, 1e-6};
  EXPECT_THROW(rate_constants_random(c, 1, {0.5, 0.5}), NumericalError);
}

TEST(RandomRate, StepsizesMatchFormula) {
  ProblemConstants c = direct(0.0, 0.0, 2.0, 4.0, 1.0, 1.0);
  std::vector<double> p{0.5, 0.8};
  RatePlan rp = rate_constants_random(c, 1, p);
  double cc = rp.certificate.c;
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(rp.plan.gamma[i], 1.0 / ((p[i] / cc - 1.0) * c.mu_g[i]), 1e-12);
    EXPECT_NEAR(rp.plan.sigma[i], 1.0 / ((p[i] / cc - 1.0) * c.mu_h[i]), 1e-12);
  }
  EXPECT_EQ(rp.certificate.metric, RateMetricTag::M);
}

TEST(Monotonicity, BoundsNonincreasingInBAndConstants) {
  // Randomized sweep over (B, beta, bbw, p): each bound is nonincreasing
  // in B, beta and |beta_bar|^2, and sigma bounds nonincreasing in p_i.
  for (int t = 0; t < 50; ++t) {
    double beta = 2.0 * uniform_draw(1, t);
    double bbw = 2.0 * uniform_draw(2, t);
    double Rs = 0.5 + 3.0 * uniform_draw(3, t);
    double Cs = 0.5 + 3.0 * uniform_draw(4, t);
    ProblemConstants c = direct(beta, bbw, Rs, Cs, 1.0, 1.0);
    int B = 1 + static_cast<int>(4 * uniform_draw(5, t));
    double pr = 0.1 + 0.8 * uniform_draw(6, t);

    auto gp = [&](const ProblemConstants& cc, int BB) {
      return stepsizes_partial(cc, {1.0, 1.0}, BB).gamma[0];
    };
    auto gt = [&](const ProblemConstants& cc, int BB) {
      return stepsizes_total(cc, BB).gamma[0];
    };
    auto gr = [&](const ProblemConstants& cc, int BB, double prob) {
      return stepsizes_random(cc, BB, {prob, prob}).gamma[0];
    };
    auto sr = [&](const ProblemConstants& cc, int BB, double prob) {
      return stepsizes_random(cc, BB, {prob, prob}).sigma[0];
    };

    ProblemConstants c_beta = c;
    c_beta.beta += 0.5;
    ProblemConstants c_bbw = c;
    c_bbw.beta_bar_weighted += 0.5;

    EXPECT_LE(gp(c, B + 1), gp(c, B) * (1 + 1e-12));
    EXPECT_LE(gp(c_beta, B), gp(c, B));
    EXPECT_LE(gp(c_bbw, B + 1), gp(c, B + 1));

    EXPECT_LE(gt(c, B + 1), gt(c, B));
    EXPECT_LE(gt(c_beta, B), gt(c, B));
    EXPECT_LE(gt(c_bbw, B + 1), gt(c, B + 1));

    EXPECT_LE(gr(c, B + 1, pr), gr(c, B, pr));
    EXPECT_LE(gr(c_beta, B, pr), gr(c, B, pr));
    EXPECT_LE(sr(c, B, std::min(1.0, pr + 0.1)), sr(c, B, pr));
  }
}

TEST(Plans, ProvenanceRecheckAfterScaling) {
  ProblemConstants c = direct(0.3, 0.1, 2.0, 3.0, 1.0, 1.0);
  StepsizePlan p = stepsizes_total(c, 2);
  EXPECT_TRUE(recheck_plan(p, c, 2));
  StepsizePlan inflated = p;
  for (auto& g : inflated.gamma) g *= 1.3;
  for (auto& s : inflated.sigma) s *= 1.3;
  EXPECT_FALSE(recheck_plan(inflated, c, 2));
}

TEST(Plans, DefaultDualStepsizes) {
  ProblemConstants c = constants(0, {0, 0}, {1, 1}, {1, 1}, {2.0, 0.0},
                                 {2.0, 0.0}, {2.0, 0.0});
  std::vector<double> s = default_dual_stepsizes(c);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 1.0);
}
