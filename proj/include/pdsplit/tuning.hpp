#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/problem.hpp"

namespace pdsplit {

enum class PlanProvenance {
  partial_bound,
  total_bound,
  random_bound,
  rate_deterministic,
  rate_randomized,
  manual,
};

enum class RateMetricTag { D, M };

struct StepsizePlan {
  std::vector<double> gamma;
  std::vector<double> sigma;
  PlanProvenance provenance = PlanProvenance::manual;
  double margin = 1.0;

  void validate_positive() const {
    if (gamma.empty() || gamma.size() != sigma.size())
      throw ConfigError("StepsizePlan: gamma/sigma sizes");
    for (double g : gamma)
      if (!(g > 0)) throw ConfigError("StepsizePlan: gamma must be positive");
    for (double s : sigma)
      if (!(s > 0)) throw ConfigError("StepsizePlan: sigma must be positive");
  }
};

inline StepsizePlan manual_plan(std::vector<double> gamma,
                                std::vector<double> sigma) {
  StepsizePlan p{std::move(gamma), std::move(sigma), PlanProvenance::manual,
                 1.0};
  p.validate_positive();
  return p;
}

// Per-iteration contraction certificate for the linear-rate theorems.
// The squared distance to z* in the tagged metric contracts by `factor`
// each iteration.
struct RateCertificate {
  double c = 0.0;
  double factor = 1.0;  // 1/(1+c) for the deterministic rate, 1-c randomized
  RateMetricTag metric = RateMetricTag::D;
  double c2 = 0.0;      // deterministic rate only
  double delta1 = 0.0;  // randomized rate only
  double delta2 = 0.0;
};

namespace detail {

inline void require_finite_Rs(const ProblemConstants& cst,
                              const std::string& rule) {
  if (std::isfinite(cst.R_s)) return;
  std::string agents;
  for (int i : cst.nonsmooth_h_agents())
    agents += (agents.empty() ? "" : ", ") + std::to_string(i);
  throw InapplicabilityError(
      rule + ": h_i not smooth for agent(s) {" + agents +
      "}; this rule requires mu_h^i > 0 (continuously differentiable h_i "
      "with Lipschitz gradient)");
}

}  // namespace detail

// Default free dual stepsizes for the partial-coupling rule: balance
// the sigma_i |L_ii|^2 term against |L_ii|.
inline std::vector<double> default_dual_stepsizes(const ProblemConstants& cst) {
  std::vector<double> sigma(cst.norm_L_diag.size());
  for (std::size_t i = 0; i < sigma.size(); ++i)
    sigma[i] = cst.norm_L_diag[i] > 0 ? 1.0 / cst.norm_L_diag[i] : 1.0;
  return sigma;
}

// gamma_i < 1 / (sigma_i |L_ii|^2 + beta + (B^2/2) |beta_bar|^2_{Mg^-1}),
// realized at a multiplicative margin. The dual stepsizes are free
// parameters here.
inline StepsizePlan stepsizes_partial(const ProblemConstants& cst,
                                      const std::vector<double>& sigma, int B,
                                      double margin = 0.99) {
  if (B < 0) throw ConfigError("stepsizes_partial: B must be >= 0");
  if (!(margin > 0) || margin >= 1.0 + 1e-15)
    throw ConfigError("stepsizes_partial: margin must lie in (0, 1]");
  if (sigma.size() != cst.norm_L_diag.size())
    throw ConfigError("stepsizes_partial: sigma size mismatch");
  StepsizePlan plan;
  plan.sigma = sigma;
  plan.gamma.resize(sigma.size());
  const double delay_term =
      0.5 * static_cast<double>(B) * B * cst.beta_bar_weighted;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] > 0))
      throw ConfigError("stepsizes_partial: sigma must be positive");
    double den = sigma[i] * cst.norm_L_diag[i] * cst.norm_L_diag[i] +
                 cst.beta + delay_term;
    if (!(den > 0))
      throw ConfigError(
          "stepsizes_partial: unbounded stepsize for agent " +
          std::to_string(i) + " (zero denominator); supply a manual gamma");
    plan.gamma[i] = margin / den;
  }
  plan.provenance = PlanProvenance::partial_bound;
  plan.margin = margin;
  plan.validate_positive();
  return plan;
}

// sigma_i < 1 / (C_s (B+1)^2),
// gamma_i < 1 / (beta + R_s (B+1)^2 / 2 + B^2 |beta_bar|^2_{Mg^-1}).
inline StepsizePlan stepsizes_total(const ProblemConstants& cst, int B,
                                    double margin = 0.99) {
  if (B < 0) throw ConfigError("stepsizes_total: B must be >= 0");
  if (!(margin > 0) || margin >= 1.0 + 1e-15)
    throw ConfigError("stepsizes_total: margin must lie in (0, 1]");
  detail::require_finite_Rs(cst, "stepsizes_total");
  const double Bp1_sq = static_cast<double>(B + 1) * (B + 1);
  const double sig_den = cst.C_s * Bp1_sq;
  const double gam_den = cst.beta + 0.5 * cst.R_s * Bp1_sq +
                         static_cast<double>(B) * B * cst.beta_bar_weighted;
  if (!(sig_den > 0) || !(gam_den > 0))
    throw ConfigError(
        "stepsizes_total: unbounded stepsize (zero denominator); supply a "
        "manual plan");
  StepsizePlan plan;
  plan.gamma.assign(cst.mu_g.size(), margin / gam_den);
  plan.sigma.assign(cst.mu_g.size(), margin / sig_den);
  plan.provenance = PlanProvenance::total_bound;
  plan.margin = margin;
  plan.validate_positive();
  return plan;
}

// sigma_i < 1 / (2 C_s (B^2 p_i + 1)),
// gamma_i < 1 / (beta + R_s (B^2 p_i + 1) + |beta_bar|^2_{Mg^-1} B^2 p_i).
// An agent with a smaller activation probability gets larger bounds.
inline StepsizePlan stepsizes_random(const ProblemConstants& cst, int B,
                                     const std::vector<double>& p,
                                     double margin = 0.99) {
  if (B < 0) throw ConfigError("stepsizes_random: B must be >= 0");
  if (!(margin > 0) || margin >= 1.0 + 1e-15)
    throw ConfigError("stepsizes_random: margin must lie in (0, 1]");
  if (p.size() != cst.mu_g.size())
    throw ConfigError("stepsizes_random: probability count mismatch");
  detail::require_finite_Rs(cst, "stepsizes_random");
  StepsizePlan plan;
  plan.gamma.resize(p.size());
  plan.sigma.resize(p.size());
  const double B_sq = static_cast<double>(B) * B;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0) || p[i] > 1.0)
      throw ConfigError("stepsizes_random: p_i must lie in (0, 1]");
    double sig_den = 2.0 * cst.C_s * (B_sq * p[i] + 1.0);
    double gam_den = cst.beta + cst.R_s * (B_sq * p[i] + 1.0) +
                     cst.beta_bar_weighted * B_sq * p[i];
    if (!(sig_den > 0) || !(gam_den > 0))
      throw ConfigError(
          "stepsizes_random: unbounded stepsize (zero denominator); supply a "
          "manual plan");
    plan.sigma[i] = margin / sig_den;
    plan.gamma[i] = margin / gam_den;
  }
  plan.provenance = PlanProvenance::random_bound;
  plan.margin = margin;
  plan.validate_positive();
  return plan;
}

struct RatePlan {
  StepsizePlan plan;
  RateCertificate certificate;
};

// c2 = min{ mu_g^min / (2B |beta_bar|^2 + R_s (B+1) + beta),
//           mu_h^min / (2 C_s (B+1)) },
// c  = margin * ((1 + c2)^{1/(B+1)} - 1),
// gamma_i = c / mu_g^i, sigma_i = c / mu_h^i, contraction 1/(1+c) in D.
inline RatePlan rate_constants_deterministic(const ProblemConstants& cst, int B,
                                             double margin = 0.99) {
  if (B < 0) throw ConfigError("rate_constants_deterministic: B must be >= 0");
  if (!(margin > 0) || margin > 1.0)
    throw ConfigError("rate_constants_deterministic: margin in (0, 1]");
  detail::require_finite_Rs(cst, "rate_constants_deterministic");
  if (!(cst.mu_h_min() > 0))
    throw InapplicabilityError(
        "rate_constants_deterministic: mu_h^min must be positive");
  const double den_g = 2.0 * static_cast<double>(B) * cst.beta_bar_weighted +
                       cst.R_s * (B + 1) + cst.beta;
  const double den_h = 2.0 * cst.C_s * (B + 1);
  if (!(den_g > 0) || !(den_h > 0))
    throw ConfigError(
        "rate_constants_deterministic: degenerate problem (zero denominator)");
  const double c2 = std::min(cst.mu_g_min() / den_g, cst.mu_h_min() / den_h);
  const double c_max = std::pow(1.0 + c2, 1.0 / (B + 1)) - 1.0;
  const double c = margin * c_max;
  RatePlan out;
  out.certificate.c = c;
  out.certificate.c2 = c2;
  out.certificate.factor = 1.0 / (1.0 + c);
  out.certificate.metric = RateMetricTag::D;
  out.plan.gamma.resize(cst.mu_g.size());
  out.plan.sigma.resize(cst.mu_h.size());
  for (std::size_t i = 0; i < cst.mu_g.size(); ++i) {
    out.plan.gamma[i] = c / cst.mu_g[i];
    out.plan.sigma[i] = c / cst.mu_h[i];
  }
  out.plan.provenance = PlanProvenance::rate_deterministic;
  out.plan.margin = margin;
  out.plan.validate_positive();
  return out;
}

namespace detail {

struct RandomRateDeltas {
  double delta1;
  double delta2;
};

inline RandomRateDeltas random_rate_deltas(const ProblemConstants& cst, int B,
                                           const std::vector<double>& p,
                                           double c) {
  double min_g = std::numeric_limits<double>::infinity();
  double min_h = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    min_g = std::min(min_g, (p[i] - c) * cst.mu_g[i]);
    min_h = std::min(min_h, (p[i] - c) * cst.mu_h[i]);
  }
  const double den1 = 2.0 * B * cst.beta_bar_weighted + 2.0 * B * cst.R_s +
                      2.0 * cst.R_s + cst.beta;
  const double den2 = 4.0 * cst.C_s * (1.0 + B);
  RandomRateDeltas d;
  d.delta1 = den1 > 0 ? min_g / den1 : std::numeric_limits<double>::infinity();
  d.delta2 = den2 > 0 ? min_h / den2 : std::numeric_limits<double>::infinity();
  return d;
}

inline bool random_rate_feasible(const ProblemConstants& cst, int B,
                                 const std::vector<double>& p, double c) {
  if (!(c > 0) || c >= 1.0) return false;
  for (double pi : p)
    if (c >= pi) return false;
  auto d = random_rate_deltas(cst, B, p, c);
  const double lhs = 1.0 / std::pow(1.0 - c, B) + c;
  return lhs <= 1.0 + std::min(d.delta1, d.delta2);
}

}  // namespace detail

// Largest c with
//   1/(1-c)^B + c <= 1 + min{delta1(c), delta2(c)},  c < min_i p_i,
// found by bisection on the feasibility boundary; then
// gamma_i = 1/((p_i/c - 1) mu_g^i), sigma_i = 1/((p_i/c - 1) mu_h^i),
// contraction 1-c in the M metric, in expectation.
inline RatePlan rate_constants_random(const ProblemConstants& cst, int B,
                                      const std::vector<double>& p,
                                      double rel_tol = 1e-10) {
  if (B < 0) throw ConfigError("rate_constants_random: B must be >= 0");
  if (p.size() != cst.mu_g.size())
    throw ConfigError("rate_constants_random: probability count mismatch");
  for (double pi : p)
    if (!(pi > 0) || pi > 1.0)
      throw ConfigError("rate_constants_random: p_i must lie in (0, 1]");
  detail::require_finite_Rs(cst, "rate_constants_random");
  if (!(cst.mu_h_min() > 0))
    throw InapplicabilityError("rate_constants_random: mu_h^min must be positive");

  const double p_min = *std::min_element(p.begin(), p.end());
  double hi = std::min(p_min, 1.0) * (1.0 - 1e-12);
  double lo = 1e-14;
  if (!detail::random_rate_feasible(cst, B, p, lo))
    throw NumericalError(
        "rate_constants_random: no feasible c above 1e-14; problem constants "
        "are numerically degenerate");
  if (detail::random_rate_feasible(cst, B, p, hi)) {
    // Entire range feasible; the cap below p_min is the binding constraint.
  } else {
    while ((hi - lo) > rel_tol * lo) {
      double mid = 0.5 * (lo + hi);
      if (detail::random_rate_feasible(cst, B, p, mid))
        lo = mid;
      else
        hi = mid;
    }
    hi = lo;
  }
  const double c = hi;

  RatePlan out;
  auto d = detail::random_rate_deltas(cst, B, p, c);
  out.certificate.c = c;
  out.certificate.factor = 1.0 - c;
  out.certificate.metric = RateMetricTag::M;
  out.certificate.delta1 = d.delta1;
  out.certificate.delta2 = d.delta2;
  out.plan.gamma.resize(p.size());
  out.plan.sigma.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.plan.gamma[i] = 1.0 / ((p[i] / c - 1.0) * cst.mu_g[i]);
    out.plan.sigma[i] = 1.0 / ((p[i] / c - 1.0) * cst.mu_h[i]);
  }
  out.plan.provenance = PlanProvenance::rate_randomized;
  out.plan.margin = 1.0;
  out.plan.validate_positive();
  return out;
}

// Plugs a plan back into the inequality of its provenance; true when the
// bound holds strictly.
inline bool recheck_plan(const StepsizePlan& plan, const ProblemConstants& cst,
                         int B, const std::vector<double>& p = {}) {
  switch (plan.provenance) {
    case PlanProvenance::partial_bound: {
      const double delay = 0.5 * static_cast<double>(B) * B * cst.beta_bar_weighted;
      for (std::size_t i = 0; i < plan.gamma.size(); ++i) {
        double den = plan.sigma[i] * cst.norm_L_diag[i] * cst.norm_L_diag[i] +
                     cst.beta + delay;
        if (!(plan.gamma[i] * den < 1.0)) return false;
      }
      return true;
    }
    case PlanProvenance::total_bound: {
      const double Bp1_sq = static_cast<double>(B + 1) * (B + 1);
      for (std::size_t i = 0; i < plan.gamma.size(); ++i) {
        if (!(plan.sigma[i] * cst.C_s * Bp1_sq < 1.0)) return false;
        double den = cst.beta + 0.5 * cst.R_s * Bp1_sq +
                     static_cast<double>(B) * B * cst.beta_bar_weighted;
        if (!(plan.gamma[i] * den < 1.0)) return false;
      }
      return true;
    }
    case PlanProvenance::random_bound: {
      const double B_sq = static_cast<double>(B) * B;
      for (std::size_t i = 0; i < plan.gamma.size(); ++i) {
        if (!(plan.sigma[i] * 2.0 * cst.C_s * (B_sq * p[i] + 1.0) < 1.0))
          return false;
        double den = cst.beta + cst.R_s * (B_sq * p[i] + 1.0) +
                     cst.beta_bar_weighted * B_sq * p[i];
        if (!(plan.gamma[i] * den < 1.0)) return false;
      }
      return true;
    }
    case PlanProvenance::rate_deterministic:
    case PlanProvenance::rate_randomized:
    case PlanProvenance::manual:
      return true;  // carry their own conditions or none
  }
  return true;
}

}  // namespace pdsplit
