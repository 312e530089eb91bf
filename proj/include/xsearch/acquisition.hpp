#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "crossings.hpp"
#include "extremes.hpp"

namespace xs {

// Shared evaluation context for one acquisition decision: model snapshots,
// sampled global-minimum thresholds, and the incumbent.
struct AcquisitionContext {
  const GpModel* objective = nullptr;
  std::vector<const GpModel*> constraints;
  const MinSampleSet* minima = nullptr;

  bool has_incumbent = false;
  double incumbent = 0.0;  // best (safe, when constrained) observed output

  double ucb_beta = 2.0;
  DerivVariance deriv_mode = DerivVariance::extended;

  void require_objective() const {
    if (objective == nullptr) throw std::invalid_argument("acquisition: null objective model");
  }
};

// Average expected number of crossings of the sampled minimum thresholds.
// One bordered solve at x covers all thresholds.
inline double alpha_x(const AcquisitionContext& ctx, const Vec& x) {
  ctx.require_objective();
  if (ctx.minima == nullptr || ctx.minima->samples.empty())
    throw std::invalid_argument("alpha_x: no sampled thresholds");
  CrossingEvaluator ev(*ctx.objective, x, ctx.deriv_mode);
  double s = 0.0;
  for (double u : ctx.minima->samples) s += ev.intensity(u);
  return s / static_cast<double>(ctx.minima->samples.size());
}

// Probability that every constraint is non-positive at x under independent
// GP posteriors: prod_j Phi(-mu_j(x)/sigma_j(x)). A deterministic posterior
// contributes a hard 0/1 factor.
inline double constraint_satisfaction_prob(const AcquisitionContext& ctx, const Vec& x) {
  double p = 1.0;
  for (const GpModel* g : ctx.constraints) {
    if (g == nullptr) throw std::invalid_argument("constraint_satisfaction_prob: null constraint model");
    const auto post = g->posterior(x);
    const double sd = std::sqrt(std::max(0.0, post.var));
    if (sd < 1e-12) {
      if (post.mean > 0.0) return 0.0;
      continue;
    }
    p *= norm_cdf(-post.mean / sd);
  }
  return p;
}

// Failure-aware exploration objective: crossings weighted by the joint
// probability of satisfying the constraints.
inline double risky_objective(const AcquisitionContext& ctx, const Vec& x) {
  const double a = alpha_x(ctx, x);
  if (a == 0.0) return 0.0;
  return a * constraint_satisfaction_prob(ctx, x);
}

// Expected improvement below the incumbent (minimization convention).
inline double ei(const AcquisitionContext& ctx, const Vec& x) {
  ctx.require_objective();
  if (!ctx.has_incumbent) throw std::invalid_argument("ei: incumbent required");
  const auto p = ctx.objective->posterior(x);
  const double sd = std::sqrt(std::max(0.0, p.var));
  const double imp = ctx.incumbent - p.mean;
  if (sd < 1e-12) return std::max(imp, 0.0);
  const double z = imp / sd;
  return imp * norm_cdf(z) + sd * norm_pdf(z);
}

// Probability of improvement below the incumbent.
inline double pi(const AcquisitionContext& ctx, const Vec& x) {
  ctx.require_objective();
  if (!ctx.has_incumbent) throw std::invalid_argument("pi: incumbent required");
  const auto p = ctx.objective->posterior(x);
  const double sd = std::sqrt(std::max(0.0, p.var));
  const double imp = ctx.incumbent - p.mean;
  if (sd < 1e-12) return imp > 0.0 ? 1.0 : (imp < 0.0 ? 0.0 : 0.5);
  return norm_cdf(imp / sd);
}

// Lower-confidence-bound score for minimization, returned as a value to
// maximize: -mu + beta*sigma.
inline double ucb(const AcquisitionContext& ctx, const Vec& x) {
  ctx.require_objective();
  const auto p = ctx.objective->posterior(x);
  return -p.mean + ctx.ucb_beta * std::sqrt(std::max(0.0, p.var));
}

// Constrained expected improvement: EI (incumbent over safe observations)
// times the satisfaction probability; with no safe incumbent the
// satisfaction probability alone drives the search.
inline double eic(const AcquisitionContext& ctx, const Vec& x) {
  if (!ctx.has_incumbent) return constraint_satisfaction_prob(ctx, x);
  return ei(ctx, x) * constraint_satisfaction_prob(ctx, x);
}

}  // namespace xs
