#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "math.hpp"

namespace xs {

// Risk-tolerance controller configuration. All levels are probabilities in
// (0,1) and are tracked in z-space, z = Phi^{-1}(rho), clipped to [-8, 8].
struct ControllerConfig {
  double rho_safe = 0.99;
  double rho_risk = 0.01;
  double rho_0 = 0.1;
  double rho_b = 0.5;

  void validate() const {
    for (double r : {rho_safe, rho_risk, rho_0, rho_b})
      if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("controller: rho outside (0,1)");
    if (!(rho_risk < rho_b && rho_b < rho_safe))
      throw std::invalid_argument("controller: need rho_risk < rho_b < rho_safe");
  }

  double z_safe() const { return norm_quantile(rho_safe); }
  double z_risk() const { return norm_quantile(rho_risk); }
};

struct BudgetState {
  int remaining_failures = 0;  // failures still allowed
  int remaining_evals = 0;     // evaluations still to come, this one included
  double z = 0.0;
  double rho = 0.0;
  int t = 0;  // number of updates applied

  static BudgetState init(int budget, int total_evals, const ControllerConfig& cfg) {
    cfg.validate();
    if (budget < 0) throw std::invalid_argument("BudgetState: negative failure budget");
    if (total_evals < 1) throw std::invalid_argument("BudgetState: total_evals must be >= 1");
    if (budget > total_evals) throw std::invalid_argument("BudgetState: budget exceeds evaluations");
    BudgetState s;
    s.remaining_failures = budget;
    s.remaining_evals = total_evals;
    s.z = norm_quantile(cfg.rho_0);
    s.rho = cfg.rho_0;
    s.t = 0;
    return s;
  }
};

namespace detail {
inline double clip_z(double z) { return std::min(8.0, std::max(-8.0, z)); }
}

// One controller step. `failure` reports whether the previous evaluation
// violated a constraint (false on the first step). The control signal blends
// a push toward the safe level, active only on failures, with a drift toward
// the risky level paced by the budget-to-horizon ratio:
//   u = (z_safe - z) * Gamma / dB + (z_risk - z) * dB / (2 dT)
// using the pre-decrement budget dB and horizon dT. Exhausted budget turns
// the step into a deadbeat move to the safe level; a budget that exceeds the
// remaining horizon jumps straight to the risky level.
inline BudgetState update_rho(const BudgetState& s, const ControllerConfig& cfg, bool failure) {
  cfg.validate();
  if (s.remaining_evals <= 0) throw std::logic_error("update_rho: no evaluations remain");

  const double dB = static_cast<double>(s.remaining_failures);
  const double dT = static_cast<double>(s.remaining_evals);
  double u;
  if (s.remaining_failures == 0) {
    u = cfg.z_safe() - s.z;
  } else if (s.remaining_failures > s.remaining_evals) {
    u = cfg.z_risk() - s.z;
  } else {
    const double gamma = failure ? 1.0 : 0.0;
    u = (cfg.z_safe() - s.z) * gamma / dB + (cfg.z_risk() - s.z) * dB / (2.0 * dT);
  }

  BudgetState next = s;
  next.z = detail::clip_z(s.z + u);
  next.rho = norm_cdf(next.z);
  next.remaining_evals = s.remaining_evals - 1;
  // Failures past depletion are overruns; the budget never goes negative.
  next.remaining_failures = std::max(0, s.remaining_failures - (failure ? 1 : 0));
  next.t = s.t + 1;
  return next;
}

enum class Branch { safe, risky };

// The safe branch only makes sense above the decision boundary and once a
// safe region is known; the boundary itself is treated as risky.
inline Branch select_branch(const BudgetState& s, const ControllerConfig& cfg, bool safe_area_found) {
  cfg.validate();
  if (!safe_area_found) return Branch::risky;
  return s.rho <= cfg.rho_b ? Branch::risky : Branch::safe;
}

}  // namespace xs
