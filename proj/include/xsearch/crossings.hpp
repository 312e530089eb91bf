#pragma once

#include <cmath>
#include <stdexcept>

#include "gp.hpp"

namespace xs {

// Rice's formula for a stationary GP prior in one dimension: the expected
// number of up-crossings of level u per unit length,
//   E[N_u^+] = 1/(2 pi) sqrt(-k''(0)/k(0)) exp(-u^2 / (2 k(0))).
// For the squared-exponential kernel -k''(0)/k(0) = 1/l^2.
inline double rice_upcrossings(const KernelParams& p, double u) {
  p.validate();
  if (p.dim() != 1) throw std::invalid_argument("rice_upcrossings: one-dimensional kernels only");
  const double l = p.lengthscales[0];
  return std::exp(-u * u / (2.0 * p.signal_var)) / (2.0 * kPi * l);
}

// E|Z| for Z ~ N(m, v^2): 2 v phi(m/v) + m erf(m / (sqrt(2) v)).
inline double folded_normal_mean(double m, double v) {
  if (v < 0.0) throw std::invalid_argument("folded_normal_mean: negative scale");
  if (v == 0.0) return std::abs(m);
  const double g = m / v;
  return 2.0 * v * norm_pdf(g) + m * std::erf(g * 0.70710678118654752440);
}

struct CrossingQuery {
  const GpModel* model = nullptr;
  Vec x;
  double u = 0.0;
  DerivVariance mode = DerivVariance::extended;
};

// Expected number of crossings of level u at x, decomposed as the Gaussian
// density of f(x) at u times the mean total variation of the gradient under
// the virtual observation f(x) = u:
//   N(u; mu(x), s2(x)) * sum_j [2 nu_j phi(g_j) + mu_j erf(g_j/sqrt(2))],
// with g_j = mu_j(u)/nu_j. The factorization over u is cached so one
// bordered solve at x serves any number of thresholds.
class CrossingEvaluator {
 public:
  CrossingEvaluator(const GpModel& model, const Vec& x, DerivVariance mode = DerivVariance::extended)
      : sys_(model.virtual_system(x, mode)) {}

  double mean() const { return sys_.mean; }
  double var() const { return sys_.var; }

  // Mean L1 norm of the gradient given f(x) = u.
  double gradient_l1_mean(double u) const {
    double s = 0.0;
    for (int j = 0; j < sys_.nu.size(); ++j)
      s += folded_normal_mean(sys_.lin_const[j] + u * sys_.lin_u[j], sys_.nu[j]);
    return s;
  }

  double intensity(double u) const {
    const double dens = norm_density(u, sys_.mean, std::max(sys_.var, 1e-300));
    if (dens == 0.0) return 0.0;
    return dens * gradient_l1_mean(u);
  }

  const VirtualGradientSystem& system() const { return sys_; }

 private:
  VirtualGradientSystem sys_;
};

inline double crossing_intensity_nd(const CrossingQuery& q) {
  if (q.model == nullptr) throw std::invalid_argument("crossing_intensity_nd: null model");
  return CrossingEvaluator(*q.model, q.x, q.mode).intensity(q.u);
}

inline double crossing_intensity_1d(const CrossingQuery& q) {
  if (q.model == nullptr || q.model->params().dim() != 1)
    throw std::invalid_argument("crossing_intensity_1d: one-dimensional models only");
  return crossing_intensity_nd(q);
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

// Monte Carlo estimate of the mean gradient L1 norm under the virtual
// observation. The expectation splits over per-dimension marginals, so the
// dimensions are sampled independently.
inline McEstimate mc_crossing_oracle(const CrossingQuery& q, long n_samples, std::uint64_t seed) {
  if (q.model == nullptr) throw std::invalid_argument("mc_crossing_oracle: null model");
  if (n_samples < 2) throw std::invalid_argument("mc_crossing_oracle: need at least 2 samples");
  const auto sys = q.model->virtual_system(q.x, q.mode);
  const Vec mu = sys.grad_mean(q.u);
  Rng rng(seed);
  double s1 = 0.0, s2 = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    double t = 0.0;
    for (int j = 0; j < mu.size(); ++j) t += std::abs(mu[j] + sys.nu[j] * rng.normal());
    s1 += t;
    s2 += t * t;
  }
  McEstimate e;
  e.estimate = s1 / static_cast<double>(n_samples);
  const double var = std::max(0.0, s2 / static_cast<double>(n_samples) - e.estimate * e.estimate);
  e.stderr_ = std::sqrt(var / static_cast<double>(n_samples));
  return e;
}

}  // namespace xs
