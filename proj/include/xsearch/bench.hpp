#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "loop.hpp"

namespace xs {

// Four-term Hartmann function on [0,1]^6, global minimum near -3.32237.
inline double hartmann6(const Vec& x) {
  if (x.size() != 6) throw std::invalid_argument("hartmann6: needs 6 coordinates");
  static const std::array<double, 4> alpha = {1.0, 1.2, 3.0, 3.2};
  static const std::array<std::array<double, 6>, 4> A = {{{10.0, 3.0, 17.0, 3.5, 1.7, 8.0},
                                                          {0.05, 10.0, 17.0, 0.1, 8.0, 14.0},
                                                          {3.0, 3.5, 1.7, 10.0, 17.0, 8.0},
                                                          {17.0, 8.0, 0.05, 10.0, 0.1, 14.0}}};
  static const std::array<std::array<double, 6>, 4> P = {
      {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
       {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
       {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
       {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}}};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    double e = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double d = x[j] - P[i][j];
      e += A[i][j] * d * d;
    }
    s += alpha[i] * std::exp(-e);
  }
  return -s;
}

// Michalewicz function mapped to the unit cube (z = pi x), steepness m.
inline double michalewicz(const Vec& x, int m = 10) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double z = kPi * x[i];
    const double t = std::sin(static_cast<double>(i + 1) * z * z / kPi);
    s += std::sin(z) * std::pow(t * t, m);
  }
  return -s;
}

// Smooth multi-component constraint on the unit cube: unsafe where the
// product of sines rises above 2^-D. In one dimension the unsafe set is the
// interval (1/12, 5/12).
inline double sinprod_constraint(const Vec& x) {
  double p = 1.0;
  for (int j = 0; j < x.size(); ++j) p *= std::sin(2.0 * kPi * x[j]);
  return p - std::pow(2.0, -static_cast<double>(x.size()));
}

// Classic one-dimensional test curve with a single global minimum.
inline double forrester(const Vec& x) {
  if (x.size() != 1) throw std::invalid_argument("forrester: one-dimensional");
  const double a = 6.0 * x[0] - 2.0;
  return a * a * std::sin(12.0 * x[0] - 4.0);
}

struct Normalization {
  double mean = 0.0;
  double sd = 1.0;
};

// Monte Carlo output statistics over the unit cube, used to rescale
// benchmarks to roughly zero mean and unit variance.
inline Normalization normalize_benchmark(const std::function<double(const Vec&)>& f, int dim,
                                         long n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("normalize_benchmark: need at least 2 samples");
  Rng rng(seed);
  double s1 = 0.0, s2 = 0.0;
  Vec x(dim);
  for (long i = 0; i < n_samples; ++i) {
    for (int j = 0; j < dim; ++j) x[j] = rng.uniform01();
    const double v = f(x);
    s1 += v;
    s2 += v * v;
  }
  Normalization n;
  n.mean = s1 / static_cast<double>(n_samples);
  const double var = s2 / static_cast<double>(n_samples) - n.mean * n.mean;
  if (!(var > 1e-24))
    throw std::runtime_error("normalize_benchmark: output variance is degenerate");
  n.sd = std::sqrt(var);
  return n;
}

// Smooth synthetic objective: the posterior mean of a GP conditioned on a
// prior sample drawn over an irregular grid. The callable owns its
// conditioning data, so evaluations cost O(grid) each.
inline std::function<double(const Vec&)> gp_sample_problem(int dim, std::uint64_t seed,
                                                           int grid_size, double ell = 0.1,
                                                           double sf2 = 1.0,
                                                           double cond_noise = 1e-4) {
  if (dim < 1 || grid_size < 2) throw std::invalid_argument("gp_sample_problem: bad shape");
  const KernelParams params = KernelParams::isotropic(dim, ell, sf2, cond_noise);

  auto X = std::make_shared<Mat>(grid_size, dim);
  {
    Rng rng(derive_seed(seed, "gp-grid"));
    for (int i = 0; i < grid_size; ++i)
      for (int j = 0; j < dim; ++j) (*X)(i, j) = rng.uniform01();
  }
  std::vector<Vec> pts(grid_size);
  for (int i = 0; i < grid_size; ++i) pts[i] = X->row(i).transpose();
  const Vec values = sample_prior_on_grid(params, pts, derive_seed(seed, "gp-values"));

  // alpha = (K + noise I)^{-1} values, factored in place to keep peak memory down.
  auto alpha = std::make_shared<Vec>();
  {
    Mat K = gram(params, *X);
    K.diagonal().array() += cond_noise;
    Eigen::LLT<Eigen::Ref<Mat>> llt(K);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("gp_sample_problem: conditioning matrix not positive definite");
    *alpha = llt.solve(values);
  }

  return [params, X, alpha, dim](const Vec& q) {
    if (q.size() != dim) throw std::invalid_argument("gp_sample_problem: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < X->rows(); ++i) {
      double d2 = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double d = (q[j] - (*X)(i, j)) / params.lengthscales[j];
        d2 += d * d;
      }
      s += params.signal_var * std::exp(-0.5 * d2) * (*alpha)[i];
    }
    return s;
  };
}

namespace detail {

// Golden-section refinement of a one-dimensional minimum inside [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-14; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return f(0.5 * (a + b));
}

}  // namespace detail

// Global minimum of the Michalewicz function by exploiting separability:
// each coordinate's term is minimized on its own with a dense scan plus
// golden-section polish, and the contributions add up.
inline double michalewicz_min_oracle(int dim, int m = 10) {
  double total = 0.0;
  for (int i = 1; i <= dim; ++i) {
    auto term = [&](double u) {  // u in [0,1], z = pi u
      const double z = kPi * u;
      const double t = std::sin(static_cast<double>(i) * z * z / kPi);
      return -std::sin(z) * std::pow(t * t, m);
    };
    const int n = 200000;
    double best = term(0.0);
    int best_k = 0;
    for (int k = 1; k <= n; ++k) {
      const double v = term(static_cast<double>(k) / n);
      if (v < best) {
        best = v;
        best_k = k;
      }
    }
    const double lo = std::max(0.0, (best_k - 2.0) / n);
    const double hi = std::min(1.0, (best_k + 2.0) / n);
    total += detail::golden_min(term, lo, hi);
  }
  return total;
}

// Local refinement of the Hartmann minimum from its well-known basin.
inline double hartmann6_min_oracle() {
  Vec x0(6);
  x0 << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
  ObjectiveFn neg = [](const Vec& q) { return -hartmann6(q); };
  detail::LbfgsBox solver{neg, nullptr, Vec::Zero(6), Vec::Ones(6), 4000, 1e-7};
  return -solver.run(x0).value;
}

inline double forrester_min_oracle() {
  auto f = [](double u) {
    Vec x(1);
    x[0] = u;
    return forrester(x);
  };
  const int n = 200000;
  double best = f(0.0);
  int best_k = 0;
  for (int k = 1; k <= n; ++k) {
    const double v = f(static_cast<double>(k) / n);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  return detail::golden_min(f, std::max(0.0, (best_k - 2.0) / n),
                            std::min(1.0, (best_k + 2.0) / n));
}

// Builds the callable problem described by the spec and fills in the derived
// fields (dimension, normalization statistics, known minimum) so a stored
// record carries everything needed to rebuild it exactly.
inline Problem make_problem(ProblemSpec spec) {
  Problem prob;
  std::function<double(const Vec&)> raw;
  std::optional<double> raw_min;

  if (spec.name == "hartmann6") {
    spec.dim = 6;
    raw = hartmann6;
    raw_min = hartmann6_min_oracle();
  } else if (spec.name == "michalewicz2") {
    spec.dim = 2;
    raw = [](const Vec& x) { return michalewicz(x); };
    raw_min = michalewicz_min_oracle(2);
  } else if (spec.name == "michalewicz10") {
    spec.dim = 10;
    raw = [](const Vec& x) { return michalewicz(x); };
    raw_min = michalewicz_min_oracle(10);
  } else if (spec.name == "forrester") {
    spec.dim = 1;
    raw = forrester;
    raw_min = forrester_min_oracle();
  } else if (spec.name == "gpsample") {
    if (spec.dim < 1) throw std::invalid_argument("make_problem: gpsample needs an explicit dim");
    raw = gp_sample_problem(spec.dim, spec.problem_seed, spec.grid_size);
    spec.normalized = false;
    if (!spec.has_lower_bound) {
      spec.has_lower_bound = true;
      spec.lower_bound = -4.0;
    }
  } else {
    throw std::invalid_argument("make_problem: unknown problem " + spec.name);
  }

  if (spec.normalized) {
    const Normalization n = normalize_benchmark(raw, spec.dim, spec.norm_samples, spec.norm_seed);
    spec.norm_mean = n.mean;
    spec.norm_sd = n.sd;
    auto inner = raw;
    raw = [inner, n](const Vec& x) { return (inner(x) - n.mean) / n.sd; };
    if (raw_min) raw_min = (*raw_min - n.mean) / n.sd;
  }
  if (raw_min) {
    spec.has_known_min = true;
    spec.known_min = *raw_min;
  }

  if (!spec.constraint.empty()) {
    if (spec.constraint == "sinprod") {
      prob.constraints.push_back(sinprod_constraint);
    } else if (spec.constraint == "gpsample") {
      prob.constraints.push_back(
          gp_sample_problem(spec.dim, derive_seed(spec.problem_seed, "gp-constraint"),
                            spec.grid_size));
    } else {
      throw std::invalid_argument("make_problem: unknown constraint " + spec.constraint);
    }
  }

  prob.spec = spec;
  prob.objective = raw;
  return prob;
}

// Pure function of the stored record: recomputing it must reproduce the
// stored block exactly.
inline MetricsBlock compute_metrics(const RunRecord& rec, std::optional<double> true_min,
                                    std::optional<double> lower_bound) {
  MetricsBlock m;
  const int n = static_cast<int>(rec.rows.size());
  const bool constrained = algo_constrained(rec.config.algo);

  int failures = 0;
  double best_obs = std::numeric_limits<double>::infinity();
  double best_safe = std::numeric_limits<double>::infinity();
  m.best_safe_trace.reserve(n);
  int depletion_t = 0;
  for (const auto& row : rec.rows) {
    if (row.failure) {
      ++failures;
      if (constrained && rec.config.failure_budget > 0 && failures == rec.config.failure_budget)
        depletion_t = row.t;
    } else {
      best_safe = std::min(best_safe, row.y);
    }
    best_obs = std::min(best_obs, row.y);
    m.best_safe_trace.push_back(std::isfinite(best_safe)
                                    ? best_safe
                                    : std::numeric_limits<double>::quiet_NaN());
  }
  m.failures = failures;
  m.overruns = constrained ? std::max(0, failures - rec.config.failure_budget) : 0;
  m.depletion_iteration = depletion_t;
  // Percent-safe uses the configured horizon, so early-stopped runs are
  // charged for the evaluations they never made.
  m.omega = 100.0 * static_cast<double>(n - failures) /
            static_cast<double>(std::max(1, rec.config.total_evals));
  if (n > 0) {
    m.has_best_observed = true;
    m.best_observed = best_obs;
  }
  if (std::isfinite(best_safe)) {
    m.has_best_safe = true;
    m.best_safe = best_safe;
    if (true_min) {
      m.has_simple_regret = true;
      m.regret_vs_bound = false;
      m.simple_regret = std::max(0.0, best_safe - *true_min);
    } else if (lower_bound) {
      m.has_simple_regret = true;
      m.regret_vs_bound = true;
      m.simple_regret = best_safe - *lower_bound;
    }
  }
  return m;
}

inline MetricsBlock compute_metrics(const RunRecord& rec) {
  std::optional<double> tm, lb;
  if (rec.problem.has_known_min) tm = rec.problem.known_min;
  if (rec.problem.has_lower_bound) lb = rec.problem.lower_bound;
  return compute_metrics(rec, tm, lb);
}

// Runs one configured repeat on a benchmark problem and attaches metrics.
inline RunRecord run_benchmark(const RunConfig& cfg, const Problem& prob) {
  RunRecord rec = run_loop(cfg, prob);
  rec.metrics = compute_metrics(rec);
  return rec;
}

}  // namespace xs
