#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "budget.hpp"
#include "optimize.hpp"

namespace xs {

enum class Algo { xs, xsf, ei, pi, ucb, eic };

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::xs: return "xs";
    case Algo::xsf: return "xsf";
    case Algo::ei: return "ei";
    case Algo::pi: return "pi";
    case Algo::ucb: return "ucb";
    case Algo::eic: return "eic";
  }
  return "?";
}

inline Algo algo_from_name(const std::string& s) {
  if (s == "xs") return Algo::xs;
  if (s == "xsf") return Algo::xsf;
  if (s == "ei") return Algo::ei;
  if (s == "pi") return Algo::pi;
  if (s == "ucb") return Algo::ucb;
  if (s == "eic") return Algo::eic;
  throw std::invalid_argument("unknown algorithm: " + s);
}

inline bool algo_constrained(Algo a) { return a == Algo::xsf || a == Algo::eic; }

// Everything needed to rebuild a benchmark problem from a stored record.
struct ProblemSpec {
  std::string name;
  std::string constraint;  // empty for unconstrained problems
  int dim = 0;
  std::uint64_t problem_seed = 0;  // gp-sample problems
  int grid_size = 8000;            // gp-sample conditioning grid
  bool normalized = false;
  long norm_samples = 100000;
  std::uint64_t norm_seed = 0;
  double norm_mean = 0.0;
  double norm_sd = 1.0;
  bool has_known_min = false;
  double known_min = 0.0;     // in the problem's output units (post-normalization)
  bool has_lower_bound = false;
  double lower_bound = 0.0;   // conservative bound used when the minimum is unknown
};

struct Problem {
  ProblemSpec spec;
  std::function<double(const Vec&)> objective;
  std::vector<std::function<double(const Vec&)>> constraints;
};

struct RunConfig {
  Algo algo = Algo::xs;
  int total_evals = 100;    // T
  int failure_budget = 0;   // B, only meaningful for constrained algorithms
  int minima_samples = 20;  // S
  int restarts = 10;
  long opt_budget = 200;    // objective evaluations per local-search restart
  int hyper_restarts = 5;
  int init_design = 1;             // quasi-random initial points when init_points is empty
  std::vector<Vec> init_points;    // explicit initial design, overrides init_design
  std::uint64_t base_seed = 0;
  int repeat_index = 0;
  bool fit_hypers = true;
  HyperPriors priors;
  bool has_fixed_params = false;
  KernelParams fixed_params;  // used when fit_hypers is off
  ControllerConfig controller;
  std::optional<bool> stop_on_depletion;  // unset -> on for eic, off otherwise
  int frechet_grid = 2000;
  double eic_threshold = 0.99;  // hard feasibility threshold for the eic baseline
  double ucb_beta = 2.0;
  DerivVariance deriv_mode = DerivVariance::extended;

  std::uint64_t run_seed() const { return derive_seed(base_seed, "repeat", repeat_index); }

  bool stops_on_depletion() const { return stop_on_depletion.value_or(algo == Algo::eic); }

  void validate(const Problem& prob) const {
    if (prob.spec.dim < 1) throw std::invalid_argument("RunConfig: problem dimension < 1");
    if (total_evals < 1) throw std::invalid_argument("RunConfig: total_evals < 1");
    if (minima_samples < 1) throw std::invalid_argument("RunConfig: minima_samples < 1");
    if (algo_constrained(algo)) {
      if (failure_budget < 0) throw std::invalid_argument("RunConfig: negative failure budget");
      if (failure_budget > total_evals)
        throw std::invalid_argument("RunConfig: failure budget exceeds the evaluation horizon");
    }
    if (!fit_hypers) {
      if (!has_fixed_params) throw std::invalid_argument("RunConfig: fixed params required when not fitting");
      if (fixed_params.dim() != prob.spec.dim)
        throw std::invalid_argument("RunConfig: fixed params dimension mismatch");
    }
    for (const auto& p : init_points)
      if (p.size() != prob.spec.dim)
        throw std::invalid_argument("RunConfig: initial point dimension mismatch");
    if (init_points.empty() && init_design < 1)
      throw std::invalid_argument("RunConfig: empty initial design");
    controller.validate();
    priors.validate();
  }
};

struct RunRow {
  int t = 0;
  Vec x;
  double y = 0.0;
  std::vector<double> g;
  bool failure = false;
  double rho = 0.0;
  std::string branch;  // init | acq | safe | risky | risky_fallback
  int budget_left = 0;
  double acq = 0.0;
  // Model probability that x satisfies every constraint, at proposal time.
  // NaN for initial-design rows and unconstrained problems.
  double phi = std::numeric_limits<double>::quiet_NaN();
};

struct HyperFitEntry {
  int t = 0;
  std::string model;  // "f" or "g<j>"
  Vec lengthscales;
  double signal_var = 0.0;
};

struct MetricsBlock {
  bool has_simple_regret = false;
  double simple_regret = 0.0;
  bool regret_vs_bound = false;
  double omega = 100.0;
  int failures = 0;
  int overruns = 0;
  int depletion_iteration = 0;  // t of the budget-exhausting failure, 0 if never
  double best_observed = 0.0;
  bool has_best_observed = false;
  bool has_best_safe = false;
  double best_safe = 0.0;
  std::vector<double> best_safe_trace;  // NaN until the first safe observation
};

struct RunRecord {
  int schema_version = 1;
  RunConfig config;
  ProblemSpec problem;
  std::vector<RunRow> rows;
  std::vector<HyperFitEntry> hyper_trace;
  bool has_recommendation = false;
  Vec recommendation;
  double recommendation_mean = 0.0;
  bool recommendation_fallback = false;
  bool depleted = false;
  bool aborted = false;
  std::string abort_reason;
  MetricsBlock metrics;
};

namespace detail {

struct LoopState {
  Dataset objective_data;
  std::vector<Dataset> constraint_data;

  explicit LoopState(int dim, int n_constraints)
      : objective_data(dim), constraint_data(n_constraints, Dataset(dim)) {}
};

// Global Halton coverage plus the observed inputs, plus axis offsets around
// the incumbent at fractions of the lengthscale. The local points let the
// minimum surrogate see the still-unresolved band just below the incumbent,
// which keeps the fitted threshold distribution at the model's current
// resolution instead of collapsing once the global grid runs out of depth.
inline std::vector<Vec> frechet_grid_points(int dim, int count, const Dataset& data,
                                            const KernelParams& params) {
  static constexpr double kRadii[] = {0.25, 0.5, 1.0};
  std::vector<Vec> pts;
  pts.reserve(count + data.size() + 6 * data.dim());
  for (int i = 0; i < count; ++i) pts.push_back(halton_point(i + 1, dim));
  for (int i = 0; i < data.size(); ++i) pts.push_back(data.input(i));
  if (data.size() > 0) {
    int inc = 0;
    data.outputs().minCoeff(&inc);
    const Vec x_inc = data.input(inc);
    for (int j = 0; j < dim; ++j)
      for (const double r : kRadii)
        for (const double sign : {-1.0, 1.0}) {
          Vec x = x_inc;
          x[j] = std::clamp(x[j] + sign * r * params.lengthscales[j], 0.0, 1.0);
          pts.push_back(std::move(x));
        }
  }
  return pts;
}

inline KernelParams fit_or_fixed(const RunConfig& cfg, const Dataset& data, const char* tag,
                                 int t, int j, std::vector<HyperFitEntry>* trace) {
  if (!cfg.fit_hypers) return cfg.fixed_params;
  const auto seed = derive_seed(cfg.run_seed(), tag, static_cast<std::uint64_t>(t),
                                static_cast<std::uint64_t>(j));
  KernelParams p = fit_hyperparameters(data, cfg.priors, cfg.hyper_restarts, seed);
  if (trace) {
    HyperFitEntry e;
    e.t = t;
    e.model = (std::string(tag) == "hyper-f") ? "f" : ("g" + std::to_string(j));
    e.lengthscales = p.lengthscales;
    e.signal_var = p.signal_var;
    trace->push_back(e);
  }
  return p;
}

}  // namespace detail

// One full optimization run. The unconstrained algorithms ignore the
// controller; the constrained ones thread every evaluation through it. All
// randomness is drawn from streams derived from the run seed, except the
// initial design, which depends only on the base seed so repeats share it.
inline RunRecord run_loop(const RunConfig& cfg, const Problem& prob) {
  cfg.validate(prob);
  const int D = prob.spec.dim;
  const int G = static_cast<int>(prob.constraints.size());
  const int T = cfg.total_evals;
  const bool constrained = algo_constrained(cfg.algo);

  RunRecord rec;
  rec.config = cfg;
  rec.problem = prob.spec;

  std::vector<Vec> init_pts = cfg.init_points;
  if (init_pts.empty()) {
    Rng rng(derive_seed(cfg.base_seed, "init-design"));
    for (int i = 0; i < std::max(1, cfg.init_design); ++i) {
      Vec x(D);
      for (int j = 0; j < D; ++j) x[j] = rng.uniform01();
      init_pts.push_back(x);
    }
  }
  if (static_cast<int>(init_pts.size()) > T) init_pts.resize(T);
  const int n0 = static_cast<int>(init_pts.size());

  detail::LoopState st(D, G);
  BudgetState budget = constrained
                           ? BudgetState::init(cfg.failure_budget, T, cfg.controller)
                           : BudgetState{};
  bool last_failure = false;
  int failures_total = 0;

  for (int t = 1; t <= T; ++t) {
    double rho_t = 0.0;
    if (cfg.algo == Algo::xsf) {
      budget = update_rho(budget, cfg.controller, last_failure);
      rho_t = budget.rho;
    } else if (cfg.algo == Algo::eic) {
      rho_t = cfg.eic_threshold;
    }

    Vec x;
    std::string branch;
    double acqval = 0.0;
    double phival = std::numeric_limits<double>::quiet_NaN();

    if (t <= n0) {
      x = init_pts[t - 1];
      branch = "init";
    } else {
      const KernelParams pf =
          detail::fit_or_fixed(cfg, st.objective_data, "hyper-f", t, 0, &rec.hyper_trace);
      GpModel mf(st.objective_data, pf);
      std::vector<GpModel> mg;
      mg.reserve(G);
      for (int j = 0; j < G; ++j)
        mg.emplace_back(st.constraint_data[j],
                        detail::fit_or_fixed(cfg, st.constraint_data[j], "hyper-g", t, j,
                                             &rec.hyper_trace));

      AcquisitionContext ctx;
      ctx.objective = &mf;
      for (const auto& m : mg) ctx.constraints.push_back(&m);
      ctx.ucb_beta = cfg.ucb_beta;
      ctx.deriv_mode = cfg.deriv_mode;

      MinSampleSet minima;
      if (cfg.algo == Algo::xs || cfg.algo == Algo::xsf) {
        const auto grid =
            detail::frechet_grid_points(D, cfg.frechet_grid, st.objective_data, pf);
        const FrechetParams fr = fit_frechet(mf, grid);
        minima = sample_min(fr, cfg.minima_samples,
                            derive_seed(cfg.run_seed(), "min-samples", static_cast<std::uint64_t>(t)));
        ctx.minima = &minima;
      }

      bool safe_found = false;
      double best_safe_y = std::numeric_limits<double>::infinity();
      for (const auto& row : rec.rows)
        if (!row.failure) {
          safe_found = true;
          best_safe_y = std::min(best_safe_y, row.y);
        }

      const auto opt_seed = derive_seed(cfg.run_seed(), "acq-opt", static_cast<std::uint64_t>(t));
      switch (cfg.algo) {
        case Algo::xs: {
          auto r = maximize_unconstrained([&](const Vec& q) { return alpha_x(ctx, q); }, D,
                                          cfg.restarts, opt_seed, cfg.opt_budget);
          x = r.x;
          acqval = r.value;
          branch = "acq";
          break;
        }
        case Algo::ei:
        case Algo::pi:
        case Algo::ucb: {
          ctx.has_incumbent = true;
          ctx.incumbent = st.objective_data.outputs().minCoeff();
          auto fn = [&](const Vec& q) {
            return cfg.algo == Algo::ei ? ei(ctx, q) : (cfg.algo == Algo::pi ? pi(ctx, q) : ucb(ctx, q));
          };
          auto r = maximize_unconstrained(fn, D, cfg.restarts, opt_seed, cfg.opt_budget);
          x = r.x;
          acqval = r.value;
          branch = "acq";
          break;
        }
        case Algo::xsf: {
          auto phi = [&](const Vec& q) { return constraint_satisfaction_prob(ctx, q); };
          Branch b = select_branch(budget, cfg.controller, safe_found);
          branch = (b == Branch::safe) ? "safe" : "risky";
          bool solved = false;
          if (b == Branch::safe) {
            auto r = maximize_constrained([&](const Vec& q) { return alpha_x(ctx, q); }, phi,
                                          rho_t, D, cfg.restarts, opt_seed, cfg.opt_budget);
            if (r.has_value()) {
              x = r->x;
              acqval = r->value;
              solved = true;
            } else {
              branch = "risky_fallback";
            }
          }
          if (!solved) {
            auto r = maximize_unconstrained([&](const Vec& q) { return risky_objective(ctx, q); },
                                            D, cfg.restarts, opt_seed, cfg.opt_budget);
            x = r.x;
            acqval = r.value;
          }
          break;
        }
        case Algo::eic: {
          ctx.has_incumbent = safe_found;
          ctx.incumbent = best_safe_y;
          bool solved = false;
          if (safe_found) {
            branch = "safe";
            auto phi = [&](const Vec& q) { return constraint_satisfaction_prob(ctx, q); };
            auto r = maximize_constrained([&](const Vec& q) { return ei(ctx, q); }, phi, rho_t, D,
                                          cfg.restarts, opt_seed, cfg.opt_budget);
            if (r.has_value()) {
              x = r->x;
              acqval = r->value;
              solved = true;
            } else {
              branch = "risky_fallback";
            }
          } else {
            branch = "risky";
          }
          if (!solved) {
            auto r = maximize_unconstrained([&](const Vec& q) { return eic(ctx, q); }, D,
                                            cfg.restarts, opt_seed, cfg.opt_budget);
            x = r.x;
            acqval = r.value;
          }
          break;
        }
      }
      if (G > 0) phival = constraint_satisfaction_prob(ctx, x);
    }

    RunRow row;
    row.t = t;
    row.x = x;
    row.branch = branch;
    row.rho = rho_t;
    row.acq = acqval;
    row.phi = phival;
    try {
      row.y = prob.objective(x);
      for (int j = 0; j < G; ++j) row.g.push_back(prob.constraints[j](x));
    } catch (const std::exception& e) {
      rec.aborted = true;
      rec.abort_reason = e.what();
      break;
    }
    row.failure = false;
    for (double gv : row.g)
      if (gv > 0.0) row.failure = true;
    if (row.failure) ++failures_total;
    row.budget_left = constrained ? std::max(0, cfg.failure_budget - failures_total) : 0;
    rec.rows.push_back(row);

    st.objective_data.add(x, row.y);
    for (int j = 0; j < G; ++j) st.constraint_data[j].add(x, row.g[j]);
    last_failure = row.failure;

    if (constrained && cfg.stops_on_depletion() &&
        failures_total >= std::max(cfg.failure_budget, 1)) {
      rec.depleted = true;
      break;
    }
  }
  if (constrained && failures_total >= cfg.failure_budget && cfg.failure_budget > 0 &&
      !rec.rows.empty()) {
    int seen = 0;
    for (const auto& row : rec.rows) {
      if (row.failure && ++seen == cfg.failure_budget) {
        rec.depleted = true;
        break;
      }
    }
  }

  // Final recommendation from models refit on everything observed.
  if (!rec.aborted && st.objective_data.size() > 0) {
    const int t_final = T + 1;
    const KernelParams pf =
        detail::fit_or_fixed(cfg, st.objective_data, "hyper-f", t_final, 0, &rec.hyper_trace);
    GpModel mf(st.objective_data, pf);
    std::vector<GpModel> mg;
    mg.reserve(G);
    for (int j = 0; j < G; ++j)
      mg.emplace_back(st.constraint_data[j],
                      detail::fit_or_fixed(cfg, st.constraint_data[j], "hyper-g", t_final, j,
                                           &rec.hyper_trace));
    AcquisitionContext ctx;
    ctx.objective = &mf;
    for (const auto& m : mg) ctx.constraints.push_back(&m);

    const auto rec_seed = derive_seed(cfg.run_seed(), "recommend");
    auto neg_mean = [&](const Vec& q) { return -mf.posterior_mean(q); };
    if (G == 0) {
      auto r = maximize_unconstrained(neg_mean, D, cfg.restarts, rec_seed, cfg.opt_budget);
      rec.recommendation = r.x;
    } else {
      auto phi = [&](const Vec& q) { return constraint_satisfaction_prob(ctx, q); };
      auto r = maximize_constrained(neg_mean, phi, cfg.controller.rho_safe, D, cfg.restarts,
                                    rec_seed, cfg.opt_budget);
      if (r.has_value()) {
        rec.recommendation = r->x;
      } else {
        auto rf = maximize_unconstrained(phi, D, cfg.restarts, rec_seed ^ 1, cfg.opt_budget);
        rec.recommendation = rf.x;
        rec.recommendation_fallback = true;
      }
    }
    rec.has_recommendation = true;
    rec.recommendation_mean = mf.posterior_mean(rec.recommendation);
  }

  return rec;
}

inline RunRecord run_xs(const RunConfig& cfg, const Problem& prob) {
  if (algo_constrained(cfg.algo)) throw std::invalid_argument("run_xs: constrained algorithm");
  if (!prob.constraints.empty()) throw std::invalid_argument("run_xs: problem has constraints");
  return run_loop(cfg, prob);
}

inline RunRecord run_xsf(const RunConfig& cfg, const Problem& prob) {
  if (!algo_constrained(cfg.algo)) throw std::invalid_argument("run_xsf: unconstrained algorithm");
  if (prob.constraints.empty()) throw std::invalid_argument("run_xsf: problem has no constraints");
  return run_loop(cfg, prob);
}

}  // namespace xs
