#include <catch_amalgamated.hpp>

#include <xsearch/bench.hpp>
#include <xsearch/loop.hpp>
#include <xsearch/record_io.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

using namespace xs;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Problem synthetic_1d(std::function<double(const Vec&)> f,
                     std::vector<std::function<double(const Vec&)>> gs = {}) {
  Problem p;
  p.spec.name = "synthetic";
  p.spec.dim = 1;
  if (!gs.empty()) p.spec.constraint = "synthetic";
  p.objective = std::move(f);
  p.constraints = std::move(gs);
  return p;
}

RunConfig fixed_cfg_1d(Algo algo, int T, int B = 0) {
  RunConfig cfg;
  cfg.algo = algo;
  cfg.total_evals = T;
  cfg.failure_budget = B;
  cfg.fit_hypers = false;
  cfg.has_fixed_params = true;
  cfg.fixed_params = KernelParams::isotropic(1, 0.15, 1.0, 1e-4);
  cfg.minima_samples = 12;
  cfg.frechet_grid = 600;
  cfg.restarts = 6;
  cfg.opt_budget = 120;
  return cfg;
}

// Post-hoc checks of the per-row bookkeeping contracts shared by all
// constrained records.
void check_constrained_record(const RunRecord& r) {
  int failures = 0;
  bool safe_seen = false;
  for (const auto& row : r.rows) {
    if (row.branch == "safe") {
      CHECK(row.rho > r.config.controller.rho_b);
      CHECK(safe_seen);
      CHECK(row.phi >= row.rho - 1e-6);
    } else if (row.branch == "risky") {
      CHECK((row.rho <= r.config.controller.rho_b || !safe_seen));
    }
    if (!row.failure) safe_seen = true;
    if (row.failure) ++failures;
    CHECK(row.budget_left == std::max(0, r.config.failure_budget - failures));
  }
}

}  // namespace

TEST_CASE("a single-evaluation horizon yields only the initial design", "[loop]") {
  const Problem prob = synthetic_1d([](const Vec& x) { return x[0] * x[0]; });
  RunConfig cfg = fixed_cfg_1d(Algo::xs, 1);
  const RunRecord r = run_xs(cfg, prob);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].branch == "init");
  CHECK(r.rows[0].t == 1);
  CHECK(r.has_recommendation);
  CHECK_FALSE(r.aborted);
}

TEST_CASE("reruns with the same configuration are bit-identical", "[loop]") {
  const Problem prob = synthetic_1d(
      [](const Vec& x) { return std::sin(9.0 * x[0]) + 0.4 * x[0]; },
      {[](const Vec& x) { return std::abs(x[0] - 0.5) - 0.4; }});
  RunConfig cfg = fixed_cfg_1d(Algo::xsf, 6, 2);
  cfg.base_seed = 42;
  const RunRecord a = run_xsf(cfg, prob);
  const RunRecord b = run_xsf(cfg, prob);
  CHECK(records_equal(a, b));

  const Problem uprob = synthetic_1d([](const Vec& x) { return std::cos(7.0 * x[0]); });
  RunConfig ucfg = fixed_cfg_1d(Algo::xs, 5);
  ucfg.base_seed = 43;
  const RunRecord c = run_xs(ucfg, uprob);
  const RunRecord d = run_xs(ucfg, uprob);
  REQUIRE(c.rows.size() == d.rows.size());
  for (std::size_t i = 0; i < c.rows.size(); ++i) CHECK(c.rows[i].x == d.rows[i].x);
}

TEST_CASE("excursion search closes in on a multimodal 1D minimum", "[loop][search]") {
  ProblemSpec ps;
  ps.name = "forrester";
  const Problem prob = make_problem(ps);
  REQUIRE(prob.spec.has_known_min);

  // Function range over a dense grid, for the regret scale.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i <= 20000; ++i) {
    const double y = prob.objective(vec1(i / 20000.0));
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  const double range = hi - lo;

  std::vector<double> regrets;
  for (int rep = 0; rep < 5; ++rep) {
    RunConfig cfg;
    cfg.algo = Algo::xs;
    cfg.total_evals = 30;
    cfg.base_seed = 7;
    cfg.repeat_index = rep;
    cfg.minima_samples = 12;
    cfg.frechet_grid = 600;
    cfg.restarts = 6;
    cfg.opt_budget = 120;
    cfg.hyper_restarts = 3;
    const RunRecord r = run_xs(cfg, prob);
    REQUIRE(r.rows.size() == 30);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : r.rows) best = std::min(best, row.y);
    regrets.push_back(best - prob.spec.known_min);
    CHECK(regrets.back() >= -1e-9);
  }
  std::sort(regrets.begin(), regrets.end());
  CHECK(regrets[2] < 0.05 * range);
}

TEST_CASE("zero failure budget pins the controller to the safe level", "[loop]") {
  const Problem prob = synthetic_1d(
      [](const Vec& x) { return (x[0] - 0.3) * (x[0] - 0.3); },
      {[](const Vec& x) { return std::abs(x[0] - 0.5) - 0.4; }});
  RunConfig cfg = fixed_cfg_1d(Algo::xsf, 8, 0);
  cfg.init_points = {vec1(0.5)};
  const RunRecord r = run_xsf(cfg, prob);
  REQUIRE(r.rows.size() == 8);
  for (const auto& row : r.rows) {
    CHECK(row.rho == Catch::Approx(cfg.controller.rho_safe).margin(1e-12));
    CHECK((row.branch == "init" || row.branch == "safe"));
  }
  check_constrained_record(r);
}

TEST_CASE("surplus failure budget pins the controller to the risky level", "[loop]") {
  const Problem prob = synthetic_1d(
      [](const Vec& x) { return std::cos(11.0 * x[0]); },
      {[](const Vec& x) { return 0.25 - x[0]; }});
  RunConfig cfg = fixed_cfg_1d(Algo::xsf, 6, 6);
  cfg.init_points = {vec1(0.6)};
  const RunRecord r = run_xsf(cfg, prob);
  REQUIRE(r.rows.size() == 6);
  for (const auto& row : r.rows) {
    if (row.t < 2) continue;
    CHECK(row.rho == Catch::Approx(cfg.controller.rho_risk).margin(1e-12));
    CHECK(row.branch == "risky");
  }
}

TEST_CASE("transient infeasibility falls back to the risky objective", "[loop]") {
  const double star = 0.123456789;
  const Problem prob = synthetic_1d(
      [](const Vec& x) { return x[0] * x[0]; },
      {[star](const Vec& x) { return std::abs(x[0] - star) * 1e6 - 1e-3; }});
  RunConfig cfg = fixed_cfg_1d(Algo::xsf, 4, 1);
  cfg.fixed_params = KernelParams::isotropic(1, 0.2, 1.0, 0.01);
  cfg.init_points = {vec1(star)};
  cfg.controller.rho_0 = 0.9;
  const RunRecord r = run_xsf(cfg, prob);
  REQUIRE(r.rows.size() == 4);
  // The safe branch is selected at t=2 (rho is still above the branch
  // threshold) but no point can reach the required satisfaction probability,
  // so the iteration must be flagged as the risky fallback.
  CHECK(r.rows[1].rho > cfg.controller.rho_b);
  CHECK(r.rows[1].branch == "risky_fallback");
}

TEST_CASE("the risky branch reaches a disconnected safe island", "[loop][search]") {
  const auto f = [](const Vec& x) {
    const double a = (x[0] - 0.9) / 0.06;
    const double b = (x[0] - 0.1) / 0.06;
    return -2.0 * std::exp(-a * a) - std::exp(-b * b);
  };
  const auto g = [](const Vec& x) { return 0.09 - (x[0] - 0.5) * (x[0] - 0.5); };

  int both = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const Problem prob = synthetic_1d(f, {g});
    RunConfig cfg = fixed_cfg_1d(Algo::xsf, 30, 5);
    cfg.fixed_params = KernelParams::isotropic(1, 0.08, 1.0, 1e-4);
    cfg.init_points = {vec1(0.1)};
    cfg.base_seed = 100 + rep;
    const RunRecord r = run_xsf(cfg, prob);
    REQUIRE(r.rows.size() == 30);
    check_constrained_record(r);
    bool left = false, right = false;
    for (const auto& row : r.rows) {
      if (row.x[0] < 0.25) left = true;
      if (row.x[0] > 0.75) right = true;
    }
    if (left && right) ++both;
  }
  CHECK(both >= 8);
}

TEST_CASE("an entirely unsafe problem ends in the feasibility fallback", "[loop]") {
  const Problem prob = synthetic_1d([](const Vec& x) { return x[0] * x[0]; },
                                    {[](const Vec&) { return 1.0; }});
  RunConfig cfg = fixed_cfg_1d(Algo::xsf, 6, 6);
  const RunRecord r = run_xsf(cfg, prob);
  REQUIRE(r.rows.size() == 6);
  CHECK(r.depleted);
  CHECK(r.has_recommendation);
  CHECK(r.recommendation_fallback);
  for (const auto& row : r.rows) CHECK(row.failure);
}

TEST_CASE("depletion stops the hard-threshold baseline but not the controller loop",
          "[loop]") {
  const auto f = [](const Vec& x) { return x[0] * x[0]; };
  const auto g = [](const Vec&) { return 1.0; };

  RunConfig ecfg = fixed_cfg_1d(Algo::eic, 10, 2);
  const RunRecord er = run_xsf(ecfg, synthetic_1d(f, {g}));
  CHECK(er.rows.size() == 2);
  CHECK(er.depleted);
  for (const auto& row : er.rows)
    CHECK(row.rho == Catch::Approx(ecfg.eic_threshold).margin(1e-15));

  RunConfig xcfg = fixed_cfg_1d(Algo::xsf, 10, 2);
  const RunRecord xr = run_xsf(xcfg, synthetic_1d(f, {g}));
  CHECK(xr.rows.size() == 10);
  CHECK(xr.depleted);

  // Explicit opt-in flips both behaviors.
  ecfg.stop_on_depletion = false;
  CHECK(run_xsf(ecfg, synthetic_1d(f, {g})).rows.size() == 10);
  xcfg.stop_on_depletion = true;
  CHECK(run_xsf(xcfg, synthetic_1d(f, {g})).rows.size() == 2);
}

TEST_CASE("unconstrained recommendation tracks the posterior-mean minimum", "[loop]") {
  const Problem prob = synthetic_1d([](const Vec& x) { return std::sin(6.0 * x[0]) + x[0]; });
  RunConfig cfg;
  cfg.algo = Algo::xs;
  cfg.total_evals = 8;
  cfg.base_seed = 17;
  cfg.minima_samples = 12;
  cfg.frechet_grid = 600;
  cfg.hyper_restarts = 3;
  const RunRecord r = run_xs(cfg, prob);
  REQUIRE(r.has_recommendation);

  // Rebuild the final objective model from the stored trace and the rows.
  const HyperFitEntry* fin = nullptr;
  for (const auto& e : r.hyper_trace)
    if (e.model == "f" && e.t == cfg.total_evals + 1) fin = &e;
  REQUIRE(fin != nullptr);
  KernelParams p;
  p.lengthscales = fin->lengthscales;
  p.signal_var = fin->signal_var;
  p.noise_var = cfg.priors.fixed_noise_var;
  Dataset d(1);
  for (const auto& row : r.rows) d.add(row.x, row.y);
  GpModel m(d, p);

  double grid_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 4096; ++i)
    grid_best = std::min(grid_best, m.posterior_mean(vec1(i / 4096.0)));
  CHECK(m.posterior_mean(r.recommendation) <= grid_best + 1e-6);
  CHECK(r.recommendation_mean == m.posterior_mean(r.recommendation));
}

TEST_CASE("a constrained run recommends near the known safe minimum", "[loop][search]") {
  const Problem prob = synthetic_1d(
      [](const Vec& x) { return (x[0] - 0.2) * (x[0] - 0.2); },
      {[](const Vec& x) { return std::abs(x[0] - 0.5) - 0.45; }});
  RunConfig cfg = fixed_cfg_1d(Algo::xsf, 30, 3);
  cfg.base_seed = 3;
  const RunRecord r = run_xsf(cfg, prob);
  REQUIRE(r.has_recommendation);
  CHECK_FALSE(r.recommendation_fallback);
  CHECK(std::abs(r.recommendation[0] - 0.2) <= 0.05);
  check_constrained_record(r);
}

TEST_CASE("an objective exception aborts with a partial record", "[loop]") {
  auto calls = std::make_shared<int>(0);
  const Problem prob = synthetic_1d([calls](const Vec& x) {
    if (++*calls >= 3) throw std::runtime_error("boom");
    return x[0];
  });
  RunConfig cfg = fixed_cfg_1d(Algo::xs, 10);
  const RunRecord r = run_xs(cfg, prob);
  CHECK(r.rows.size() == 2);
  CHECK(r.aborted);
  CHECK(r.abort_reason == "boom");
  CHECK_FALSE(r.has_recommendation);
}

TEST_CASE("entry points reject mismatched algorithm-problem pairings", "[loop]") {
  const Problem uprob = synthetic_1d([](const Vec& x) { return x[0]; });
  const Problem cprob = synthetic_1d([](const Vec& x) { return x[0]; },
                                     {[](const Vec&) { return -1.0; }});
  CHECK_THROWS_AS(run_xs(fixed_cfg_1d(Algo::xsf, 3, 1), uprob), std::invalid_argument);
  CHECK_THROWS_AS(run_xs(fixed_cfg_1d(Algo::xs, 3), cprob), std::invalid_argument);
  CHECK_THROWS_AS(run_xsf(fixed_cfg_1d(Algo::xs, 3), cprob), std::invalid_argument);
  CHECK_THROWS_AS(run_xsf(fixed_cfg_1d(Algo::xsf, 3, 1), uprob), std::invalid_argument);

  RunConfig bad = fixed_cfg_1d(Algo::xsf, 3, 5);
  CHECK_THROWS_AS(run_xsf(bad, cprob), std::invalid_argument);
  RunConfig nofix = fixed_cfg_1d(Algo::xs, 3);
  nofix.has_fixed_params = false;
  CHECK_THROWS_AS(run_xs(nofix, uprob), std::invalid_argument);
}
