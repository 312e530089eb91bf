#include <catch_amalgamated.hpp>

#include <xsearch/budget.hpp>
#include <xsearch/rng.hpp>

#include <cmath>

using namespace xs;

TEST_CASE("initial state maps the starting tolerance through the latent link", "[budget]") {
  ControllerConfig cfg;
  const BudgetState s = BudgetState::init(5, 50, cfg);
  CHECK(s.remaining_failures == 5);
  CHECK(s.remaining_evals == 50);
  CHECK(s.rho == Catch::Approx(0.1).epsilon(1e-12));
  CHECK(s.z == Catch::Approx(norm_quantile(0.1)).epsilon(1e-12));
  CHECK(s.t == 0);

  CHECK_THROWS_AS(BudgetState::init(-1, 50, cfg), std::invalid_argument);
  CHECK_THROWS_AS(BudgetState::init(5, 0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(BudgetState::init(51, 50, cfg), std::invalid_argument);
}

TEST_CASE("configuration bounds are enforced", "[budget]") {
  ControllerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.rho_b = 0.995;  // above rho_safe
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ControllerConfig{};
  cfg.rho_risk = 0.7;  // above rho_b
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ControllerConfig{};
  cfg.rho_0 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("a depleted budget snaps to the safe tolerance in one step", "[budget]") {
  ControllerConfig cfg;
  BudgetState s = BudgetState::init(0, 30, cfg);
  s = update_rho(s, cfg, false);
  CHECK(s.z == Catch::Approx(cfg.z_safe()).margin(1e-15));
  CHECK(s.rho == Catch::Approx(0.99).epsilon(1e-12));
  // and it stays there
  s = update_rho(s, cfg, false);
  CHECK(s.rho == Catch::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("surplus budget snaps to the risky tolerance in one step", "[budget]") {
  ControllerConfig cfg;
  // Budget equals the horizon: after one decrement the remaining failures
  // exceed the remaining evaluations and the override pins the risky value.
  BudgetState s = BudgetState::init(5, 5, cfg);
  s = update_rho(s, cfg, false);  // first step blends: DB == DT, no override
  CHECK(s.remaining_failures == 5);
  CHECK(s.remaining_evals == 4);
  const double half_step = norm_cdf(s.z);
  CHECK(s.rho == Catch::Approx(half_step).epsilon(1e-12));
  s = update_rho(s, cfg, false);
  CHECK(s.z == Catch::Approx(cfg.z_risk()).margin(1e-15));
  CHECK(s.rho == Catch::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("failures past depletion stay in safe mode without going negative", "[budget]") {
  ControllerConfig cfg;
  BudgetState s = BudgetState::init(0, 10, cfg);
  s = update_rho(s, cfg, true);  // overrun: budget already exhausted
  CHECK(s.remaining_failures == 0);
  CHECK(s.rho == Catch::Approx(0.99).epsilon(1e-12));
  s = update_rho(s, cfg, true);
  CHECK(s.remaining_failures == 0);
  CHECK(s.rho == Catch::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("single failure step from the neutral point", "[budget]") {
  ControllerConfig cfg;
  BudgetState s;
  s.remaining_failures = 5;
  s.remaining_evals = 50;
  s.z = 0.0;
  s.rho = 0.5;
  s.t = 1;
  s = update_rho(s, cfg, true);
  CHECK(s.z == Catch::Approx(0.34895218110612614).epsilon(1e-10));
  CHECK(s.rho == Catch::Approx(0.6364373952160584).epsilon(1e-10));
  CHECK(s.remaining_failures == 4);
  CHECK(s.remaining_evals == 49);
  CHECK(s.t == 2);
}

TEST_CASE("the no-failure path drifts monotonically toward risk", "[budget]") {
  ControllerConfig cfg;
  BudgetState s = BudgetState::init(3, 40, cfg);
  double prev = s.z;
  while (s.remaining_evals > 0) {
    s = update_rho(s, cfg, false);
    CHECK(s.z <= prev + 1e-15);
    CHECK(s.z >= cfg.z_risk() - 1e-12);
    CHECK(s.rho > 0.0);
    CHECK(s.rho < 1.0);
    prev = s.z;
  }
  CHECK(s.z == Catch::Approx(cfg.z_risk()).margin(1e-9));
}

TEST_CASE("a last-failure step lands next to the safe target", "[budget]") {
  ControllerConfig cfg;
  for (double z0 : {-1.5, 0.0, 1.2}) {
    BudgetState s;
    s.remaining_failures = 1;
    s.remaining_evals = 20;
    s.z = z0;
    s.rho = norm_cdf(z0);
    s = update_rho(s, cfg, true);
    const double pull = std::abs(cfg.z_risk() - cfg.z_safe()) / (2.0 * 20.0);
    CHECK(std::abs(s.z - cfg.z_safe()) <= pull + 1e-12);
  }
}

TEST_CASE("tolerance stays inside the open unit interval under fuzzing", "[budget]") {
  ControllerConfig cfg;
  Rng rng(616);
  BudgetState s = BudgetState::init(10, 1000, cfg);
  for (int i = 0; i < 1000; ++i) {
    const bool failure = s.remaining_failures > 0 && rng.uniform01() < 0.2;
    s = update_rho(s, cfg, failure);
    REQUIRE(s.rho > 0.0);
    REQUIRE(s.rho < 1.0);
    REQUIRE(std::abs(s.z) <= 8.0);
  }
  CHECK(s.remaining_evals == 0);
  CHECK_THROWS_AS(update_rho(s, cfg, false), std::logic_error);
}

TEST_CASE("replaying a failure sequence reproduces the trajectory bit-exactly", "[budget]") {
  ControllerConfig cfg;
  const std::vector<bool> failures = {false, true,  false, false, true, false,
                                      false, false, true,  false, true, false};
  auto run = [&] {
    std::vector<double> zs, rhos;
    BudgetState s = BudgetState::init(6, 30, cfg);
    for (bool f : failures) {
      s = update_rho(s, cfg, f);
      zs.push_back(s.z);
      rhos.push_back(s.rho);
    }
    return std::make_pair(zs, rhos);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("branch selection honors the bootstrap and boundary rules", "[budget]") {
  ControllerConfig cfg;
  BudgetState s = BudgetState::init(5, 20, cfg);

  s.rho = 0.99;
  CHECK(select_branch(s, cfg, false) == Branch::risky);  // no safe area yet
  CHECK(select_branch(s, cfg, true) == Branch::safe);

  s.rho = 0.5;  // boundary is inclusive on the risky side
  CHECK(select_branch(s, cfg, true) == Branch::risky);
  s.rho = 0.5000001;
  CHECK(select_branch(s, cfg, true) == Branch::safe);
  s.rho = 0.01;
  CHECK(select_branch(s, cfg, true) == Branch::risky);
}
