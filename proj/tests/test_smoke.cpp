#include <catch_amalgamated.hpp>

#include "xsearch/oracles.hpp"
#include "xsearch/xsearch.hpp"

using namespace xs;

TEST_CASE("tiny end-to-end run round-trips through json", "[smoke]") {
  ProblemSpec spec;
  spec.name = "forrester";
  Problem prob = make_problem(spec);

  RunConfig cfg;
  cfg.algo = Algo::ei;
  cfg.total_evals = 3;
  cfg.fit_hypers = false;
  cfg.has_fixed_params = true;
  cfg.fixed_params = KernelParams::isotropic(1, 0.2);
  cfg.restarts = 2;
  cfg.opt_budget = 40;

  RunRecord rec = run_benchmark(cfg, prob);
  REQUIRE(rec.rows.size() == 3);
  REQUIRE(rec.has_recommendation);

  RunRecord back = record_from_json(record_to_json(rec));
  REQUIRE(records_equal(rec, back));
}
