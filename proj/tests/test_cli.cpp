#include <catch_amalgamated.hpp>

#include <xsearch/record_io.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef XSEARCH_CLI_PATH
#error "XSEARCH_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const std::string& log = "cli_out.txt") {
  const std::string cmd = std::string(XSEARCH_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("run subcommand writes records and summaries", "[cli]") {
  const std::string dir = "cli_smoke_out";
  fs::remove_all(dir);
  REQUIRE(run_cli("run --algo ei --problem forrester --T 4 --repeats 2 --seed 3 "
                  "--hyper-restarts 2 --opt-budget 80 --restarts 4 --out " +
                  dir) == 0);

  const fs::path r0 = fs::path(dir) / "record-ei-forrester-s3-r0.json";
  const fs::path r1 = fs::path(dir) / "record-ei-forrester-s3-r1.json";
  REQUIRE(fs::exists(r0));
  REQUIRE(fs::exists(r1));
  REQUIRE(fs::exists(fs::path(dir) / "summary.csv"));
  REQUIRE(fs::exists(fs::path(dir) / "iterations.csv"));

  const xs::RunRecord rec = xs::load_record(r0.string());
  CHECK(rec.rows.size() == 4);
  CHECK(rec.config.base_seed == 3);
  CHECK(rec.problem.name == "forrester");

  SECTION("replay confirms an untouched record") {
    CHECK(run_cli("replay " + r0.string()) == 0);
  }

  SECTION("replay flags a tampered record") {
    xs::RunRecord bad = rec;
    bad.rows[1].y += 1e-9;
    const fs::path tampered = fs::path(dir) / "tampered.json";
    xs::save_record(tampered.string(), bad);
    CHECK(run_cli("replay " + tampered.string()) == 1);
    fs::remove(tampered);
  }

  SECTION("summarize aggregates a directory of records") {
    REQUIRE(run_cli("summarize " + dir, "cli_sum.txt") == 0);
    const std::string csv = slurp("cli_sum.txt");
    CHECK(csv.rfind("algo,problem,iter,median_regret,p25,p75,median_omega\n", 0) == 0);
    // one header plus T rows for the single (algo, problem) group
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);
  }
}

TEST_CASE("oracle subcommand prints reference values", "[cli]") {
  REQUIRE(run_cli("oracle forrester-min", "cli_oracle.txt") == 0);
  const std::string out = slurp("cli_oracle.txt");
  CHECK(out.find("minimum -6.0207") != std::string::npos);

  REQUIRE(run_cli("oracle folded --mean 1 --sd 1", "cli_oracle.txt") == 0);
  const std::string folded = slurp("cli_oracle.txt");
  CHECK(folded.find("closed_form 1.16663") != std::string::npos);
  CHECK(folded.find("quadrature 1.16663") != std::string::npos);

  CHECK(run_cli("oracle not-a-thing", "cli_oracle.txt") == 2);
}

TEST_CASE("invalid configurations exit with status 2", "[cli]") {
  CHECK(run_cli("run --algo xs --problem forrester --constraint sinprod --T 3 --out cli_bad") ==
        2);
  CHECK(run_cli("run --algo xsf --problem forrester --T 3 --B 1 --out cli_bad") == 2);
  CHECK(run_cli("run --algo nope --problem forrester --T 3 --out cli_bad") == 2);
  CHECK(run_cli("run --algo xs --problem unknown-benchmark --T 3 --out cli_bad") == 2);
  fs::remove_all("cli_bad");
}
