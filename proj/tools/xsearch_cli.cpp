#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xsearch/oracles.hpp"
#include "xsearch/xsearch.hpp"

namespace fs = std::filesystem;

namespace {

struct RunArgs {
  std::string algo = "xs";
  std::string problem;
  std::string constraint;
  int dim = 0;
  std::uint64_t problem_seed = 0;
  int grid_size = 8000;
  bool normalize = false;
  long norm_samples = 100000;
  std::uint64_t norm_seed = 0;
  int total_evals = 100;
  int failure_budget = 0;
  int minima_samples = 20;
  int repeats = 1;
  std::uint64_t seed = 0;
  int restarts = 10;
  long opt_budget = 200;
  int hyper_restarts = 5;
  int init_design = 1;
  int frechet_grid = 2000;
  double ucb_beta = 2.0;
  double eic_threshold = 0.99;
  std::string deriv_mode = "extended";
  bool stop_on = false;
  bool stop_off = false;
  std::string out_dir;
};

int cmd_run(const RunArgs& a) {
  xs::ProblemSpec spec;
  spec.name = a.problem;
  spec.constraint = a.constraint;
  spec.dim = a.dim;
  spec.problem_seed = a.problem_seed;
  spec.grid_size = a.grid_size;
  spec.normalized = a.normalize;
  spec.norm_samples = a.norm_samples;
  spec.norm_seed = a.norm_seed;
  const xs::Problem prob = xs::make_problem(spec);

  xs::RunConfig cfg;
  cfg.algo = xs::algo_from_name(a.algo);
  if (xs::algo_constrained(cfg.algo) && prob.constraints.empty()) {
    std::cerr << "error: " << a.algo << " needs a constrained problem (--constraint)\n";
    return 2;
  }
  if (!xs::algo_constrained(cfg.algo) && !prob.constraints.empty()) {
    std::cerr << "error: " << a.algo << " cannot run on a constrained problem\n";
    return 2;
  }
  cfg.total_evals = a.total_evals;
  cfg.failure_budget = a.failure_budget;
  cfg.minima_samples = a.minima_samples;
  cfg.restarts = a.restarts;
  cfg.opt_budget = a.opt_budget;
  cfg.hyper_restarts = a.hyper_restarts;
  cfg.init_design = a.init_design;
  cfg.base_seed = a.seed;
  cfg.frechet_grid = a.frechet_grid;
  cfg.ucb_beta = a.ucb_beta;
  cfg.eic_threshold = a.eic_threshold;
  cfg.deriv_mode =
      a.deriv_mode == "prior" ? xs::DerivVariance::prior : xs::DerivVariance::extended;
  if (a.stop_on) cfg.stop_on_depletion = true;
  if (a.stop_off) cfg.stop_on_depletion = false;

  fs::create_directories(a.out_dir);
  std::vector<xs::RunRecord> records;
  for (int k = 0; k < a.repeats; ++k) {
    cfg.repeat_index = k;
    xs::RunRecord rec = xs::run_benchmark(cfg, prob);
    if (rec.aborted) {
      std::cerr << "error: repeat " << k << " aborted: " << rec.abort_reason << "\n";
      return 3;
    }
    std::ostringstream name;
    name << "record-" << a.algo << "-" << a.problem << "-s" << a.seed << "-r" << k << ".json";
    const fs::path path = fs::path(a.out_dir) / name.str();
    xs::save_record(path.string(), rec);
    std::cout << path.string() << "\n";
    records.push_back(std::move(rec));
  }

  const fs::path runs_csv = fs::path(a.out_dir) / "summary.csv";
  std::ofstream(runs_csv) << xs::summarize_csv(records);
  std::cout << runs_csv.string() << "\n";
  const fs::path iter_csv = fs::path(a.out_dir) / "iterations.csv";
  std::ofstream(iter_csv) << xs::iteration_summary_csv(records);
  std::cout << iter_csv.string() << "\n";
  return 0;
}

int cmd_replay(const std::vector<std::string>& paths) {
  int mismatched = 0;
  for (const auto& path : paths) {
    const xs::RunRecord stored = xs::load_record(path);
    const xs::Problem prob = xs::make_problem(stored.problem);
    const xs::RunRecord fresh = xs::run_benchmark(stored.config, prob);
    const bool ok = xs::records_equal(stored, fresh);
    std::cout << (ok ? "match    " : "MISMATCH ") << path << "\n";
    if (!ok) ++mismatched;
  }
  return mismatched == 0 ? 0 : 1;
}

std::vector<xs::RunRecord> collect_records(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<xs::RunRecord> out;
  for (const auto& f : files) {
    try {
      out.push_back(xs::load_record(f));
    } catch (const std::exception& e) {
      std::cerr << "skipping " << f << ": " << e.what() << "\n";
    }
  }
  return out;
}

int cmd_summarize(const std::vector<std::string>& inputs, const std::string& out_file) {
  const auto records = collect_records(inputs);
  if (records.empty()) {
    std::cerr << "error: no readable records\n";
    return 2;
  }
  const std::string csv = xs::iteration_summary_csv(records);
  if (out_file.empty()) {
    std::cout << csv;
  } else {
    std::ofstream os(out_file);
    os << csv;
    std::cout << out_file << "\n";
  }
  return 0;
}

struct OracleArgs {
  double ell = 0.1;
  double sf2 = 1.0;
  double noise = 1e-4;
  double level = 0.0;
  bool level_set = false;
  double mean = 0.0;
  double sd = 1.0;
  int dim = 2;
  int grid = 4096;
  long paths = 2000;
  int obs = 20;
  int grid_points = 200;
  int repeats = 100;
  int samples = 100;
  std::uint64_t seed = 0;
};

int cmd_oracle(const std::string& name, const OracleArgs& a) {
  std::cout.precision(12);
  if (name == "rice") {
    const auto params = xs::KernelParams::isotropic(1, a.ell, a.sf2, 0.0);
    const double analytic = xs::rice_upcrossings(params, a.level);
    const auto mc = xs::oracle::mc_rice_upcrossings(params, a.level, a.grid, a.paths, a.seed);
    std::cout << "analytic_rate " << analytic << "\n"
              << "mc_rate " << mc.rate << "\n"
              << "mc_stderr " << mc.stderr_ << "\n"
              << "rel_error " << std::abs(mc.rate - analytic) / analytic << "\n";
    return 0;
  }
  if (name == "folded") {
    std::cout << "closed_form " << xs::folded_normal_mean(a.mean, a.sd) << "\n"
              << "quadrature " << xs::oracle::quad_folded_mean(a.mean, a.sd) << "\n";
    return 0;
  }
  if (name == "crossing-quad") {
    xs::Rng rng(xs::derive_seed(a.seed, "oracle-data"));
    xs::Dataset data(1);
    for (int i = 0; i < a.obs; ++i) {
      xs::Vec x(1);
      x[0] = rng.uniform01();
      data.add(x, rng.normal());
    }
    const auto params = xs::KernelParams::isotropic(1, a.ell, a.sf2, a.noise);
    const double u = a.level_set ? a.level : data.outputs().minCoeff() - 0.5;
    xs::GpModel model(data, params);
    xs::CrossingQuery q;
    q.model = &model;
    q.x = xs::Vec::Constant(1, 0.5);
    q.u = u;
    std::cout << "closed_form " << xs::crossing_intensity_1d(q) << "\n"
              << "quadrature " << xs::oracle::quad_crossing_intensity(data, params, q.x, u) << "\n";
    return 0;
  }
  if (name == "michalewicz-min") {
    std::cout << "minimum " << xs::michalewicz_min_oracle(a.dim) << "\n";
    return 0;
  }
  if (name == "hartmann6-min") {
    std::cout << "minimum " << xs::hartmann6_min_oracle() << "\n";
    return 0;
  }
  if (name == "forrester-min") {
    std::cout << "minimum " << xs::forrester_min_oracle() << "\n";
    return 0;
  }
  if (name == "gumbel-exceed") {
    const auto params = xs::KernelParams::isotropic(1, a.ell, a.sf2, a.noise);
    std::vector<xs::Vec> obs_pts;
    for (int i = 0; i < a.obs; ++i) obs_pts.push_back(xs::halton_point(i + 1, 1));
    const xs::Vec y =
        xs::sample_prior_on_grid(params, obs_pts, xs::derive_seed(a.seed, "oracle-obs"));
    xs::Dataset data(1);
    for (int i = 0; i < a.obs; ++i) data.add(obs_pts[i], y[i]);
    xs::GpModel model(data, params);
    std::vector<xs::Vec> grid;
    for (int i = 0; i < a.grid_points; ++i) grid.push_back(xs::halton_point(i + 1, 1));
    const auto cmp = xs::gumbel_comparison(model, grid, a.repeats,
                                           xs::derive_seed(a.seed, "oracle-exceed"), a.samples);
    std::cout << "frechet_exceed_pct " << cmp.frechet_exceed_pct << "\n"
              << "gumbel_exceed_pct " << cmp.gumbel_exceed_pct << "\n"
              << "gumbel_exceed_sd " << cmp.gumbel_exceed_sd << "\n";
    return 0;
  }
  std::cerr << "error: unknown oracle " << name << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"excursion-search benchmark runner"};
  app.require_subcommand(1);

  RunArgs ra;
  CLI::App* run = app.add_subcommand("run", "run one algorithm on one problem over n seeds");
  run->add_option("--algo", ra.algo, "xs|xsf|ei|pi|ucb|eic")->required();
  run->add_option("--problem", ra.problem, "hartmann6|michalewicz2|michalewicz10|forrester|gpsample")
      ->required();
  run->add_option("--constraint", ra.constraint, "none|sinprod|gpsample");
  run->add_option("--dim", ra.dim, "problem dimension (gpsample only)");
  run->add_option("--problem-seed", ra.problem_seed, "gpsample draw seed");
  run->add_option("--grid-size", ra.grid_size, "gpsample conditioning grid size");
  run->add_flag("--normalize", ra.normalize, "normalize outputs to zero mean, unit variance");
  run->add_option("--norm-samples", ra.norm_samples, "normalization sample count");
  run->add_option("--norm-seed", ra.norm_seed, "normalization seed");
  run->add_option("--T,--evals", ra.total_evals, "evaluation horizon");
  run->add_option("--B,--budget", ra.failure_budget, "failure budget");
  run->add_option("--S,--minima-samples", ra.minima_samples, "minimum-value samples per iteration");
  run->add_option("--repeats", ra.repeats, "repeat count");
  run->add_option("--seed", ra.seed, "base seed; repeat k derives from (seed, k)");
  run->add_option("--restarts", ra.restarts, "acquisition optimizer restarts");
  run->add_option("--opt-budget", ra.opt_budget, "evaluations per optimizer restart");
  run->add_option("--hyper-restarts", ra.hyper_restarts, "hyperparameter fit restarts");
  run->add_option("--init", ra.init_design, "initial design size");
  run->add_option("--frechet-grid", ra.frechet_grid, "quantile-fit grid size");
  run->add_option("--ucb-beta", ra.ucb_beta, "ucb exploration weight");
  run->add_option("--eic-threshold", ra.eic_threshold, "eic feasibility threshold");
  run->add_option("--deriv-mode", ra.deriv_mode, "extended|prior")
      ->check(CLI::IsMember({"extended", "prior"}));
  run->add_flag("--stop-on-depletion", ra.stop_on, "stop when the failure budget depletes");
  run->add_flag("--no-stop-on-depletion", ra.stop_off, "keep running after depletion");
  run->add_option("--out", ra.out_dir, "output directory")->required();

  std::vector<std::string> replay_paths;
  CLI::App* replay = app.add_subcommand("replay", "re-run records and check bit-equality");
  replay->add_option("records", replay_paths, "record files")->required();

  std::vector<std::string> summarize_inputs;
  std::string summarize_out;
  CLI::App* summarize = app.add_subcommand("summarize", "aggregate records into a per-iteration CSV");
  summarize->add_option("inputs", summarize_inputs, "record files or directories")->required();
  summarize->add_option("--out", summarize_out, "output file (default stdout)");

  std::string oracle_name;
  OracleArgs oa;
  CLI::App* oracle = app.add_subcommand("oracle", "run a reference oracle and print its values");
  oracle
      ->add_option("name", oracle_name,
                   "rice|folded|crossing-quad|michalewicz-min|hartmann6-min|forrester-min|"
                   "gumbel-exceed")
      ->required();
  oracle->add_option("--ell", oa.ell, "lengthscale");
  oracle->add_option("--sf2", oa.sf2, "signal variance");
  oracle->add_option("--noise", oa.noise, "noise variance");
  oracle->add_option("--level", oa.level, "crossing level")->each([&](const std::string&) {
    oa.level_set = true;
  });
  oracle->add_option("--mean", oa.mean, "folded-normal location");
  oracle->add_option("--sd", oa.sd, "folded-normal scale");
  oracle->add_option("--dim", oa.dim, "dimension");
  oracle->add_option("--grid", oa.grid, "path grid size");
  oracle->add_option("--paths", oa.paths, "monte carlo path count");
  oracle->add_option("--obs", oa.obs, "observation count");
  oracle->add_option("--grid-points", oa.grid_points, "quantile-fit grid size");
  oracle->add_option("--repeats", oa.repeats, "repeat count");
  oracle->add_option("--samples", oa.samples, "samples per repeat");
  oracle->add_option("--seed", oa.seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(ra);
    if (replay->parsed()) return cmd_replay(replay_paths);
    if (summarize->parsed()) return cmd_summarize(summarize_inputs, summarize_out);
    if (oracle->parsed()) return cmd_oracle(oracle_name, oa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
