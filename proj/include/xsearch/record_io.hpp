#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bench.hpp"

namespace xs {

using nlohmann::json;

namespace io_detail {

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

// NaN entries (undefined prefix of the best-safe trace) become nulls.
inline json trace_to_json(const std::vector<double>& tr) {
  json a = json::array();
  for (double v : tr) {
    if (std::isnan(v)) a.push_back(nullptr);
    else a.push_back(v);
  }
  return a;
}

inline std::vector<double> trace_from_json(const json& a) {
  std::vector<double> tr;
  tr.reserve(a.size());
  for (const auto& e : a)
    tr.push_back(e.is_null() ? std::numeric_limits<double>::quiet_NaN() : e.get<double>());
  return tr;
}

}  // namespace io_detail

inline json record_to_json(const RunRecord& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["algo"] = algo_name(r.config.algo);

  json c;
  c["total_evals"] = r.config.total_evals;
  c["failure_budget"] = r.config.failure_budget;
  c["minima_samples"] = r.config.minima_samples;
  c["restarts"] = r.config.restarts;
  c["opt_budget"] = r.config.opt_budget;
  c["hyper_restarts"] = r.config.hyper_restarts;
  c["init_design"] = r.config.init_design;
  c["init_points"] = json::array();
  for (const auto& pt : r.config.init_points)
    c["init_points"].push_back(io_detail::vec_to_json(pt));
  c["base_seed"] = r.config.base_seed;
  c["repeat_index"] = r.config.repeat_index;
  c["fit_hypers"] = r.config.fit_hypers;
  c["priors"] = {{"ell_min", r.config.priors.ell_min},
                 {"ell_max", r.config.priors.ell_max},
                 {"sf2_min", r.config.priors.sf2_min},
                 {"sf2_max", r.config.priors.sf2_max},
                 {"fixed_noise_var", r.config.priors.fixed_noise_var},
                 {"log_penalty_weight", r.config.priors.log_penalty_weight}};
  c["has_fixed_params"] = r.config.has_fixed_params;
  if (r.config.has_fixed_params) {
    c["fixed_params"] = {{"lengthscales", io_detail::vec_to_json(r.config.fixed_params.lengthscales)},
                         {"signal_var", r.config.fixed_params.signal_var},
                         {"noise_var", r.config.fixed_params.noise_var}};
  }
  c["controller"] = {{"rho_safe", r.config.controller.rho_safe},
                     {"rho_risk", r.config.controller.rho_risk},
                     {"rho_0", r.config.controller.rho_0},
                     {"rho_b", r.config.controller.rho_b}};
  c["stop_on_depletion"] = r.config.stops_on_depletion();
  c["frechet_grid"] = r.config.frechet_grid;
  c["eic_threshold"] = r.config.eic_threshold;
  c["ucb_beta"] = r.config.ucb_beta;
  c["deriv_mode"] = r.config.deriv_mode == DerivVariance::extended ? "extended" : "prior";
  j["config"] = c;

  json p;
  p["name"] = r.problem.name;
  p["constraint"] = r.problem.constraint;
  p["dim"] = r.problem.dim;
  p["problem_seed"] = r.problem.problem_seed;
  p["grid_size"] = r.problem.grid_size;
  p["normalized"] = r.problem.normalized;
  p["norm_samples"] = r.problem.norm_samples;
  p["norm_seed"] = r.problem.norm_seed;
  p["norm_mean"] = r.problem.norm_mean;
  p["norm_sd"] = r.problem.norm_sd;
  p["has_known_min"] = r.problem.has_known_min;
  p["known_min"] = r.problem.known_min;
  p["has_lower_bound"] = r.problem.has_lower_bound;
  p["lower_bound"] = r.problem.lower_bound;
  j["problem"] = p;

  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json rj;
    rj["t"] = row.t;
    rj["x"] = io_detail::vec_to_json(row.x);
    rj["y"] = row.y;
    rj["g"] = row.g;
    rj["failure"] = row.failure;
    rj["rho"] = row.rho;
    rj["branch"] = row.branch;
    rj["budget_left"] = row.budget_left;
    rj["acq"] = row.acq;
    if (std::isnan(row.phi)) rj["phi"] = nullptr;
    else rj["phi"] = row.phi;
    j["rows"].push_back(rj);
  }

  j["hyper_trace"] = json::array();
  for (const auto& h : r.hyper_trace) {
    j["hyper_trace"].push_back({{"t", h.t},
                                {"model", h.model},
                                {"lengthscales", io_detail::vec_to_json(h.lengthscales)},
                                {"signal_var", h.signal_var}});
  }

  j["has_recommendation"] = r.has_recommendation;
  if (r.has_recommendation) {
    j["recommendation"] = {{"x", io_detail::vec_to_json(r.recommendation)},
                           {"mean", r.recommendation_mean},
                           {"fallback", r.recommendation_fallback}};
  }
  j["depleted"] = r.depleted;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;

  const auto& m = r.metrics;
  j["metrics"] = {{"has_simple_regret", m.has_simple_regret},
                  {"simple_regret", m.simple_regret},
                  {"regret_vs_bound", m.regret_vs_bound},
                  {"omega", m.omega},
                  {"failures", m.failures},
                  {"overruns", m.overruns},
                  {"depletion_iteration", m.depletion_iteration},
                  {"has_best_observed", m.has_best_observed},
                  {"best_observed", m.best_observed},
                  {"has_best_safe", m.has_best_safe},
                  {"best_safe", m.best_safe},
                  {"best_safe_trace", io_detail::trace_to_json(m.best_safe_trace)}};
  return j;
}

inline RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != 1)
    throw std::runtime_error("record_from_json: unsupported schema version");
  r.config.algo = algo_from_name(j.at("algo").get<std::string>());

  const json& c = j.at("config");
  r.config.total_evals = c.at("total_evals").get<int>();
  r.config.failure_budget = c.at("failure_budget").get<int>();
  r.config.minima_samples = c.at("minima_samples").get<int>();
  r.config.restarts = c.at("restarts").get<int>();
  r.config.opt_budget = c.at("opt_budget").get<long>();
  r.config.hyper_restarts = c.at("hyper_restarts").get<int>();
  r.config.init_design = c.at("init_design").get<int>();
  for (const auto& pj : c.at("init_points"))
    r.config.init_points.push_back(io_detail::vec_from_json(pj));
  r.config.base_seed = c.at("base_seed").get<std::uint64_t>();
  r.config.repeat_index = c.at("repeat_index").get<int>();
  r.config.fit_hypers = c.at("fit_hypers").get<bool>();
  const json& pr = c.at("priors");
  r.config.priors.ell_min = pr.at("ell_min").get<double>();
  r.config.priors.ell_max = pr.at("ell_max").get<double>();
  r.config.priors.sf2_min = pr.at("sf2_min").get<double>();
  r.config.priors.sf2_max = pr.at("sf2_max").get<double>();
  r.config.priors.fixed_noise_var = pr.at("fixed_noise_var").get<double>();
  r.config.priors.log_penalty_weight = pr.at("log_penalty_weight").get<double>();
  r.config.has_fixed_params = c.at("has_fixed_params").get<bool>();
  if (r.config.has_fixed_params) {
    const json& fp = c.at("fixed_params");
    r.config.fixed_params.lengthscales = io_detail::vec_from_json(fp.at("lengthscales"));
    r.config.fixed_params.signal_var = fp.at("signal_var").get<double>();
    r.config.fixed_params.noise_var = fp.at("noise_var").get<double>();
  }
  const json& ct = c.at("controller");
  r.config.controller.rho_safe = ct.at("rho_safe").get<double>();
  r.config.controller.rho_risk = ct.at("rho_risk").get<double>();
  r.config.controller.rho_0 = ct.at("rho_0").get<double>();
  r.config.controller.rho_b = ct.at("rho_b").get<double>();
  r.config.stop_on_depletion = c.at("stop_on_depletion").get<bool>();
  r.config.frechet_grid = c.at("frechet_grid").get<int>();
  r.config.eic_threshold = c.at("eic_threshold").get<double>();
  r.config.ucb_beta = c.at("ucb_beta").get<double>();
  r.config.deriv_mode = c.at("deriv_mode").get<std::string>() == "prior" ? DerivVariance::prior
                                                                         : DerivVariance::extended;

  const json& p = j.at("problem");
  r.problem.name = p.at("name").get<std::string>();
  r.problem.constraint = p.at("constraint").get<std::string>();
  r.problem.dim = p.at("dim").get<int>();
  r.problem.problem_seed = p.at("problem_seed").get<std::uint64_t>();
  r.problem.grid_size = p.at("grid_size").get<int>();
  r.problem.normalized = p.at("normalized").get<bool>();
  r.problem.norm_samples = p.at("norm_samples").get<long>();
  r.problem.norm_seed = p.at("norm_seed").get<std::uint64_t>();
  r.problem.norm_mean = p.at("norm_mean").get<double>();
  r.problem.norm_sd = p.at("norm_sd").get<double>();
  r.problem.has_known_min = p.at("has_known_min").get<bool>();
  r.problem.known_min = p.at("known_min").get<double>();
  r.problem.has_lower_bound = p.at("has_lower_bound").get<bool>();
  r.problem.lower_bound = p.at("lower_bound").get<double>();

  for (const auto& rj : j.at("rows")) {
    RunRow row;
    row.t = rj.at("t").get<int>();
    row.x = io_detail::vec_from_json(rj.at("x"));
    row.y = rj.at("y").get<double>();
    row.g = rj.at("g").get<std::vector<double>>();
    row.failure = rj.at("failure").get<bool>();
    row.rho = rj.at("rho").get<double>();
    row.branch = rj.at("branch").get<std::string>();
    row.budget_left = rj.at("budget_left").get<int>();
    row.acq = rj.at("acq").get<double>();
    row.phi = rj.at("phi").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                     : rj.at("phi").get<double>();
    r.rows.push_back(std::move(row));
  }
  for (const auto& hj : j.at("hyper_trace")) {
    HyperFitEntry h;
    h.t = hj.at("t").get<int>();
    h.model = hj.at("model").get<std::string>();
    h.lengthscales = io_detail::vec_from_json(hj.at("lengthscales"));
    h.signal_var = hj.at("signal_var").get<double>();
    r.hyper_trace.push_back(std::move(h));
  }

  r.has_recommendation = j.at("has_recommendation").get<bool>();
  if (r.has_recommendation) {
    const json& rj = j.at("recommendation");
    r.recommendation = io_detail::vec_from_json(rj.at("x"));
    r.recommendation_mean = rj.at("mean").get<double>();
    r.recommendation_fallback = rj.at("fallback").get<bool>();
  }
  r.depleted = j.at("depleted").get<bool>();
  r.aborted = j.at("aborted").get<bool>();
  r.abort_reason = j.at("abort_reason").get<std::string>();

  const json& mj = j.at("metrics");
  r.metrics.has_simple_regret = mj.at("has_simple_regret").get<bool>();
  r.metrics.simple_regret = mj.at("simple_regret").get<double>();
  r.metrics.regret_vs_bound = mj.at("regret_vs_bound").get<bool>();
  r.metrics.omega = mj.at("omega").get<double>();
  r.metrics.failures = mj.at("failures").get<int>();
  r.metrics.overruns = mj.at("overruns").get<int>();
  r.metrics.depletion_iteration = mj.at("depletion_iteration").get<int>();
  r.metrics.has_best_observed = mj.at("has_best_observed").get<bool>();
  r.metrics.best_observed = mj.at("best_observed").get<double>();
  r.metrics.has_best_safe = mj.at("has_best_safe").get<bool>();
  r.metrics.best_safe = mj.at("best_safe").get<double>();
  r.metrics.best_safe_trace = io_detail::trace_from_json(mj.at("best_safe_trace"));
  return r;
}

inline void save_record(const std::string& path, const RunRecord& r) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_record: cannot open " + path);
  os << record_to_json(r).dump(1) << "\n";
}

inline RunRecord load_record(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_record: cannot open " + path);
  json j;
  is >> j;
  return record_from_json(j);
}

// Bit-level equality through the serialized form: doubles round-trip
// exactly, so equal dumps mean equal records.
inline bool records_equal(const RunRecord& a, const RunRecord& b) {
  return record_to_json(a).dump() == record_to_json(b).dump();
}

// One CSV row per record.
inline std::string summarize_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os.precision(17);
  os << "algo,problem,constraint,base_seed,repeat,rows,total_evals,failure_budget,failures,"
        "overruns,omega,depleted,depletion_iteration,simple_regret,regret_vs_bound,best_safe,"
        "best_observed,recommendation_mean\n";
  for (const auto& r : records) {
    const auto& m = r.metrics;
    os << algo_name(r.config.algo) << ',' << r.problem.name << ',' << r.problem.constraint << ','
       << r.config.base_seed << ',' << r.config.repeat_index << ',' << r.rows.size() << ','
       << r.config.total_evals << ',' << r.config.failure_budget << ',' << m.failures << ','
       << m.overruns << ',' << m.omega << ',' << (r.depleted ? 1 : 0) << ','
       << m.depletion_iteration << ',';
    if (m.has_simple_regret) os << m.simple_regret;
    os << ',' << (m.regret_vs_bound ? 1 : 0) << ',';
    if (m.has_best_safe) os << m.best_safe;
    os << ',';
    if (m.has_best_observed) os << m.best_observed;
    os << ',';
    if (r.has_recommendation) os << r.recommendation_mean;
    os << "\n";
  }
  return os.str();
}

namespace io_detail {

// Linear-interpolation quantile of a (possibly infinite-valued) sample.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = h - static_cast<double>(lo);
  if (std::isinf(v[lo]) || std::isinf(v[hi])) return std::numeric_limits<double>::infinity();
  return (1.0 - w) * v[lo] + w * v[hi];
}

}  // namespace io_detail

// Best-so-far regret per iteration, +infinity until the first safe
// observation, carried forward to the configured horizon when a run stopped
// early. Uses the known minimum when available (clamped at zero), otherwise
// the configured conservative lower bound, otherwise the raw best-safe value.
inline std::vector<double> regret_trace(const RunRecord& r) {
  const int T = r.config.total_evals;
  std::vector<double> out;
  out.reserve(T);
  double cur = std::numeric_limits<double>::infinity();
  for (double bs : r.metrics.best_safe_trace) {
    if (!std::isnan(bs)) {
      if (r.problem.has_known_min) cur = std::max(0.0, bs - r.problem.known_min);
      else if (r.problem.has_lower_bound) cur = bs - r.problem.lower_bound;
      else cur = bs;
    }
    out.push_back(cur);
  }
  while (static_cast<int>(out.size()) < T) out.push_back(cur);
  return out;
}

// Percent-safe per iteration over the rows made so far, carried forward.
inline std::vector<double> omega_trace(const RunRecord& r) {
  const int T = r.config.total_evals;
  std::vector<double> out;
  out.reserve(T);
  int safe = 0, seen = 0;
  double cur = 100.0;
  for (const auto& row : r.rows) {
    ++seen;
    if (!row.failure) ++safe;
    cur = 100.0 * safe / seen;
    out.push_back(cur);
  }
  while (static_cast<int>(out.size()) < T) out.push_back(cur);
  return out;
}

// Iteration-level aggregation across repeats: one row per iteration per
// (algorithm, problem) group with median and quartile regret plus median
// percent-safe. Undefined aggregates (fewer than half the repeats have a
// safe observation yet) are left as empty cells.
inline std::string iteration_summary_csv(const std::vector<RunRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  for (const auto& r : records)
    groups[{algo_name(r.config.algo), r.problem.name}].push_back(&r);

  std::ostringstream os;
  os.precision(17);
  os << "algo,problem,iter,median_regret,p25,p75,median_omega\n";
  for (const auto& [key, recs] : groups) {
    int horizon = 0;
    std::vector<std::vector<double>> regrets, omegas;
    for (const RunRecord* r : recs) {
      regrets.push_back(regret_trace(*r));
      omegas.push_back(omega_trace(*r));
      horizon = std::max(horizon, r->config.total_evals);
    }
    for (int t = 0; t < horizon; ++t) {
      std::vector<double> rt, ot;
      for (std::size_t i = 0; i < regrets.size(); ++i) {
        rt.push_back(t < static_cast<int>(regrets[i].size()) ? regrets[i][t] : regrets[i].back());
        ot.push_back(t < static_cast<int>(omegas[i].size()) ? omegas[i][t] : omegas[i].back());
      }
      os << key.first << ',' << key.second << ',' << (t + 1) << ',';
      const double med = io_detail::quantile(rt, 0.5);
      const double q25 = io_detail::quantile(rt, 0.25);
      const double q75 = io_detail::quantile(rt, 0.75);
      if (std::isfinite(med)) os << med;
      os << ',';
      if (std::isfinite(q25)) os << q25;
      os << ',';
      if (std::isfinite(q75)) os << q75;
      os << ',' << io_detail::quantile(ot, 0.5) << "\n";
    }
  }
  return os.str();
}

}  // namespace xs
