#pragma once

// Analysis commands behind the `snlr` executable: fit, bands, equiv,
// simulate. Each returns a process exit code and writes its outputs under
// the output directory; logs go to the supplied streams.
//
// Exit codes: 0 success; 1 a requested check failed or an unexpected error;
// 2 malformed input (CSV, JSON, config); 3 the model could not be fitted;
// 4 request refused (equivalence with Wald bands).

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "snlr/bands.hpp"
#include "snlr/coverage.hpp"
#include "snlr/io.hpp"
#include "snlr/svg.hpp"

namespace snlr::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int { ok = 0, check_failed = 1, bad_input = 2, not_converged = 3, refused = 4 };

struct Options {
  std::string command;
  fs::path config;
  std::optional<fs::path> data;
  std::optional<fs::path> out;
  std::optional<double> alpha;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

struct BandRequest {
  BandFamily family = BandFamily::life_cdf;
  double fixed = 0.0;
  std::vector<double> grid;  // empty: default grid over the data range
  std::size_t points = 25;
};

struct SafeStressQuery {
  double cycles = 0.0;
  double p = 0.1;
};

struct EquivSettings {
  std::optional<double> stress;  // S_e for the life cdf/qf checks
  std::optional<double> cycles;  // N_e for the strength cdf/qf checks
  std::vector<double> p_values{0.1};
  std::size_t points = 25;
  std::size_t transpose_points = 49;
  double tolerance = 1e-3;
};

struct AnalysisConfig {
  std::optional<ModelSpec> model;
  fs::path data;
  double alpha = 0.10;
  std::string method = "lr";
  std::vector<ScalarTarget> targets;
  std::vector<BandRequest> bands;
  std::optional<SafeStressQuery> safe_stress;
  EquivSettings equiv;
  std::optional<json> simulation;
  fs::path output_dir = "out";
  FitOptions fit;
};

namespace detail {

inline std::vector<double> grid_from_json(const json& g, bool probability, std::size_t& points) {
  if (g.is_array()) {
    std::vector<double> v;
    for (const auto& x : g) {
      if (!x.is_number()) throw ParseError("grid entries must be numbers");
      v.push_back(x.get<double>());
    }
    return v;
  }
  if (!g.is_object()) throw ParseError("grid must be an array or {from, to, points}");
  const double a = io::detail::get<double>(g, "from", "grid"), b = io::detail::get<double>(g, "to", "grid");
  points = g.contains("points") ? io::detail::get<std::size_t>(g, "points", "grid") : points;
  if (points < 2) throw ParseError("grid: need at least 2 points");
  return probability ? probit_grid(a, b, points) : log_grid(a, b, points);
}

inline bool probability_abscissa(BandFamily f) { return f == BandFamily::life_qf || f == BandFamily::strength_qf; }

}  // namespace detail

/// Reads the analysis config; relative paths resolve against the config's
/// directory. Command-line options override config values.
inline AnalysisConfig load_config(const Options& opt) {
  AnalysisConfig c;
  const json j = io::read_json_file(opt.config);
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  const fs::path base = opt.config.has_parent_path() ? opt.config.parent_path() : fs::path(".");
  if (!j.contains("model")) throw ParseError("config: missing 'model'");
  c.model = io::model_spec_from_json(j["model"]);
  if (j.contains("data")) c.data = base / io::detail::get<std::string>(j, "data", "config");
  if (j.contains("alpha")) c.alpha = io::detail::get<double>(j, "alpha", "config");
  if (j.contains("method")) c.method = io::detail::get<std::string>(j, "method", "config");
  if (j.contains("output_dir")) c.output_dir = base / io::detail::get<std::string>(j, "output_dir", "config");
  if (j.contains("fit_starts")) c.fit.starts = io::detail::get<int>(j, "fit_starts", "config");
  if (j.contains("targets"))
    for (const auto& t : j["targets"]) c.targets.push_back(io::target_from_json(t));
  if (j.contains("bands"))
    for (const auto& b : j["bands"]) {
      BandRequest r;
      try {
        r.family = parse_band_family(io::detail::get<std::string>(b, "family", "bands"));
      } catch (const DomainError& e) {
        throw ParseError(std::string("bands: ") + e.what());
      }
      r.fixed = io::detail::get<double>(b, "fixed", "bands");
      if (b.contains("grid")) r.grid = detail::grid_from_json(b["grid"], detail::probability_abscissa(r.family), r.points);
      if (b.contains("points")) r.points = io::detail::get<std::size_t>(b, "points", "bands");
      c.bands.push_back(std::move(r));
    }
  if (j.contains("safe_stress")) {
    const auto& s = j["safe_stress"];
    c.safe_stress = SafeStressQuery{io::detail::get<double>(s, "cycles", "safe_stress"),
                                    s.contains("p") ? io::detail::get<double>(s, "p", "safe_stress") : 0.1};
  }
  if (j.contains("equivalence")) {
    const auto& e = j["equivalence"];
    if (e.contains("stress")) c.equiv.stress = io::detail::get<double>(e, "stress", "equivalence");
    if (e.contains("cycles")) c.equiv.cycles = io::detail::get<double>(e, "cycles", "equivalence");
    if (e.contains("p")) c.equiv.p_values = io::detail::get<std::vector<double>>(e, "p", "equivalence");
    if (e.contains("points")) c.equiv.points = io::detail::get<std::size_t>(e, "points", "equivalence");
    if (e.contains("transpose_points"))
      c.equiv.transpose_points = io::detail::get<std::size_t>(e, "transpose_points", "equivalence");
    if (e.contains("tolerance")) c.equiv.tolerance = io::detail::get<double>(e, "tolerance", "equivalence");
  }
  if (j.contains("simulation")) c.simulation = j["simulation"];

  if (opt.data) c.data = *opt.data;
  if (opt.out) c.output_dir = *opt.out;
  if (opt.alpha) c.alpha = *opt.alpha;
  if (opt.method) c.method = *opt.method;
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ParseError("alpha must lie in (0,1)");
  if (c.method != "lr" && c.method != "wald" && c.method != "both")
    throw ParseError("method must be lr, wald or both");
  return c;
}

namespace detail {

struct Range {
  double lo, hi;
};

inline Range stress_range(const SNDataset& d) {
  Range r{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& o : d.observations) { r.lo = std::min(r.lo, o.stress); r.hi = std::max(r.hi, o.stress); }
  return r;
}

inline Range cycles_range(const SNDataset& d) {
  Range r{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& o : d.observations) { r.lo = std::min(r.lo, o.cycles); r.hi = std::max(r.hi, o.cycles); }
  return r;
}

inline std::vector<double> default_grid(BandFamily f, const SNDataset& d, std::size_t n) {
  switch (f) {
    case BandFamily::life_qf:
    case BandFamily::strength_qf: return probit_grid(0.01, 0.99, n);
    case BandFamily::life_cdf:
    case BandFamily::strength_qf_vs_cycles: {
      const auto r = cycles_range(d);
      return log_grid(r.lo, r.hi, n);
    }
    case BandFamily::strength_cdf:
    case BandFamily::life_qf_vs_stress: {
      const auto r = stress_range(d);
      return log_grid(r.lo, r.hi, n);
    }
  }
  return {};
}

inline std::vector<Method> methods(const std::string& m) {
  if (m == "both") return {Method::lr, Method::wald};
  return {parse_method(m)};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Loaded {
  AnalysisConfig config;
  SNDataset data;
  FittedModel fit;
};

inline FittedModel fit_or_throw(const AnalysisConfig& c, const SNDataset& d) {
  return fit_ml(*c.model, d, c.fit);
}

inline Loaded load_and_fit(const Options& opt, std::ostream& log) {
  auto config = load_config(opt);
  if (config.data.empty()) throw ParseError("config: no data file given (use 'data' or --data)");
  auto data = io::read_dataset_csv(config.data);
  snlr::detail::check_observations(*config.model, data);
  log << "data: " << data.size() << " rows, " << data.failure_count() << " failures\n";
  auto fit = fit_or_throw(config, data);
  log << "fit: loglik " << io::fmt(fit.loglik_hat) << ", theta_hat";
  for (double v : fit.theta_hat.flat()) log << ' ' << io::fmt(v);
  log << '\n';
  return Loaded{std::move(config), std::move(data), std::move(fit)};
}

inline json safe_stress_json(const SafeStressResult& r, double alpha) {
  return {{"cycles", io::num(r.cycles)},
          {"p", io::num(r.p)},
          {"one_sided_level", io::num(1.0 - alpha / 2.0)},
          {"crossing_stress", io::num(r.crossing_stress)},
          {"strength_qf_lower", io::num(r.strength_lower)},
          {"life_qf_lower_at_strength", io::num(r.life_lower_at_strength)},
          {"relative_stress_gap", io::num(r.relative_stress_gap)},
          {"relative_cycles_gap", io::num(r.relative_cycles_gap)},
          {"found", r.found},
          {"consistent", r.consistent},
          {"note", r.note}};
}

}  // namespace detail

inline int cmd_fit(const Options& opt, std::ostream& out, std::ostream& log) {
  auto l = detail::load_and_fit(opt, log);
  auto& c = l.config;
  json j = io::to_json(l.fit);
  j["data"] = {{"rows", l.data.size()}, {"failures", l.data.failure_count()}};
  json intervals = json::array();
  for (const auto& t : c.targets) {
    json e{{"target", io::to_json(t)}};
    for (auto m : detail::methods(c.method)) {
      try {
        if (m == Method::lr) e["lr"] = io::to_json(lr_interval(l.fit, l.data, t, c.alpha));
        else e["wald"] = io::to_json(wald_interval(l.fit, t, c.alpha), 1.0 - c.alpha);
      } catch (const std::exception& ex) {
        e[std::string(to_string(m))] = {{"error", ex.what()}};
      }
    }
    intervals.push_back(e);
  }
  j["intervals"] = intervals;
  io::write_file_atomic(c.output_dir / "fit.json", detail::dump(j));
  out << "converged: true\nwrote " << (c.output_dir / "fit.json").string() << '\n';
  return ok;
}

inline int cmd_bands(const Options& opt, std::ostream& out, std::ostream& log) {
  auto l = detail::load_and_fit(opt, log);
  auto& c = l.config;
  const auto hash = io::model_hash(l.fit);
  int k = 0;
  for (const auto& req : c.bands) {
    const auto grid = req.grid.empty() ? detail::default_grid(req.family, l.data, req.points) : req.grid;
    for (auto m : detail::methods(c.method)) {
      const auto b = band(l.fit, l.data, req.family, req.fixed, grid, c.alpha, m, opt.threads);
      const std::string stem = "band_" + std::to_string(k) + "_" + std::string(to_string(req.family)) + "_" +
                               std::string(to_string(m));
      io::write_file_atomic(c.output_dir / (stem + ".csv"), io::band_csv(b));
      io::write_file_atomic(c.output_dir / (stem + ".json"), detail::dump(io::to_json(b, hash)));
      std::ostringstream title;
      title << to_string(req.family) << " at " << io::fmt(req.fixed) << ", pointwise "
            << io::fmt(100.0 * b.level) << "% " << (m == Method::lr ? "LR" : "Wald") << " band";
      io::write_file_atomic(c.output_dir / (stem + ".svg"), svg::render_band(b, l.data, title.str()));
      out << "wrote " << stem << " (" << b.size() << " points, " << b.failures << " failed)\n";
    }
    ++k;
  }
  if (c.safe_stress) {
    const auto r = safe_stress(l.fit, l.data, c.safe_stress->cycles, c.safe_stress->p, c.alpha);
    io::write_file_atomic(c.output_dir / "safe_stress.json", detail::dump(detail::safe_stress_json(r, c.alpha)));
    out << "safe stress at " << io::fmt(r.cycles) << " cycles, p=" << io::fmt(r.p) << ": "
        << io::fmt(r.crossing_stress) << " (strength qf lower bound " << io::fmt(r.strength_lower)
        << ", relative gap " << io::fmt(r.relative_stress_gap) << ")\n";
    if (!r.consistent) {
      log << "safe-stress routes disagree: " << r.note << '\n';
      return check_failed;
    }
  }
  return ok;
}

/// Runs every equivalence check applicable to the model's orientation.
inline std::vector<EquivalenceReport> run_equivalence(const FittedModel& fit, const SNDataset& data,
                                                      const EquivSettings& s, double alpha, unsigned threads = 1) {
  const auto sr = detail::stress_range(data);
  double fail_lo = std::numeric_limits<double>::infinity(), fail_hi = 0.0;
  for (const auto& o : data.observations)
    if (o.status == Status::failure) { fail_lo = std::min(fail_lo, o.cycles); fail_hi = std::max(fail_hi, o.cycles); }
  const double s_e = s.stress.value_or(std::sqrt(sr.lo * sr.hi));
  const double n_e = s.cycles.value_or(std::sqrt(fail_lo * fail_hi));
  const auto gp = probit_grid(0.01, 0.99, s.points);
  const auto gs = log_grid(sr.lo, sr.hi, s.points);
  std::vector<EquivalenceReport> out;
  out.push_back(check_cdf_qf_equivalence(fit, data, Variable::life, s_e, alpha, gp, s.tolerance));
  out.push_back(check_cdf_qf_equivalence(fit, data, Variable::strength, n_e, alpha, gp, s.tolerance));
  for (double p : s.p_values) out.push_back(check_life_strength_qf_equivalence(fit, data, p, alpha, gs, s.tolerance));

  // Transposition of whole bands on finer grids.
  const std::size_t m = s.transpose_points;
  const auto& cyc_dom = fit.spec.cycles_domain();
  auto clamp_cycles = [&](double lo, double hi) {
    if (cyc_dom) { lo = std::max(lo, cyc_dom->lo); hi = std::min(hi, cyc_dom->hi); }
    return std::pair{lo, hi};
  };
  auto span_of = [](const ConfidenceBand& b) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b.lower_kind[i] == BoundKind::finite) lo = std::min(lo, b.lowers[i]);
      if (b.upper_kind[i] == BoundKind::finite) hi = std::max(hi, b.uppers[i]);
    }
    return std::pair{lo, hi};
  };
  {
    const auto q = band(fit, data, BandFamily::life_qf, s_e, probit_grid(0.01, 0.99, m), alpha, Method::lr, threads);
    auto [lo, hi] = span_of(q);
    std::tie(lo, hi) = clamp_cycles(lo, hi);
    const auto cdf = band(fit, data, BandFamily::life_cdf, s_e, log_grid(lo, hi, m), alpha, Method::lr, threads);
    out.push_back(check_inverse_band_transpose(cdf, q, s.tolerance));
  }
  {
    const auto q = band(fit, data, BandFamily::strength_qf, n_e, probit_grid(0.01, 0.99, m), alpha, Method::lr,
                        threads);
    auto [lo, hi] = span_of(q);
    lo = std::max(lo, fit.spec.stress_domain().lo);
    hi = std::min(hi, fit.spec.stress_domain().hi);
    const auto cdf = band(fit, data, BandFamily::strength_cdf, n_e, log_grid(lo, hi, m), alpha, Method::lr, threads);
    out.push_back(check_inverse_band_transpose(cdf, q, s.tolerance));
  }
  for (double p : s.p_values) {
    const auto life = band(fit, data, BandFamily::life_qf_vs_stress, p, log_grid(sr.lo, sr.hi, m), alpha,
                           Method::lr, threads);
    auto [lo, hi] = span_of(life);
    std::tie(lo, hi) = clamp_cycles(lo, hi);
    const auto str = band(fit, data, BandFamily::strength_qf_vs_cycles, p, log_grid(lo, hi, m), alpha, Method::lr,
                          threads);
    out.push_back(check_inverse_band_transpose(life, str, s.tolerance));
  }
  return out;
}

inline int cmd_equiv(const Options& opt, std::ostream& out, std::ostream& log) {
  const auto c0 = load_config(opt);
  if (c0.method == "wald") {
    out << "refused: the bands of a function and of its inverse are exact transposes only for "
           "likelihood-ratio bands; Wald bands agree only approximately. Use --method lr.\n";
    return refused;
  }
  auto l = detail::load_and_fit(opt, log);
  auto& c = l.config;
  const auto reps = run_equivalence(l.fit, l.data, c.equiv, c.alpha, opt.threads);
  json j{{"model_hash", io::model_hash(l.fit)}, {"level", io::num(1.0 - c.alpha)}, {"checks", json::array()}};
  bool all = true;
  for (const auto& r : reps) {
    j["checks"].push_back(io::to_json(r));
    all = all && r.pass;
    out << to_string(r.id) << ' ' << r.subject << ": max discrepancy " << io::fmt(r.max_discrepancy) << " ("
        << r.scale << ", " << r.points_checked << " points) " << (r.pass ? "PASS" : "FAIL") << '\n';
  }
  if (c.method == "both") {
    // Wald transposition recorded for comparison; not a pass criterion.
    const auto s_e = c.equiv.stress.value_or(std::sqrt(detail::stress_range(l.data).lo * detail::stress_range(l.data).hi));
    const auto gp = probit_grid(0.01, 0.99, c.equiv.transpose_points);
    const auto q = band(l.fit, l.data, BandFamily::life_qf, s_e, gp, c.alpha, Method::wald, opt.threads);
    std::vector<double> tg;
    for (double e : q.estimates) tg.push_back(e);
    const auto cdf = band(l.fit, l.data, BandFamily::life_cdf, s_e, tg, c.alpha, Method::wald, opt.threads);
    auto r = check_inverse_band_transpose(cdf, q, c.equiv.tolerance);
    j["wald_reference"] = io::to_json(r);
    out << "wald reference (not a criterion): max discrepancy " << io::fmt(r.max_discrepancy) << '\n';
  }
  j["all_pass"] = all;
  io::write_file_atomic(c.output_dir / "equivalence.json", detail::dump(j));
  return all ? ok : check_failed;
}

inline int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& log) {
  const auto c = load_config(opt);
  if (!c.simulation) throw ParseError("config: missing 'simulation'");
  auto design = io::sim_design_from_json(*c.simulation, *c.model);
  if (opt.seed) design.seed = *opt.seed;
  if (!c.simulation->contains("target")) throw ParseError("simulation: missing 'target'");
  const auto target = io::target_from_json((*c.simulation)["target"]);
  CoverageOptions co;
  co.threads = opt.threads;
  co.progress = [&](std::size_t done, std::size_t total) {
    if (done % 100 == 0 || done == total) log << "replicates " << done << "/" << total << '\n';
  };
  const auto rep = coverage_study(design, target, c.alpha, co);
  json j = io::to_json(rep);
  j["seed"] = design.seed;
  io::write_file_atomic(c.output_dir / "coverage.json", detail::dump(j));
  io::write_file_atomic(c.output_dir / "coverage.csv", io::coverage_csv(rep));
  out << "LR coverage " << io::fmt(rep.lr_coverage) << " (mc stderr " << io::fmt(rep.mc_stderr) << "), Wald coverage "
      << io::fmt(rep.wald_coverage) << ", " << rep.used << "/" << rep.replicates << " replicates used\n";
  return ok;
}

/// Dispatches a command and maps failures onto exit codes.
inline int run(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    if (opt.command == "fit") return cmd_fit(opt, out, err);
    if (opt.command == "bands") return cmd_bands(opt, out, err);
    if (opt.command == "equiv") return cmd_equiv(opt, out, err);
    if (opt.command == "simulate") return cmd_simulate(opt, out, err);
    err << "unknown command '" << opt.command << "'\n";
    return bad_input;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const OptimizationError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& t : e.trace()) err << "  " << t << '\n';
    return not_converged;
  } catch (const DegenerateDataError& e) {
    err << "error: " << e.what() << '\n';
    return not_converged;
  } catch (const UnsupportedError& e) {
    err << "refused: " << e.what() << '\n';
    return refused;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return check_failed;
  }
}

}  // namespace snlr::cli
