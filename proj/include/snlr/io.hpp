#pragma once

// File formats: dataset CSV, model/config JSON, and result serialization.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "snlr/bands.hpp"
#include "snlr/coverage.hpp"
#include "snlr/errors.hpp"
#include "snlr/likelihood.hpp"
#include "snlr/lr_interval.hpp"
#include "snlr/models.hpp"

namespace snlr::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Numbers

/// Nine significant digits, the precision of all emitted numbers.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// JSON value rounded to nine significant digits; null when not finite.
inline json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(fmt(v).c_str(), nullptr);
}

inline json nums(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header `stress,cycles,status`, status 1 = failure, 0 = runout.
// Blank lines and lines starting with '#' are ignored. Row numbers in errors
// count data rows from 1 (header and comments excluded).

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto c = line.find(',', pos);
    out.push_back(trim(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& v) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::string row_message(std::size_t row, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << "row " << row << " (line " << line << "): " << what;
  return os.str();
}

}  // namespace detail

inline SNDataset read_dataset_csv(std::istream& in, std::string label = {}) {
  SNDataset ds;
  ds.label = std::move(label);
  std::string raw;
  std::size_t line_no = 0, row = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line = detail::trim(line.substr(3));
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split(line);
    if (!header) {
      if (f.size() != 3 || f[0] != "stress" || f[1] != "cycles" || f[2] != "status")
        throw ParseError("line " + std::to_string(line_no) + ": expected header 'stress,cycles,status'");
      header = true;
      continue;
    }
    ++row;
    if (f.size() != 3)
      throw ParseError(detail::row_message(row, line_no, "expected 3 fields, found " + std::to_string(f.size())),
                       row);
    SNObservation o;
    if (!detail::parse_double(f[0], o.stress) || !(o.stress > 0.0) || !std::isfinite(o.stress))
      throw ParseError(detail::row_message(row, line_no, "stress must be a positive number"), row);
    if (!detail::parse_double(f[1], o.cycles) || !(o.cycles > 0.0) || !std::isfinite(o.cycles))
      throw ParseError(detail::row_message(row, line_no, "cycles must be a positive number"), row);
    if (f[2] == "1") o.status = Status::failure;
    else if (f[2] == "0") o.status = Status::runout;
    else
      throw ParseError(detail::row_message(row, line_no, "status must be 0 or 1, got '" + std::string(f[2]) + "'"),
                       row);
    ds.observations.push_back(o);
  }
  if (!header) throw ParseError("empty file: no header");
  if (ds.observations.empty()) throw ParseError("no data rows");
  return ds;
}

inline SNDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_dataset_csv(in, path.filename().string());
}

inline std::string dataset_csv(const SNDataset& ds) {
  std::ostringstream os;
  os << "stress,cycles,status\n";
  for (const auto& o : ds.observations)
    os << fmt(o.stress) << ',' << fmt(o.cycles) << ',' << (o.status == Status::failure ? 1 : 0) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// ModelSpec JSON:
// {orientation, error_family, curve:{kind, beta_len}, domain:{stress:[lo,hi],
//  cycles:[lo,hi]}, fixed:[{index, value}]}

namespace detail {

template <typename T>
T get(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string(where) + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string(where) + ": bad value for '" + key + "'");
  }
}

inline Interval interval(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(std::string(where) + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

// Wraps library validation errors raised while building from JSON.
template <typename F>
auto parse_guard(const char* where, F&& f) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string(where) + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const ModelSpec& s) {
  json j;
  j["orientation"] = std::string(to_string(s.orientation()));
  j["error_family"] = std::string(to_string(s.family()));
  j["curve"] = {{"kind", std::string(to_string(s.curve().kind()))}, {"beta_len", s.curve().coefficient_count()}};
  j["domain"]["stress"] = {s.stress_domain().lo, s.stress_domain().hi};
  if (s.cycles_domain()) j["domain"]["cycles"] = {s.cycles_domain()->lo, s.cycles_domain()->hi};
  if (!s.fixed().empty()) {
    j["fixed"] = json::array();
    for (const auto& f : s.fixed()) j["fixed"].push_back({{"index", f.index}, {"value", f.value}});
  }
  return j;
}

inline ModelSpec model_spec_from_json(const json& j) {
  constexpr const char* where = "model";
  return detail::parse_guard(where, [&] {
    const auto orient = parse_orientation(detail::get<std::string>(j, "orientation", where));
    const auto fam = parse_error_family(detail::get<std::string>(j, "error_family", where));
    const auto& c = j.contains("curve") ? j["curve"] : throw ParseError("model: missing 'curve'");
    const auto kind = parse_curve_kind(detail::get<std::string>(c, "kind", "model.curve"));
    const CurveFamily curve(kind);
    if (c.contains("beta_len") && detail::get<std::size_t>(c, "beta_len", "model.curve") != curve.coefficient_count())
      throw ParseError("model.curve: beta_len does not match curve kind");
    const auto& d = j.contains("domain") ? j["domain"] : throw ParseError("model: missing 'domain'");
    if (!d.contains("stress")) throw ParseError("model.domain: missing 'stress'");
    const auto stress = detail::interval(d["stress"], "model.domain.stress");
    std::optional<Interval> cycles;
    if (d.contains("cycles")) cycles = detail::interval(d["cycles"], "model.domain.cycles");
    std::vector<FixedParam> fixed;
    if (j.contains("fixed"))
      for (const auto& f : j["fixed"])
        fixed.push_back({detail::get<std::size_t>(f, "index", "model.fixed"), detail::get<double>(f, "value", "model.fixed")});
    return ModelSpec(orient, fam, curve, stress, cycles, fixed);
  });
}

inline ParamVector param_vector_from_json(const json& j, const ModelSpec& spec) {
  if (!j.is_array() || j.size() != spec.param_count())
    throw ParseError("parameter vector must have " + std::to_string(spec.param_count()) + " entries");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw ParseError("parameter vector entries must be numbers");
    v.push_back(x.get<double>());
  }
  return ParamVector::from_flat(v);
}

// ---------------------------------------------------------------------------
// Targets: {"kind": "life-quantile", "p": .., "stress": ..} etc.

inline json to_json(const ScalarTarget& t) {
  json j{{"kind", std::string(to_string(t.kind))}};
  switch (t.kind) {
    case TargetKind::life_cdf: j["cycles"] = t.arg; j["stress"] = t.at; break;
    case TargetKind::life_quantile: j["p"] = t.arg; j["stress"] = t.at; break;
    case TargetKind::strength_cdf: j["stress"] = t.arg; j["cycles"] = t.at; break;
    case TargetKind::strength_quantile: j["p"] = t.arg; j["cycles"] = t.at; break;
    case TargetKind::raw_parameter: j["index"] = t.index; break;
  }
  if (t.transform == Transform::log) j["transform"] = "log";
  return j;
}

inline ScalarTarget target_from_json(const json& j) {
  constexpr const char* where = "target";
  return detail::parse_guard(where, [&] {
    const auto kind = parse_target_kind(detail::get<std::string>(j, "kind", where));
    auto d = [&](const char* k) { return detail::get<double>(j, k, where); };
    ScalarTarget t;
    switch (kind) {
      case TargetKind::life_cdf: t = ScalarTarget::life_cdf(d("cycles"), d("stress")); break;
      case TargetKind::life_quantile: t = ScalarTarget::life_quantile(d("p"), d("stress")); break;
      case TargetKind::strength_cdf: t = ScalarTarget::strength_cdf(d("stress"), d("cycles")); break;
      case TargetKind::strength_quantile: t = ScalarTarget::strength_quantile(d("p"), d("cycles")); break;
      case TargetKind::raw_parameter:
        t = ScalarTarget::parameter(detail::get<std::size_t>(j, "index", where));
        break;
    }
    if (j.contains("transform")) {
      const auto s = detail::get<std::string>(j, "transform", where);
      if (s == "log") t = t.with_transform(Transform::log);
      else if (s != "identity") throw ParseError("target: unknown transform '" + s + "'");
    }
    return t;
  });
}

// ---------------------------------------------------------------------------
// Results

/// FNV-1a 64-bit digest of the model spec and estimate, hex encoded.
inline std::string model_hash(const FittedModel& fit) {
  json j{{"model", to_json(fit.spec)}, {"theta_hat", json::array()}};
  for (double v : fit.theta_hat.flat()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    j["theta_hat"].push_back(buf);
  }
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline json to_json(const FittedModel& fit) {
  json j;
  j["model"] = to_json(fit.spec);
  j["model_hash"] = model_hash(fit);
  j["converged"] = fit.converged;
  j["theta_hat"] = nums(fit.theta_hat.flat());
  j["loglik"] = num(fit.loglik_hat);
  if (fit.wald_cov.size() > 0) {
    json cov = json::array();
    for (Eigen::Index r = 0; r < fit.wald_cov.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < fit.wald_cov.cols(); ++c) row.push_back(num(fit.wald_cov(r, c)));
      cov.push_back(row);
    }
    j["wald_cov"] = cov;
  } else {
    j["wald_cov"] = nullptr;
    j["wald_note"] = fit.wald_note;
  }
  json starts = json::array();
  for (const auto& s : fit.starts)
    starts.push_back({{"start", nums(s.start)}, {"loglik", num(s.loglik)}, {"converged", s.converged},
                      {"evaluations", s.evaluations}});
  j["diagnostics"] = {{"iterations", fit.iterations}, {"starts", starts}};
  return j;
}

inline json to_json(const Endpoint& e) {
  json j{{"value", num(e.value)}, {"kind", std::string(to_string(e.kind))}};
  if (e.kind != BoundKind::failed) {
    j["loglik"] = num(e.loglik);
    j["constraint_residual"] = num(e.constraint_residual);
    j["witness"] = nums(e.witness);
  }
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

inline json to_json(const LRInterval& iv) {
  json j{{"method", "lr"},
         {"estimate", num(iv.estimate)},
         {"level", num(iv.level)},
         {"cutoff_k", num(iv.cutoff_k)},
         {"lower", to_json(iv.lower)},
         {"upper", to_json(iv.upper)}};
  if (!iv.warnings.empty()) j["warnings"] = iv.warnings;
  return j;
}

inline json to_json(const WaldInterval& w, double level) {
  return {{"method", "wald"}, {"estimate", num(w.estimate)}, {"level", num(level)},
          {"lower", num(w.lower)}, {"upper", num(w.upper)}, {"se_transformed", num(w.se_u)}};
}

/// Band as CSV `abscissa,estimate,lower,upper`; failed points are empty cells.
inline std::string band_csv(const ConfidenceBand& b) {
  std::ostringstream os;
  os << "abscissa,estimate,lower,upper\n";
  auto cell = [](double v) { return std::isfinite(v) ? fmt(v) : std::string(); };
  for (std::size_t i = 0; i < b.size(); ++i) {
    os << fmt(b.grid[i]) << ',' << cell(b.estimates[i]) << ',';
    os << (b.lower_kind[i] == BoundKind::failed ? std::string() : cell(b.lowers[i])) << ',';
    os << (b.upper_kind[i] == BoundKind::failed ? std::string() : cell(b.uppers[i])) << '\n';
  }
  return os.str();
}

inline json to_json(const ConfidenceBand& b, const std::string& hash) {
  json j;
  j["family"] = std::string(to_string(b.family));
  j["fixed"] = num(b.fixed);
  j["level"] = num(b.level);
  j["method"] = std::string(to_string(b.method));
  j["model_hash"] = hash;
  j["abscissa"] = nums(b.grid);
  j["estimate"] = nums(b.estimates);
  j["lower"] = nums(b.lowers);
  j["upper"] = nums(b.uppers);
  json lk = json::array(), uk = json::array();
  for (std::size_t i = 0; i < b.size(); ++i) {
    lk.push_back(std::string(to_string(b.lower_kind[i])));
    uk.push_back(std::string(to_string(b.upper_kind[i])));
  }
  j["lower_kind"] = lk;
  j["upper_kind"] = uk;
  j["failures"] = b.failures;
  j["diagnostics"] = b.diagnostics;
  return j;
}

inline json to_json(const EquivalenceReport& r) {
  return {{"result", std::string(to_string(r.id))},
          {"subject", r.subject},
          {"scale", r.scale},
          {"max_discrepancy", num(r.max_discrepancy)},
          {"tolerance", num(r.tolerance)},
          {"points_checked", r.points_checked},
          {"points_skipped", r.points_skipped},
          {"pass", r.pass},
          {"grid", nums(r.grid)},
          {"notes", r.notes}};
}

// ---------------------------------------------------------------------------
// Simulation design and coverage report

inline SimDesign sim_design_from_json(const json& j, const ModelSpec& spec) {
  constexpr const char* where = "simulation";
  return detail::parse_guard(where, [&] {
    SimDesign d{spec, param_vector_from_json(j.at("theta_true"), spec), {}, 0.0, 0, 0, {}};
    if (!j.contains("levels") || !j["levels"].is_array()) throw ParseError("simulation: missing 'levels'");
    for (const auto& l : j["levels"])
      d.levels.push_back({detail::get<double>(l, "stress", "simulation.levels"),
                          detail::get<std::size_t>(l, "count", "simulation.levels")});
    d.censor_time = detail::get<double>(j, "censor_time", where);
    d.replicates = detail::get<std::size_t>(j, "replicates", where);
    d.seed = j.contains("seed") ? detail::get<std::uint64_t>(j, "seed", where) : 0;
    if (j.contains("fit_starts")) d.fit.starts = detail::get<int>(j, "fit_starts", where);
    return d;
  });
}

inline json to_json(const CoverageReport& r) {
  json j;
  j["target"] = to_json(r.target);
  j["nominal"] = num(r.nominal);
  j["truth"] = num(r.truth);
  j["replicates"] = r.replicates;
  j["used"] = r.used;
  j["replicate_failures"] = r.replicate_failures;
  j["lr_coverage"] = num(r.lr_coverage);
  j["wald_coverage"] = num(r.wald_coverage);
  j["mc_stderr"] = num(r.mc_stderr);
  j["wald_mc_stderr"] = num(r.wald_mc_stderr);
  json ind = json::array();
  for (const auto& o : r.outcomes) {
    json x{{"replicate", o.replicate}, {"ok", o.ok}};
    if (o.ok) {
      x["lr_covered"] = o.lr_covered;
      x["wald_covered"] = o.wald_covered;
    } else {
      x["error"] = o.error;
    }
    ind.push_back(x);
  }
  j["indicators"] = ind;
  return j;
}

/// Per-replicate indicators: replicate,ok,lr_lower,lr_upper,lr_covered,wald_lower,wald_upper,wald_covered
inline std::string coverage_csv(const CoverageReport& r) {
  std::ostringstream os;
  os << "replicate,ok,lr_lower,lr_upper,lr_covered,wald_lower,wald_upper,wald_covered\n";
  for (const auto& o : r.outcomes) {
    os << o.replicate << ',' << (o.ok ? 1 : 0) << ',';
    if (o.ok)
      os << fmt(o.lr_lower) << ',' << fmt(o.lr_upper) << ',' << (o.lr_covered ? 1 : 0) << ',' << fmt(o.wald_lower)
         << ',' << fmt(o.wald_upper) << ',' << (o.wald_covered ? 1 : 0);
    else
      os << ",,,,,";
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.filename().string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace snlr::io
