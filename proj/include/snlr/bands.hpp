#pragma once

// Pointwise confidence bands for the fatigue-life and fatigue-strength cdfs
// and quantile functions, and checks that mutually inverse LR bands are
// transposes of one another.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "snlr/dist.hpp"
#include "snlr/errors.hpp"
#include "snlr/likelihood.hpp"
#include "snlr/lr_interval.hpp"
#include "snlr/models.hpp"

namespace snlr {

enum class BandFamily {
  life_cdf,               // F_N(t; S_e) over t, S_e fixed
  life_qf,                // t_p(S_e) over p, S_e fixed
  life_qf_vs_stress,      // t_p(S) over S, p fixed
  strength_cdf,           // F_X(x; N_e) over x, N_e fixed
  strength_qf,            // x_p(N_e) over p, N_e fixed
  strength_qf_vs_cycles,  // x_p(N) over N, p fixed
};

enum class Method { lr, wald };

inline std::string_view to_string(BandFamily f) {
  switch (f) {
    case BandFamily::life_cdf: return "life-cdf";
    case BandFamily::life_qf: return "life-qf";
    case BandFamily::life_qf_vs_stress: return "life-qf-vs-stress";
    case BandFamily::strength_cdf: return "strength-cdf";
    case BandFamily::strength_qf: return "strength-qf";
    case BandFamily::strength_qf_vs_cycles: return "strength-qf-vs-cycles";
  }
  return "?";
}

inline BandFamily parse_band_family(std::string_view s) {
  for (auto f : {BandFamily::life_cdf, BandFamily::life_qf, BandFamily::life_qf_vs_stress,
                 BandFamily::strength_cdf, BandFamily::strength_qf, BandFamily::strength_qf_vs_cycles})
    if (to_string(f) == s) return f;
  throw DomainError("unknown band family '" + std::string(s) + "'");
}

inline std::string_view to_string(Method m) { return m == Method::lr ? "lr" : "wald"; }

inline Method parse_method(std::string_view s) {
  if (s == "lr" || s == "LR") return Method::lr;
  if (s == "wald" || s == "Wald") return Method::wald;
  throw DomainError("unknown method '" + std::string(s) + "'");
}

inline bool is_cdf_family(BandFamily f) {
  return f == BandFamily::life_cdf || f == BandFamily::strength_cdf;
}

/// Target at one abscissa of a band family. `fixed` is S_e, N_e or p.
inline ScalarTarget band_target(BandFamily f, double fixed, double x) {
  switch (f) {
    case BandFamily::life_cdf: return ScalarTarget::life_cdf(x, fixed);
    case BandFamily::life_qf: return ScalarTarget::life_quantile(x, fixed);
    case BandFamily::life_qf_vs_stress: return ScalarTarget::life_quantile(fixed, x);
    case BandFamily::strength_cdf: return ScalarTarget::strength_cdf(x, fixed);
    case BandFamily::strength_qf: return ScalarTarget::strength_quantile(x, fixed);
    case BandFamily::strength_qf_vs_cycles: return ScalarTarget::strength_quantile(fixed, x);
  }
  return {};
}

struct ConfidenceBand {
  BandFamily family = BandFamily::life_cdf;
  double fixed = 0.0;
  double level = 0.0;
  Method method = Method::lr;
  std::vector<double> grid;
  std::vector<double> estimates;
  std::vector<double> lowers;
  std::vector<double> uppers;
  std::vector<BoundKind> lower_kind;
  std::vector<BoundKind> upper_kind;
  std::size_t failures = 0;
  std::vector<std::string> diagnostics;

  std::size_t size() const noexcept { return grid.size(); }
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
}

/// Pointwise band: one LR (or Wald) interval per grid abscissa.
inline ConfidenceBand band(const FittedModel& fit, const SNDataset& data, BandFamily family, double fixed,
                           std::span<const double> grid, double alpha, Method method = Method::lr,
                           unsigned threads = 1) {
  if (!fit.converged) throw PreconditionError("fitted model did not converge");
  if (!std::is_sorted(grid.begin(), grid.end())) throw PreconditionError("band grid must be sorted");
  ConfidenceBand b;
  b.family = family;
  b.fixed = fixed;
  b.level = 1.0 - alpha;
  b.method = method;
  b.grid.assign(grid.begin(), grid.end());
  const std::size_t n = grid.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  b.estimates.assign(n, nan);
  b.lowers.assign(n, nan);
  b.uppers.assign(n, nan);
  b.lower_kind.assign(n, BoundKind::failed);
  b.upper_kind.assign(n, BoundKind::failed);
  std::vector<std::string> notes(n);

  parallel_for(n, threads, [&](std::size_t i) {
    try {
      const auto t = band_target(family, fixed, grid[i]);
      if (method == Method::lr) {
        const auto iv = lr_interval(fit, data, t, alpha);
        b.estimates[i] = iv.estimate;
        b.lowers[i] = iv.lower.value;
        b.uppers[i] = iv.upper.value;
        b.lower_kind[i] = iv.lower.kind;
        b.upper_kind[i] = iv.upper.kind;
        for (const auto& w : iv.warnings) notes[i] += w + "; ";
        if (!iv.lower.note.empty()) notes[i] += "lower: " + iv.lower.note + "; ";
        if (!iv.upper.note.empty()) notes[i] += "upper: " + iv.upper.note + "; ";
      } else {
        const auto w = wald_interval(fit, t, alpha);
        b.estimates[i] = w.estimate;
        b.lowers[i] = w.lower;
        b.uppers[i] = w.upper;
        b.lower_kind[i] = b.upper_kind[i] = BoundKind::finite;
      }
    } catch (const std::exception& e) {
      notes[i] = std::string("point failed: ") + e.what();
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (b.lower_kind[i] == BoundKind::failed || b.upper_kind[i] == BoundKind::failed) ++b.failures;
    if (!notes[i].empty()) {
      std::ostringstream os;
      os << "grid[" << i << "]=" << grid[i] << ": " << notes[i];
      b.diagnostics.push_back(os.str());
    }
  }
  return b;
}

/// n points equispaced on the probit scale over [lo, hi].
inline std::vector<double> probit_grid(double lo, double hi, std::size_t n) {
  const double a = std_quantile(ErrorFamily::normal, lo), c = std_quantile(ErrorFamily::normal, hi);
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
    g[i] = std_cdf(ErrorFamily::normal, a + w * (c - a));
  }
  return g;
}

/// n points equispaced on the log scale over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  const double a = std::log(lo), c = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
    g[i] = std::exp(a + w * (c - a));
  }
  if (n > 1) { g.front() = lo; g.back() = hi; }
  return g;
}

// ---------------------------------------------------------------------------
// Equivalence checks

enum class ResultId { R1, R2, R3, R4, R5, R6 };

inline std::string_view to_string(ResultId r) {
  static constexpr std::string_view names[] = {"R1", "R2", "R3", "R4", "R5", "R6"};
  return names[static_cast<int>(r)];
}

struct EquivalenceReport {
  ResultId id = ResultId::R1;
  std::string subject;
  std::string scale;  // "probability" or "relative"
  double max_discrepancy = 0.0;
  double tolerance = 1e-3;
  std::size_t points_checked = 0;
  std::size_t points_skipped = 0;
  bool pass = false;
  std::vector<double> grid;
  std::vector<std::string> notes;

  void finish() { pass = points_checked > 0 && max_discrepancy <= tolerance; }
};

enum class Variable { life, strength };

namespace detail {

inline void require_lr(Method m) {
  if (m != Method::lr)
    throw UnsupportedError(
        "equivalence of transposed bands holds exactly only for likelihood-ratio bands; "
        "Wald bands are approximate");
}

inline double probit(double p) {
  return std_quantile(ErrorFamily::normal, std::clamp(p, 1e-300, 1.0 - 1e-16));
}

// Piecewise-linear interpolation of y(x) given sorted xs; NaN outside.
inline double interp(std::span<const double> xs, std::span<const double> ys, double x) {
  const std::size_t n = xs.size();
  if (n < 2 || !(x >= xs.front() && x <= xs.back())) return std::numeric_limits<double>::quiet_NaN();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t j = static_cast<std::size_t>(it - xs.begin());
  if (j >= n) j = n - 1;
  const std::size_t i = j - 1;
  const double w = xs[j] == xs[i] ? 0.0 : (x - xs[i]) / (xs[j] - xs[i]);
  return ys[i] + w * (ys[j] - ys[i]);
}

// Inverse interpolation: x such that y(x) = y0 on the first bracketing
// segment of a monotone sequence; NaN when y0 is not bracketed.
inline double inverse_interp(std::span<const double> xs, std::span<const double> ys, double y0) {
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = ys[i], b = ys[i + 1];
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    if ((a <= y0 && y0 <= b) || (b <= y0 && y0 <= a)) {
      const double w = a == b ? 0.0 : (y0 - a) / (b - a);
      return xs[i] + w * (xs[i + 1] - xs[i]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline ResultId cdf_qf_result(Orientation o, Variable v) {
  if (o == Orientation::life_specified) return ResultId::R2;
  return v == Variable::strength ? ResultId::R4 : ResultId::R5;
}

}  // namespace detail

/// cdf/qf band equivalence at a fixed S_e (life) or N_e (strength): the
/// upper cdf bound evaluated at the lower quantile bound returns p, and the
/// lower cdf bound at the upper quantile bound returns p.
inline EquivalenceReport check_cdf_qf_equivalence(const FittedModel& fit, const SNDataset& data, Variable var,
                                                  double at, double alpha, std::span<const double> grid_p,
                                                  double tol = 1e-3, Method method = Method::lr) {
  detail::require_lr(method);
  EquivalenceReport rep;
  rep.id = detail::cdf_qf_result(fit.spec.orientation(), var);
  rep.subject = var == Variable::life ? "life cdf/qf" : "strength cdf/qf";
  rep.scale = "probability";
  rep.tolerance = tol;
  rep.grid.assign(grid_p.begin(), grid_p.end());
  for (double p : grid_p) {
    const auto qt = var == Variable::life ? ScalarTarget::life_quantile(p, at)
                                          : ScalarTarget::strength_quantile(p, at);
    LRInterval q;
    try {
      q = lr_interval(fit, data, qt, alpha);
    } catch (const std::exception& e) {
      ++rep.points_skipped;
      rep.notes.push_back("p=" + std::to_string(p) + ": " + e.what());
      continue;
    }
    auto check = [&](const Endpoint& e, Side side) {
      if (e.kind != BoundKind::finite) {
        ++rep.points_skipped;
        return;
      }
      const auto ct = var == Variable::life ? ScalarTarget::life_cdf(e.value, at)
                                            : ScalarTarget::strength_cdf(e.value, at);
      try {
        const auto b = lr_bound(fit, data, ct, alpha, side);
        if (b.kind != BoundKind::finite) {
          ++rep.points_skipped;
          return;
        }
        rep.max_discrepancy = std::max(rep.max_discrepancy, std::fabs(b.value - p));
        ++rep.points_checked;
      } catch (const DomainError&) {
        ++rep.points_skipped;  // transposed abscissa off the working domain
      }
    };
    check(q.lower, Side::upper);
    check(q.upper, Side::lower);
  }
  rep.finish();
  return rep;
}

/// Life-qf versus strength-qf band equivalence at fixed p: the strength
/// quantile bound at N_e = (life quantile bound at S_e) returns S_e.
inline EquivalenceReport check_life_strength_qf_equivalence(const FittedModel& fit, const SNDataset& data,
                                                            double p, double alpha,
                                                            std::span<const double> grid_s,
                                                            double tol = 1e-3, Method method = Method::lr) {
  detail::require_lr(method);
  EquivalenceReport rep;
  rep.id = fit.spec.orientation() == Orientation::life_specified ? ResultId::R3 : ResultId::R6;
  rep.subject = "life qf vs strength qf";
  rep.scale = "relative";
  rep.tolerance = tol;
  rep.grid.assign(grid_s.begin(), grid_s.end());
  for (double s : grid_s) {
    LRInterval life;
    try {
      life = lr_interval(fit, data, ScalarTarget::life_quantile(p, s), alpha);
    } catch (const std::exception& e) {
      ++rep.points_skipped;
      rep.notes.push_back("S=" + std::to_string(s) + ": " + e.what());
      continue;
    }
    auto check = [&](const Endpoint& e, Side side) {
      if (e.kind != BoundKind::finite) {
        ++rep.points_skipped;
        return;
      }
      try {
        const auto b = lr_bound(fit, data, ScalarTarget::strength_quantile(p, e.value), alpha, side);
        if (b.kind != BoundKind::finite) {
          ++rep.points_skipped;
          return;
        }
        rep.max_discrepancy = std::max(rep.max_discrepancy, std::fabs(b.value - s) / s);
        ++rep.points_checked;
      } catch (const DomainError&) {
        ++rep.points_skipped;
      }
    };
    check(life.lower, Side::lower);
    check(life.upper, Side::upper);
  }
  rep.finish();
  return rep;
}

namespace detail {

enum class PairKind { cdf_qf, qf_vs_argument };

struct BandView {
  std::vector<double> x, lo, hi;  // transformed coordinates, finite points only
};

// Transformed coordinates: log abscissa/ordinate for stress and cycles,
// probit for probabilities.
inline BandView view(const ConfidenceBand& b) {
  BandView v;
  auto tx = [&](double x) {
    return (b.family == BandFamily::life_qf || b.family == BandFamily::strength_qf) ? probit(x) : std::log(x);
  };
  auto ty = [&](double y) { return is_cdf_family(b.family) ? probit(y) : std::log(y); };
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.lower_kind[i] != BoundKind::finite || b.upper_kind[i] != BoundKind::finite) continue;
    v.x.push_back(tx(b.grid[i]));
    v.lo.push_back(ty(b.lowers[i]));
    v.hi.push_back(ty(b.uppers[i]));
  }
  return v;
}

}  // namespace detail

/// General transposition check for two bands of mutually inverse monotone
/// functions: each transposed endpoint of one band must lie on the matching
/// envelope of the other (interpolated between grid points).
inline EquivalenceReport check_inverse_band_transpose(const ConfidenceBand& band_v, const ConfidenceBand& band_w,
                                                      double tol = 1e-3) {
  using detail::PairKind;
  auto compatible = [](BandFamily a, BandFamily b) {
    auto pair = [&](BandFamily x, BandFamily y) { return (a == x && b == y) || (a == y && b == x); };
    if (pair(BandFamily::life_cdf, BandFamily::life_qf)) return 1;
    if (pair(BandFamily::strength_cdf, BandFamily::strength_qf)) return 1;
    if (pair(BandFamily::life_qf_vs_stress, BandFamily::strength_qf_vs_cycles)) return 2;
    return 0;
  };
  const int kind = compatible(band_v.family, band_w.family);
  if (kind == 0) throw PreconditionError("bands are not of mutually inverse families");
  if (std::fabs(band_v.level - band_w.level) > 1e-12 || band_v.method != band_w.method)
    throw PreconditionError("bands differ in level or method");
  if (kind == 1 && band_v.fixed != band_w.fixed)
    throw PreconditionError("cdf and qf bands are at different fixed stress/cycles");
  if (kind == 2 && std::fabs(band_v.fixed - band_w.fixed) > 1e-15)
    throw PreconditionError("quantile bands are at different p");

  EquivalenceReport rep;
  rep.id = ResultId::R1;
  rep.tolerance = tol;
  rep.subject = std::string(to_string(band_v.family)) + " vs " + std::string(to_string(band_w.family));
  rep.grid = band_v.grid;

  if (kind == 1) {
    rep.scale = "probability";
    const ConfidenceBand& c = is_cdf_family(band_v.family) ? band_v : band_w;
    const ConfidenceBand& q = is_cdf_family(band_v.family) ? band_w : band_v;
    const auto cv = detail::view(c);  // x = log t, y = probit F
    const auto qv = detail::view(q);  // x = probit p, y = log t
    auto note = [&](double d) {
      if (std::isnan(d)) { ++rep.points_skipped; return; }
      rep.max_discrepancy = std::max(rep.max_discrepancy, d);
      ++rep.points_checked;
    };
    auto pdiff = [](double probit_a, double b_prob) {
      return std::isnan(probit_a) ? probit_a : std::fabs(std_cdf(ErrorFamily::normal, probit_a) - b_prob);
    };
    // cdf points transposed onto the qf envelope.
    for (std::size_t i = 0; i < cv.x.size(); ++i) {
      note(pdiff(detail::inverse_interp(qv.x, qv.lo, cv.x[i]), std_cdf(ErrorFamily::normal, cv.hi[i])));
      note(pdiff(detail::inverse_interp(qv.x, qv.hi, cv.x[i]), std_cdf(ErrorFamily::normal, cv.lo[i])));
    }
    // qf points transposed onto the cdf envelope.
    for (std::size_t j = 0; j < qv.x.size(); ++j) {
      note(pdiff(detail::interp(cv.x, cv.hi, qv.lo[j]), std_cdf(ErrorFamily::normal, qv.x[j])));
      note(pdiff(detail::interp(cv.x, cv.lo, qv.hi[j]), std_cdf(ErrorFamily::normal, qv.x[j])));
    }
  } else {
    rep.scale = "relative";
    const ConfidenceBand& l = band_v.family == BandFamily::life_qf_vs_stress ? band_v : band_w;
    const ConfidenceBand& s = band_v.family == BandFamily::life_qf_vs_stress ? band_w : band_v;
    const auto lv = detail::view(l);  // x = log S, y = log t
    const auto sv = detail::view(s);  // x = log N, y = log x
    auto note = [&](double log_a, double log_b) {
      if (std::isnan(log_a)) { ++rep.points_skipped; return; }
      rep.max_discrepancy = std::max(rep.max_discrepancy, std::fabs(std::expm1(log_a - log_b)));
      ++rep.points_checked;
    };
    for (std::size_t i = 0; i < lv.x.size(); ++i) {
      note(detail::interp(sv.x, sv.lo, lv.lo[i]), lv.x[i]);
      note(detail::interp(sv.x, sv.hi, lv.hi[i]), lv.x[i]);
    }
    for (std::size_t j = 0; j < sv.x.size(); ++j) {
      note(detail::inverse_interp(lv.x, lv.lo, sv.x[j]), sv.lo[j]);
      note(detail::inverse_interp(lv.x, lv.hi, sv.x[j]), sv.hi[j]);
    }
  }
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Safe stress at a required life

struct SafeStressResult {
  double cycles = 0.0;  // N_e
  double p = 0.0;
  double crossing_stress = std::numeric_limits<double>::quiet_NaN();  // S with F_upper(N_e; S) = p
  double strength_lower = std::numeric_limits<double>::quiet_NaN();   // lower bound on x_p(N_e)
  double life_lower_at_strength = std::numeric_limits<double>::quiet_NaN();  // lower t_p at that stress
  double relative_stress_gap = std::numeric_limits<double>::quiet_NaN();
  double relative_cycles_gap = std::numeric_limits<double>::quiet_NaN();
  bool found = false;
  bool consistent = false;
  std::string note;
};

/// Stress below which at most a fraction p of units fail by N_e cycles, at
/// confidence 1 - alpha/2. Computed twice: as the crossing of the upper cdf
/// bound with p (searching over stress), and directly as the lower bound on
/// the strength quantile x_p(N_e); the lower life-quantile bound at that
/// stress must then return N_e.
inline SafeStressResult safe_stress(const FittedModel& fit, const SNDataset& data, double cycles, double p,
                                    double alpha, double tol = 1e-3) {
  SafeStressResult r;
  r.cycles = cycles;
  r.p = p;
  const auto& dom = fit.spec.stress_domain();
  auto g = [&](double log_s) {
    const double s = std::clamp(std::exp(log_s), dom.lo, dom.hi);
    const auto e = lr_bound(fit, data, ScalarTarget::life_cdf(cycles, s), alpha, Side::upper);
    if (e.kind == BoundKind::failed) throw OptimizationError("upper cdf bound failed during stress search");
    return e.value - p;
  };
  try {
    double a = dom.log_lo(), b = dom.log_hi();
    const double ga = g(a), gb = g(b);
    if (ga > 0.0 || gb < 0.0) {
      r.note = "upper cdf bound does not cross p inside the stress domain";
    } else {
      std::uintmax_t iters = 100;
      const auto root = boost::math::tools::toms748_solve(g, a, b, ga, gb,
                                                          boost::math::tools::eps_tolerance<double>(40), iters);
      r.crossing_stress = std::exp(0.5 * (root.first + root.second));
      r.found = true;
    }
  } catch (const std::exception& e) {
    r.note = std::string("stress search failed: ") + e.what();
  }
  try {
    const auto e = lr_bound(fit, data, ScalarTarget::strength_quantile(p, cycles), alpha, Side::lower);
    if (e.kind == BoundKind::finite) {
      r.strength_lower = e.value;
      const auto l = lr_bound(fit, data, ScalarTarget::life_quantile(p, e.value), alpha, Side::lower);
      if (l.kind == BoundKind::finite) r.life_lower_at_strength = l.value;
    }
  } catch (const std::exception& e) {
    if (!r.note.empty()) r.note += "; ";
    r.note += std::string("strength route failed: ") + e.what();
  }
  if (r.found && std::isfinite(r.strength_lower))
    r.relative_stress_gap = std::fabs(r.crossing_stress - r.strength_lower) / r.strength_lower;
  if (std::isfinite(r.life_lower_at_strength))
    r.relative_cycles_gap = std::fabs(r.life_lower_at_strength - cycles) / cycles;
  r.consistent = r.relative_stress_gap <= tol && r.relative_cycles_gap <= tol;
  return r;
}

}  // namespace snlr
