#pragma once

// Monte Carlo generation of censored stress-life data under a known model,
// and coverage comparison of LR and Wald intervals.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "snlr/errors.hpp"
#include "snlr/likelihood.hpp"
#include "snlr/lr_interval.hpp"
#include "snlr/models.hpp"

namespace snlr {

struct StressAllocation {
  double stress = 0.0;
  std::size_t count = 0;
};

struct SimDesign {
  ModelSpec spec;
  ParamVector theta_true;
  std::vector<StressAllocation> levels;
  double censor_time = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  FitOptions fit{};

  std::size_t units_per_replicate() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.count;
    return n;
  }

  void validate() const {
    spec.require_admissible(theta_true);
    if (levels.empty() || units_per_replicate() == 0)
      throw DomainError("design needs at least one unit");
    for (const auto& l : levels) spec.require_stress(l.stress);
    if (!(censor_time > 0.0) || !std::isfinite(censor_time))
      throw DomainError("censor time must be positive and finite");
    if (spec.cycles_domain() && spec.orientation() == Orientation::strength_specified &&
        !spec.cycles_domain()->contains(censor_time))
      throw DomainError("censor time outside the cycles working domain");
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform on (0,1) from the top 53 bits; never 0 or 1.
inline double open_uniform(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Per-replicate generator seeded from (seed, replicate index) only, so the
/// stream does not depend on execution order.
inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::size_t replicate) {
  return std::mt19937_64(detail::splitmix64(seed ^ detail::splitmix64(replicate + 1)));
}

/// Draws log N = location + sigma*eps exactly (inverse-cdf sampling), then
/// right-censors at the design's censor time.
inline SNDataset simulate_dataset(const SimDesign& design, std::size_t replicate) {
  design.validate();
  auto rng = replicate_rng(design.seed, replicate);
  const auto& spec = design.spec;
  SNDataset ds;
  std::ostringstream label;
  label << "replicate " << replicate;
  ds.label = label.str();
  for (const auto& lvl : design.levels) {
    for (std::size_t u = 0; u < lvl.count; ++u) {
      const double p = detail::open_uniform(rng);
      double n;
      try {
        n = life_quantile(spec, design.theta_true, p, lvl.stress);
      } catch (const RangeError&) {
        // Strength-specified: the draw falls off the cycles domain.
        n = p > 0.5 ? std::numeric_limits<double>::infinity() : spec.cycles_domain()->lo;
      }
      SNObservation o{lvl.stress, n, Status::failure};
      if (n > design.censor_time) {
        o.cycles = design.censor_time;
        o.status = Status::runout;
      }
      ds.observations.push_back(o);
    }
  }
  return ds;
}

struct ReplicateOutcome {
  std::size_t replicate = 0;
  bool ok = false;
  std::string error;
  double lr_lower = 0.0, lr_upper = 0.0;
  double wald_lower = 0.0, wald_upper = 0.0;
  bool lr_covered = false;
  bool wald_covered = false;
};

struct CoverageReport {
  ScalarTarget target;
  double nominal = 0.0;
  double truth = 0.0;
  double lr_coverage = 0.0;
  double wald_coverage = 0.0;
  std::size_t replicates = 0;
  std::size_t used = 0;
  std::size_t replicate_failures = 0;
  double mc_stderr = 0.0;       // of lr_coverage
  double wald_mc_stderr = 0.0;
  std::vector<ReplicateOutcome> outcomes;
};

struct CoverageOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  double max_failure_fraction = 0.10;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

inline ReplicateOutcome run_replicate(const SimDesign& design, const ScalarTarget& target, double alpha,
                                      double truth, std::size_t r) {
  ReplicateOutcome out;
  out.replicate = r;
  try {
    const auto data = simulate_dataset(design, r);
    const auto fit = fit_ml(design.spec, data, design.fit);
    const auto lr = lr_interval(fit, data, target, alpha);
    if (lr.lower.kind == BoundKind::failed || lr.upper.kind == BoundKind::failed)
      throw OptimizationError("LR endpoint search failed");
    const auto w = wald_interval(fit, target, alpha);
    out.lr_lower = lr.lower.value;
    out.lr_upper = lr.upper.value;
    out.wald_lower = w.lower;
    out.wald_upper = w.upper;
    out.lr_covered = out.lr_lower <= truth && truth <= out.lr_upper;
    out.wald_covered = out.wald_lower <= truth && truth <= out.wald_upper;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

/// Simulate, fit, and record whether the LR and Wald intervals cover the
/// true target value. Failed replicates are excluded and counted.
inline CoverageReport coverage_study(const SimDesign& design, const ScalarTarget& target, double alpha,
                                     const CoverageOptions& opt = {}) {
  design.validate();
  target.validate(design.spec);
  if (design.replicates == 0) throw DomainError("design needs at least one replicate");
  CoverageReport rep;
  rep.target = target;
  rep.nominal = 1.0 - alpha;
  rep.truth = evaluate_reported(design.spec, design.theta_true, target);
  rep.replicates = design.replicates;
  rep.outcomes.resize(design.replicates);

  unsigned nthreads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, design.replicates));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= design.replicates) return;
      rep.outcomes[r] = run_replicate(design, target, alpha, rep.truth, r);
      const auto d = done.fetch_add(1) + 1;
      if (opt.progress) {
        std::lock_guard lk(progress_mu);
        opt.progress(d, design.replicates);
      }
    }
  };
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  }

  std::size_t lr_hits = 0, wald_hits = 0;
  for (const auto& o : rep.outcomes) {
    if (!o.ok) { ++rep.replicate_failures; continue; }
    ++rep.used;
    lr_hits += o.lr_covered;
    wald_hits += o.wald_covered;
  }
  if (static_cast<double>(rep.replicate_failures) >
      opt.max_failure_fraction * static_cast<double>(design.replicates)) {
    std::vector<std::string> trace;
    for (const auto& o : rep.outcomes)
      if (!o.ok) trace.push_back("replicate " + std::to_string(o.replicate) + ": " + o.error);
    throw OptimizationError("coverage study aborted: too many replicate failures", trace);
  }
  const double used = static_cast<double>(rep.used);
  rep.lr_coverage = rep.used ? static_cast<double>(lr_hits) / used : 0.0;
  rep.wald_coverage = rep.used ? static_cast<double>(wald_hits) / used : 0.0;
  rep.mc_stderr = rep.used ? std::sqrt(rep.lr_coverage * (1.0 - rep.lr_coverage) / used) : 0.0;
  rep.wald_mc_stderr = rep.used ? std::sqrt(rep.wald_coverage * (1.0 - rep.wald_coverage) / used) : 0.0;
  return rep;
}

}  // namespace snlr
