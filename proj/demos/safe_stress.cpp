// Largest stress at which no more than a fraction p of units is expected to
// fail by a required life, with one-sided 95% confidence. Simulates a data
// set, then answers the question two ways: the crossing of the upper cdf
// bound with p, and the lower bound on the strength quantile.

#include <cstdio>

#include "snlr/bands.hpp"
#include "snlr/coverage.hpp"

using namespace snlr;

int main() {
  const ModelSpec spec(Orientation::life_specified, ErrorFamily::sev, CurveFamily(CurveKind::loglinear),
                       {50.0, 400.0}, Interval{1e3, 1e8});
  const SimDesign design{spec, ParamVector{{34.0, -4.0}, 0.35}, {{120.0, 9}, {160.0, 9}, {220.0, 9}}, 5e5, 1, 17, {}};
  const auto data = simulate_dataset(design, 0);
  const auto fit = fit_ml(spec, data);
  std::printf("%zu units, %zu runouts at %.0f cycles\n", data.size(), data.size() - data.failure_count(),
              design.censor_time);

  const double alpha = 0.10, p = 0.10;
  for (double n_e : {1e5, 5e5, 2e6}) {
    const auto r = safe_stress(fit, data, n_e, p, alpha);
    if (!r.found) {
      std::printf("N=%.0e: %s\n", n_e, r.note.c_str());
      continue;
    }
    std::printf("N=%.0e: upper cdf bound crosses %.2f at S=%.4f; strength quantile lower bound %.4f; "
                "life bound there %.1f (%s)\n",
                n_e, p, r.crossing_stress, r.strength_lower, r.life_lower_at_strength,
                r.consistent ? "routes agree" : "routes disagree");
  }
}
