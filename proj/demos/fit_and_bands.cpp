// Fits a censored S-N model to a CSV and prints LR and Wald intervals for a
// few quantities, then writes an SVG of the life cdf band at one stress.
//
//   demo_fit_and_bands <data.csv> [stress] [out.svg]

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "snlr/bands.hpp"
#include "snlr/io.hpp"
#include "snlr/svg.hpp"

using namespace snlr;

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s data.csv [stress] [out.svg]\n", argv[0]);
    return 2;
  }
  const auto data = io::read_dataset_csv(argv[1]);
  double lo = INFINITY, hi = 0.0, tmin = INFINITY, tmax = 0.0;
  for (const auto& o : data.observations) {
    lo = std::min(lo, o.stress);
    hi = std::max(hi, o.stress);
    tmin = std::min(tmin, o.cycles);
    tmax = std::max(tmax, o.cycles);
  }
  const double stress = argc > 2 ? std::stod(argv[2]) : std::sqrt(lo * hi);
  const ModelSpec spec(Orientation::life_specified, ErrorFamily::normal, CurveFamily(CurveKind::loglinear),
                       {0.5 * lo, 2.0 * hi}, Interval{0.1 * tmin, 10.0 * tmax});
  const auto fit = fit_ml(spec, data);
  std::printf("%zu rows, %zu failures; loglik %.6f\n", data.size(), data.failure_count(), fit.loglik_hat);
  std::printf("beta0 %.5f  beta1 %.5f  sigma %.5f\n\n", fit.theta_hat.beta[0], fit.theta_hat.beta[1],
              fit.theta_hat.sigma);

  const double alpha = 0.10;
  std::printf("%-28s %12s %25s %25s\n", "quantity", "estimate", "LR 90%", "Wald 90%");
  auto row = [&](const char* name, const ScalarTarget& t) {
    const auto lr = lr_interval(fit, data, t, alpha);
    const auto w = wald_interval(fit, t, alpha);
    std::printf("%-28s %12.6g   [%10.6g, %10.6g]   [%10.6g, %10.6g]\n", name, lr.estimate, lr.lower.value,
                lr.upper.value, w.lower, w.upper);
  };
  char buf[64];
  std::snprintf(buf, sizeof buf, "t_0.10 at S=%.4g", stress);
  row(buf, ScalarTarget::life_quantile(0.10, stress));
  std::snprintf(buf, sizeof buf, "t_0.50 at S=%.4g", stress);
  row(buf, ScalarTarget::life_quantile(0.50, stress));
  row("sigma", ScalarTarget::parameter(2));
  row("slope", ScalarTarget::parameter(1));

  const auto b = band(fit, data, BandFamily::life_cdf, stress, log_grid(tmin, tmax, 31), alpha);
  const std::string out = argc > 3 ? argv[3] : "life_cdf_band.svg";
  std::ofstream(out) << svg::render_band(b, data, "life cdf with pointwise 90% LR band");
  std::printf("\nwrote %s (%zu points, %zu failed)\n", out.c_str(), b.size(), b.failures);
}
