#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snlr/bands.hpp"

using namespace snlr;

namespace {

const SNDataset& data() {
  static const SNDataset d = oracle::fixture();
  return d;
}

const FittedModel& fit_ln() {
  static const FittedModel f = fit_ml(oracle::fixture_spec(), data());
  return f;
}

const FittedModel& fit_ss_quad() {
  static const FittedModel f =
      fit_ml(oracle::fixture_spec(Orientation::strength_specified, ErrorFamily::sev, CurveKind::logquadratic), data());
  return f;
}

constexpr double kSe = 212.13203435596427;

TEST(Band, PointsMatchIndependentIntervals) {
  const auto grid = probit_grid(0.05, 0.95, 7);
  const auto b = band(fit_ln(), data(), BandFamily::life_qf, kSe, grid, 0.10);
  const auto b2 = band(fit_ln(), data(), BandFamily::life_qf, kSe, grid, 0.10, Method::lr, 3);
  ASSERT_EQ(b.size(), grid.size());
  EXPECT_EQ(b.failures, 0u);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto iv = lr_interval(fit_ln(), data(), ScalarTarget::life_quantile(grid[i], kSe), 0.10);
    EXPECT_EQ(b.lowers[i], iv.lower.value);
    EXPECT_EQ(b.uppers[i], iv.upper.value);
    EXPECT_EQ(b.estimates[i], iv.estimate);
    EXPECT_EQ(b2.lowers[i], b.lowers[i]);
    EXPECT_EQ(b2.uppers[i], b.uppers[i]);
  }
}

TEST(Band, DegenerateCutoffCollapses) {
  const auto grid = log_grid(1e4, 5e5, 6);
  for (auto m : {Method::lr, Method::wald}) {
    const auto b = band(fit_ln(), data(), BandFamily::life_cdf, kSe, grid, 1.0, m);
    for (std::size_t i = 0; i < b.size(); ++i) {
      EXPECT_DOUBLE_EQ(b.lowers[i], b.estimates[i]);
      EXPECT_DOUBLE_EQ(b.uppers[i], b.estimates[i]);
    }
  }
}

TEST(Band, EstimatesAreMonotoneAndBracketed) {
  struct Case {
    BandFamily family;
    double fixed;
    std::vector<double> grid;
    int direction;
  };
  const std::vector<Case> cases{
      {BandFamily::life_cdf, kSe, log_grid(1e4, 5e5, 9), +1},
      {BandFamily::life_qf, kSe, probit_grid(0.02, 0.98, 9), +1},
      {BandFamily::life_qf_vs_stress, 0.1, log_grid(120.0, 400.0, 9), -1},
      {BandFamily::strength_cdf, 5e4, log_grid(120.0, 400.0, 9), +1},
      {BandFamily::strength_qf, 5e4, probit_grid(0.02, 0.98, 9), +1},
      {BandFamily::strength_qf_vs_cycles, 0.1, log_grid(1e4, 2e5, 9), -1},
  };
  for (const auto& fit : {&fit_ln(), &fit_ss_quad()})
    for (const auto& c : cases) {
      const auto b = band(*fit, data(), c.family, c.fixed, c.grid, 0.10);
      EXPECT_EQ(b.failures, 0u) << to_string(c.family);
      for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_LE(b.lowers[i], b.estimates[i]) << to_string(c.family);
        EXPECT_GE(b.uppers[i], b.estimates[i]) << to_string(c.family);
        if (i > 0) EXPECT_GT(c.direction * (b.estimates[i] - b.estimates[i - 1]), 0.0) << to_string(c.family);
      }
    }
}

TEST(Band, BadPointsAreRecordedNotThrown) {
  const std::vector<double> grid{150.0, 200.0, 800.0};  // 800 is outside the stress domain
  const auto b = band(fit_ln(), data(), BandFamily::life_qf_vs_stress, 0.1, grid, 0.10);
  EXPECT_EQ(b.failures, 1u);
  EXPECT_EQ(b.lower_kind[2], BoundKind::failed);
  EXPECT_EQ(b.lower_kind[0], BoundKind::finite);
  EXPECT_FALSE(b.diagnostics.empty());
  const std::vector<double> unsorted{200.0, 150.0};
  EXPECT_THROW(band(fit_ln(), data(), BandFamily::life_qf_vs_stress, 0.1, unsorted, 0.10), PreconditionError);
}

TEST(Equivalence, CdfQfRoundTrip) {
  const auto gp = probit_grid(0.01, 0.99, 25);
  auto r = check_cdf_qf_equivalence(fit_ln(), data(), Variable::life, kSe, 0.10, gp);
  EXPECT_EQ(r.id, ResultId::R2);
  EXPECT_TRUE(r.pass) << r.max_discrepancy;
  EXPECT_EQ(r.scale, "probability");
  r = check_cdf_qf_equivalence(fit_ln(), data(), Variable::strength, 5e4, 0.10, gp);
  EXPECT_EQ(r.id, ResultId::R2);
  EXPECT_TRUE(r.pass) << r.max_discrepancy;

  r = check_cdf_qf_equivalence(fit_ss_quad(), data(), Variable::strength, 5e4, 0.10, gp);
  EXPECT_EQ(r.id, ResultId::R4);
  EXPECT_TRUE(r.pass) << r.max_discrepancy;
  r = check_cdf_qf_equivalence(fit_ss_quad(), data(), Variable::life, kSe, 0.10, gp);
  EXPECT_EQ(r.id, ResultId::R5);
  EXPECT_TRUE(r.pass) << r.max_discrepancy;
}

TEST(Equivalence, DegenerateCutoffIsExact) {
  const auto gp = probit_grid(0.05, 0.95, 7);
  const auto r = check_cdf_qf_equivalence(fit_ln(), data(), Variable::life, kSe, 1.0, gp);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.max_discrepancy, 1e-12);
}

TEST(Equivalence, LifeStrengthQuantileCurves) {
  const auto gs = log_grid(150.0, 300.0, 15);
  auto r = check_life_strength_qf_equivalence(fit_ln(), data(), 0.1, 0.10, gs);
  EXPECT_EQ(r.id, ResultId::R3);
  EXPECT_EQ(r.scale, "relative");
  EXPECT_TRUE(r.pass) << r.max_discrepancy;
  r = check_life_strength_qf_equivalence(fit_ss_quad(), data(), 0.1, 0.10, gs);
  EXPECT_EQ(r.id, ResultId::R6);
  EXPECT_TRUE(r.pass) << r.max_discrepancy;
}

TEST(Equivalence, WaldIsRefused) {
  const auto gp = probit_grid(0.1, 0.9, 5);
  EXPECT_THROW(check_cdf_qf_equivalence(fit_ln(), data(), Variable::life, kSe, 0.1, gp, 1e-3, Method::wald),
               UnsupportedError);
  EXPECT_THROW(check_life_strength_qf_equivalence(fit_ln(), data(), 0.1, 0.1, log_grid(150, 300, 5), 1e-3,
                                                  Method::wald),
               UnsupportedError);
}

ConfidenceBand qf_band(Method m, std::size_t n) {
  return band(fit_ln(), data(), BandFamily::life_qf, kSe, probit_grid(0.01, 0.99, n), 0.10, m);
}

ConfidenceBand cdf_band_over(const ConfidenceBand& q, std::size_t n) {
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    lo = std::min(lo, q.lowers[i]);
    hi = std::max(hi, q.uppers[i]);
  }
  lo = std::max(lo, 5e3);
  hi = std::min(hi, 1e6);
  return band(fit_ln(), data(), BandFamily::life_cdf, kSe, log_grid(lo, hi, n), 0.10, q.method);
}

TEST(Transpose, LrBandsAreTransposes) {
  const auto q = qf_band(Method::lr, 49);
  const auto c = cdf_band_over(q, 49);
  const auto a = check_inverse_band_transpose(c, q);
  const auto b = check_inverse_band_transpose(q, c);
  EXPECT_TRUE(a.pass) << a.max_discrepancy;
  EXPECT_EQ(a.max_discrepancy, b.max_discrepancy);
  EXPECT_EQ(a.points_checked, b.points_checked);
  EXPECT_GT(a.points_checked, 100u);
}

TEST(Transpose, GridRefinementIsStable) {
  const auto q1 = qf_band(Method::lr, 49);
  const auto q2 = qf_band(Method::lr, 97);
  const auto d1 = check_inverse_band_transpose(cdf_band_over(q1, 49), q1).max_discrepancy;
  const auto d2 = check_inverse_band_transpose(cdf_band_over(q2, 97), q2).max_discrepancy;
  EXPECT_LT(std::fabs(d1 - d2), 2e-3);
  EXPECT_LE(d2, d1 + 1e-4);
}

TEST(Transpose, QuantileCurvesTranspose) {
  const auto l = band(fit_ln(), data(), BandFamily::life_qf_vs_stress, 0.1, log_grid(150, 300, 49), 0.10);
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    lo = std::min(lo, l.lowers[i]);
    hi = std::max(hi, l.uppers[i]);
  }
  const auto s = band(fit_ln(), data(), BandFamily::strength_qf_vs_cycles, 0.1,
                      log_grid(std::max(lo, 5e3), std::min(hi, 1e6), 49), 0.10);
  const auto r = check_inverse_band_transpose(l, s);
  EXPECT_EQ(r.scale, "relative");
  EXPECT_TRUE(r.pass) << r.max_discrepancy;
}

// Wald bands of a function and its inverse are not transposes of each other.
TEST(Transpose, WaldBandsFailTheCheck) {
  const auto q = qf_band(Method::wald, 49);
  const auto c = cdf_band_over(q, 49);
  const auto r = check_inverse_band_transpose(c, q);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_discrepancy, 1e-3);
}

TEST(Transpose, RejectsIncompatibleBands) {
  const auto q = qf_band(Method::lr, 5);
  const auto s = band(fit_ln(), data(), BandFamily::strength_qf, 5e4, probit_grid(0.1, 0.9, 5), 0.10);
  EXPECT_THROW(check_inverse_band_transpose(q, s), PreconditionError);
  EXPECT_THROW(check_inverse_band_transpose(q, q), PreconditionError);
  const auto c = band(fit_ln(), data(), BandFamily::life_cdf, kSe, log_grid(1e4, 1e5, 5), 0.05);
  EXPECT_THROW(check_inverse_band_transpose(c, q), PreconditionError);
  const auto w = band(fit_ln(), data(), BandFamily::life_cdf, kSe, log_grid(1e4, 1e5, 5), 0.10, Method::wald);
  EXPECT_THROW(check_inverse_band_transpose(w, q), PreconditionError);
}

TEST(SafeStress, RoutesAgree) {
  const auto r = safe_stress(fit_ln(), data(), 5e4, 0.1, 0.10);
  ASSERT_TRUE(r.found) << r.note;
  EXPECT_TRUE(r.consistent) << r.note;
  EXPECT_LE(r.relative_stress_gap, 1e-3);
  EXPECT_LE(r.relative_cycles_gap, 1e-3);
  const auto up = lr_bound(fit_ln(), data(), ScalarTarget::life_cdf(5e4, r.crossing_stress), 0.10, Side::upper);
  EXPECT_NEAR(up.value, 0.1, 1e-8);
  // Safe stress sits below the point estimate of the strength quantile.
  EXPECT_LT(r.crossing_stress, strength_quantile(fit_ln().spec, fit_ln().theta_hat, 0.1, 5e4));
}

TEST(SafeStress, NoCrossingInsideDomain) {
  const auto r = safe_stress(fit_ln(), data(), 1e6, 0.01, 0.10);
  EXPECT_FALSE(r.found);
  EXPECT_FALSE(r.consistent);
  EXPECT_FALSE(r.note.empty());
}

TEST(BandFamilyNames, RoundTrip) {
  for (auto f : {BandFamily::life_cdf, BandFamily::life_qf, BandFamily::life_qf_vs_stress, BandFamily::strength_cdf,
                 BandFamily::strength_qf, BandFamily::strength_qf_vs_cycles})
    EXPECT_EQ(parse_band_family(to_string(f)), f);
  EXPECT_THROW(parse_band_family("life"), DomainError);
}

}  // namespace
