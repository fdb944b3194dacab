#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snlr/coverage.hpp"
#include "snlr/likelihood.hpp"

using namespace snlr;

namespace {

TEST(Likelihood, SingleObservationMatchesDensityAndSurvival) {
  for (auto o : {Orientation::life_specified, Orientation::strength_specified})
    for (auto f : {ErrorFamily::normal, ErrorFamily::sev, ErrorFamily::logistic})
      for (auto k : {CurveKind::loglinear, CurveKind::logquadratic}) {
        const auto m = oracle::fixture_spec(o, f, k);
        ParamVector th = o == Orientation::life_specified ? ParamVector{{30.0, -3.5}, 0.4}
                                                          : ParamVector{{30.0 / 3.5, -1.0 / 3.5}, 0.4 / 3.5};
        if (k == CurveKind::logquadratic) th.beta.push_back(-0.001);
        const double s = 212.0, t = 6e4;
        // Failure: the density, by central difference of the cdf.
        const double h = 1e-5 * t;
        const double dens = (life_cdf(m, th, t + h, s) - life_cdf(m, th, t - h, s)) / (2.0 * h);
        SNDataset fail{{{s, t, Status::failure}}, ""};
        EXPECT_NEAR(std::exp(loglik(m, th, fail)) / dens, 1.0, 1e-6);
        // Runout: the survival probability.
        SNDataset run{{{s, t, Status::runout}}, ""};
        EXPECT_NEAR(loglik(m, th, run), std::log1p(-life_cdf(m, th, t, s)), 1e-12);
      }
}

TEST(Likelihood, PermutationInvariant) {
  auto d = oracle::fixture();
  const auto m = oracle::fixture_spec();
  const ParamVector th{{29.0, -3.3}, 0.45};
  const double ll = loglik(m, th, d);
  std::mt19937_64 g(7);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(d.observations.begin(), d.observations.end(), g);
    EXPECT_NEAR(loglik(m, th, d), ll, 1e-10);
  }
}

TEST(Likelihood, EarlyRunoutCarriesNoInformation) {
  auto d = oracle::fixture();
  const auto m = oracle::fixture_spec();
  const ParamVector th{{29.0, -3.3}, 0.45};
  const double ll = loglik(m, th, d);
  double tmin = 1e300;
  for (const auto& o : d.observations) tmin = std::min(tmin, o.cycles);
  d.observations.push_back({200.0, 1e-9 * tmin, Status::runout});
  EXPECT_LE(std::fabs(loglik(m, th, d) - ll), 1e-6);
}

TEST(Likelihood, InadmissibleParametersHaveZeroLikelihood) {
  const auto d = oracle::fixture();
  const auto m = oracle::fixture_spec();
  EXPECT_EQ(loglik_unchecked(m, ParamVector{{30.0, 1.0}, 0.4}, d), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(loglik(m, ParamVector{{30.0, -3.5}, -0.4}, d), DomainError);
}

TEST(Likelihood, ObservationOutsideDomainIsRejected) {
  auto d = oracle::fixture();
  d.observations.push_back({50.0, 1e5, Status::failure});
  EXPECT_THROW(loglik(oracle::fixture_spec(), ParamVector{{30.0, -3.5}, 0.4}, d), DomainError);
}

// Uncensored loglinear lognormal: ML = least squares with sigma^2 = RSS/n.
TEST(FitMl, MatchesClosedFormRegression) {
  auto d = oracle::fixture();
  for (auto& o : d.observations) o.status = Status::failure;
  const auto fit = fit_ml(oracle::fixture_spec(), d);
  const auto ls = oracle::least_squares(d);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.theta_hat.beta[0], ls.b0, 1e-4);
  EXPECT_NEAR(fit.theta_hat.beta[1], ls.b1, 1e-4);
  EXPECT_NEAR(fit.theta_hat.sigma, ls.sigma, 1e-4);
}

TEST(FitMl, RecoversTruthAtLargeSample) {
  const auto m = oracle::fixture_spec();
  const ParamVector truth{{30.0, -3.5}, 0.4};
  SimDesign design{m, truth, {{150.0, 700}, {200.0, 650}, {300.0, 650}}, 2e5, 1, 2024, {}};
  const auto d = simulate_dataset(design, 0);
  const auto fit = fit_ml(m, d);
  ASSERT_TRUE(fit.converged);
  const auto flat = fit.theta_hat.flat();
  const auto t = truth.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double se = std::sqrt(fit.wald_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    EXPECT_LE(std::fabs(flat[i] - t[i]), 3.0 * se) << "parameter " << i;
  }
}

TEST(FitMl, EstimateIsStationaryAndBeatsNeighbours) {
  const auto d = oracle::fixture();
  for (auto f : {ErrorFamily::normal, ErrorFamily::sev})
    for (auto k : {CurveKind::loglinear, CurveKind::logquadratic}) {
      const auto m = oracle::fixture_spec(Orientation::life_specified, f, k);
      const auto fit = fit_ml(m, d);
      ASSERT_TRUE(fit.converged);
      auto flat = fit.theta_hat.flat();
      for (std::size_t i = 0; i < flat.size(); ++i)
        for (double dir : {-1.0, 1.0}) {
          auto p = flat;
          p[i] += dir * 1e-3 * std::max(1.0, std::fabs(p[i]));
          EXPECT_LE(loglik_unchecked(m, ParamVector::from_flat(p), d), fit.loglik_hat + 1e-9);
        }
    }
}

// Loglinear life- and strength-specified models are reparameterizations.
TEST(FitMl, OrientationIdentity) {
  const auto d = oracle::fixture();
  for (auto f : {ErrorFamily::normal, ErrorFamily::sev}) {
    const auto ml = oracle::fixture_spec(Orientation::life_specified, f);
    const auto ms = oracle::fixture_spec(Orientation::strength_specified, f);
    const auto a = fit_ml(ml, d);
    const auto b = fit_ml(ms, d);
    EXPECT_NEAR(a.loglik_hat, b.loglik_hat, 1e-6);
    const auto mapped = strength_params_from_life_loglinear(a.theta_hat);
    EXPECT_NEAR(loglik(ms, mapped, d), a.loglik_hat, 1e-9);
    auto rel = [](double x, double y) { return std::fabs(x - y) / std::fabs(y); };
    EXPECT_LE(rel(life_quantile(ml, a.theta_hat, 0.1, 212.0), life_quantile(ms, b.theta_hat, 0.1, 212.0)), 1e-6);
    EXPECT_LE(rel(life_cdf(ml, a.theta_hat, 5e4, 212.0), life_cdf(ms, b.theta_hat, 5e4, 212.0)), 1e-6);
    EXPECT_LE(rel(strength_quantile(ml, a.theta_hat, 0.1, 5e4), strength_quantile(ms, b.theta_hat, 0.1, 5e4)),
              1e-6);
    EXPECT_LE(rel(strength_cdf(ml, a.theta_hat, 212.0, 5e4), strength_cdf(ms, b.theta_hat, 212.0, 5e4)), 1e-6);
  }
}

TEST(FitMl, FixedParametersStayFixed) {
  const auto d = oracle::fixture();
  const ModelSpec m(Orientation::life_specified, ErrorFamily::normal, CurveFamily(CurveKind::loglinear),
                    {100.0, 500.0}, std::nullopt, {{1, -3.5}, {2, 0.4}});
  const auto fit = fit_ml(m, d);
  EXPECT_EQ(fit.theta_hat.beta[1], -3.5);
  EXPECT_EQ(fit.theta_hat.sigma, 0.4);
  EXPECT_EQ(fit.wald_cov(1, 1), 0.0);
  EXPECT_GT(fit.wald_cov(0, 0), 0.0);
}

TEST(FitMl, AllRunoutsIsDegenerate) {
  auto d = oracle::fixture();
  for (auto& o : d.observations) o.status = Status::runout;
  EXPECT_THROW(fit_ml(oracle::fixture_spec(), d), DegenerateDataError);
}

TEST(FitMl, StartsAreRecorded) {
  const auto fit = fit_ml(oracle::fixture_spec(), oracle::fixture());
  EXPECT_EQ(fit.starts.size(), 8u);
  for (const auto& s : fit.starts) EXPECT_LE(s.loglik, fit.loglik_hat + 1e-9);
}

}  // namespace
