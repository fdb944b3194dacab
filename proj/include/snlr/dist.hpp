#pragma once

// Standardized location-scale error distributions (location 0, scale 1).
// Each family induces a log-location-scale distribution for the observable
// variable: normal -> lognormal, smallest extreme value -> Weibull,
// logistic -> loglogistic.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "snlr/errors.hpp"

namespace snlr {

enum class ErrorFamily { normal, sev, logistic };

inline std::string_view to_string(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::normal: return "normal";
    case ErrorFamily::sev: return "sev";
    case ErrorFamily::logistic: return "logistic";
  }
  return "?";
}

// Accepts the error-family names and the names of the induced life
// distributions.
inline ErrorFamily parse_error_family(std::string_view s) {
  if (s == "normal" || s == "lognormal") return ErrorFamily::normal;
  if (s == "sev" || s == "smallest-extreme-value" || s == "weibull")
    return ErrorFamily::sev;
  if (s == "logistic" || s == "loglogistic") return ErrorFamily::logistic;
  throw DomainError("unknown error family '" + std::string(s) + "'");
}

namespace detail {

inline void require_finite(double z, const char* fn) {
  if (!std::isfinite(z))
    throw DomainError(std::string(fn) + ": argument must be finite");
}

inline void require_open_unit(double p, const char* fn) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError(std::string(fn) + ": probability must lie in (0,1)");
}

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

// log Phi(z) for the standard normal. erfc keeps full relative accuracy down
// to z ~ -37; below that the asymptotic Mills-ratio series is used.
inline double normal_log_cdf(double z) {
  if (z > -37.0) {
    if (z > 5.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
    return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  }
  const double r = 1.0 / (z * z);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return -0.5 * z * z - kLogSqrt2Pi - std::log(-z) + std::log(series);
}

// Acklam's rational approximation to the normal quantile, |rel err| < 1.2e-9.
inline double normal_quantile_approx(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline double normal_quantile(double p) {
  double x = normal_quantile_approx(p);
  // One Newton step against the erfc-based cdf, working on the smaller tail.
  if (p < 0.5) {
    const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    x -= err / (kInvSqrt2Pi * std::exp(-0.5 * x * x));
  } else {
    const double err = 0.5 * std::erfc(x / std::numbers::sqrt2) - (1.0 - p);
    x += err / (kInvSqrt2Pi * std::exp(-0.5 * x * x));
  }
  return x;
}

}  // namespace detail

/// Standardized cdf Phi(z).
inline double std_cdf(ErrorFamily f, double z) {
  detail::require_finite(z, "std_cdf");
  switch (f) {
    case ErrorFamily::normal: return 0.5 * std::erfc(-z / std::numbers::sqrt2);
    case ErrorFamily::sev: return -std::expm1(-std::exp(z));
    case ErrorFamily::logistic: return 1.0 / (1.0 + std::exp(-z));
  }
  return 0.0;
}

/// Survival 1 - Phi(z), computed without cancellation.
inline double std_sf(ErrorFamily f, double z) {
  detail::require_finite(z, "std_sf");
  switch (f) {
    case ErrorFamily::normal: return 0.5 * std::erfc(z / std::numbers::sqrt2);
    case ErrorFamily::sev: return std::exp(-std::exp(z));
    case ErrorFamily::logistic: return 1.0 / (1.0 + std::exp(z));
  }
  return 0.0;
}

inline double std_log_cdf(ErrorFamily f, double z) {
  detail::require_finite(z, "std_log_cdf");
  switch (f) {
    case ErrorFamily::normal: return detail::normal_log_cdf(z);
    case ErrorFamily::sev: {
      const double w = std::exp(z);
      // log(1 - exp(-w)); for small w use log(w) + log1p(...) to avoid 0.
      if (w < 1e-8) return z + std::log1p(-0.5 * w);
      return std::log(-std::expm1(-w));
    }
    case ErrorFamily::logistic:
      return z < 0.0 ? z - std::log1p(std::exp(z)) : -std::log1p(std::exp(-z));
  }
  return 0.0;
}

/// log(1 - Phi(z)); the censored-observation term of the likelihood.
inline double std_log_sf(ErrorFamily f, double z) {
  detail::require_finite(z, "std_log_sf");
  switch (f) {
    case ErrorFamily::normal: return detail::normal_log_cdf(-z);
    case ErrorFamily::sev: return -std::exp(z);
    case ErrorFamily::logistic:
      return z > 0.0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
  }
  return 0.0;
}

inline double std_log_pdf(ErrorFamily f, double z) {
  detail::require_finite(z, "std_log_pdf");
  switch (f) {
    case ErrorFamily::normal: return -0.5 * z * z - detail::kLogSqrt2Pi;
    case ErrorFamily::sev: return z - std::exp(z);
    case ErrorFamily::logistic: {
      const double a = std::fabs(z);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
  }
  return 0.0;
}

inline double std_pdf(ErrorFamily f, double z) { return std::exp(std_log_pdf(f, z)); }

/// Standardized quantile Phi^{-1}(p).
inline double std_quantile(ErrorFamily f, double p) {
  detail::require_open_unit(p, "std_quantile");
  switch (f) {
    case ErrorFamily::normal: return detail::normal_quantile(p);
    case ErrorFamily::sev: return std::log(-std::log1p(-p));
    case ErrorFamily::logistic: return std::log(p) - std::log1p(-p);
  }
  return 0.0;
}

/// Quantile of the chi-square distribution with one degree of freedom,
/// (Phi^{-1}((1+p)/2))^2 for the standard normal.
inline double chisq1_quantile(double p) {
  if (!(p >= 0.0 && p < 1.0))
    throw DomainError("chisq1_quantile: probability must lie in [0,1)");
  if (p == 0.0) return 0.0;
  const double z = detail::normal_quantile(0.5 + 0.5 * p);
  return z * z;
}

}  // namespace snlr
