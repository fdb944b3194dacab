#pragma once

// Stress-life model orientations.
//
// Life-specified:     log N = log g(S; beta) + sigma_N * eps
// Strength-specified: log X = log h(N; beta) + sigma_X * eps
//
// Either orientation exposes all four target functions: the fatigue-life cdf
// and quantile at a given stress, and the fatigue-strength cdf and quantile
// at a given number of cycles. The "other" random variable's distribution is
// the exact induced one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "snlr/dist.hpp"
#include "snlr/errors.hpp"

namespace snlr {

/// Closed interval of positive reals.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  double log_lo() const { return std::log(lo); }
  double log_hi() const { return std::log(hi); }
  double log_mid() const { return 0.5 * (log_lo() + log_hi()); }
  double geometric_mid() const { return std::sqrt(lo * hi); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Orientation { life_specified, strength_specified };
enum class CurveKind { loglinear, logquadratic };

inline std::string_view to_string(Orientation o) {
  return o == Orientation::life_specified ? "life-specified" : "strength-specified";
}

inline Orientation parse_orientation(std::string_view s) {
  if (s == "life-specified" || s == "life") return Orientation::life_specified;
  if (s == "strength-specified" || s == "strength") return Orientation::strength_specified;
  throw DomainError("unknown orientation '" + std::string(s) + "'");
}

inline std::string_view to_string(CurveKind k) {
  return k == CurveKind::loglinear ? "loglinear" : "logquadratic";
}

inline CurveKind parse_curve_kind(std::string_view s) {
  if (s == "loglinear") return CurveKind::loglinear;
  if (s == "logquadratic") return CurveKind::logquadratic;
  throw DomainError("unknown curve kind '" + std::string(s) + "'");
}

/// Monotone decreasing curve in log-log coordinates. Evaluated on the log of
/// its argument: log c(a) = b0 + b1*L (+ b2*L^2), L = log a.
class CurveFamily {
 public:
  constexpr CurveFamily() = default;
  constexpr explicit CurveFamily(CurveKind kind) : kind_(kind) {}

  constexpr CurveKind kind() const noexcept { return kind_; }
  constexpr std::size_t coefficient_count() const noexcept {
    return kind_ == CurveKind::loglinear ? 2 : 3;
  }

  double log_value(std::span<const double> beta, double log_arg) const {
    return beta[0] + shape_value(beta, log_arg);
  }

  // log_value without the intercept b0. Every curve here is affine in b0.
  double shape_value(std::span<const double> beta, double log_arg) const {
    double v = beta[1] * log_arg;
    if (kind_ == CurveKind::logquadratic) v += beta[2] * log_arg * log_arg;
    return v;
  }

  /// d log c / d log a.
  double log_slope(std::span<const double> beta, double log_arg) const {
    double s = beta[1];
    if (kind_ == CurveKind::logquadratic) s += 2.0 * beta[2] * log_arg;
    return s;
  }

  /// Strictly decreasing on [log_lo, log_hi]. The slope is affine in L, so the
  /// endpoints decide.
  bool decreasing_on(std::span<const double> beta, const Interval& dom) const {
    return log_slope(beta, dom.log_lo()) < 0.0 && log_slope(beta, dom.log_hi()) < 0.0;
  }

  friend bool operator==(const CurveFamily&, const CurveFamily&) = default;

 private:
  CurveKind kind_ = CurveKind::loglinear;
};

/// Parameter vector theta = (beta..., sigma).
struct ParamVector {
  std::vector<double> beta;
  double sigma = 1.0;

  std::size_t size() const noexcept { return beta.size() + 1; }

  std::vector<double> flat() const {
    std::vector<double> v(beta);
    v.push_back(sigma);
    return v;
  }

  static ParamVector from_flat(std::span<const double> v) {
    if (v.size() < 2) throw DomainError("parameter vector needs at least 2 entries");
    ParamVector p;
    p.beta.assign(v.begin(), v.end() - 1);
    p.sigma = v.back();
    return p;
  }

  double operator[](std::size_t i) const { return i < beta.size() ? beta[i] : sigma; }
};

/// A parameter held at a known value during fitting and profiling.
struct FixedParam {
  std::size_t index = 0;
  double value = 0.0;
};

class ModelSpec {
 public:
  ModelSpec(Orientation orientation, ErrorFamily family, CurveFamily curve,
            Interval stress_domain, std::optional<Interval> cycles_domain = std::nullopt,
            std::vector<FixedParam> fixed = {})
      : orientation_(orientation),
        family_(family),
        curve_(curve),
        stress_(stress_domain),
        cycles_(cycles_domain),
        fixed_(std::move(fixed)) {
    auto check = [](const Interval& d, const char* name) {
      if (!(d.lo > 0.0 && d.hi > d.lo && std::isfinite(d.hi)))
        throw DomainError(std::string(name) + " domain must satisfy 0 < lo < hi < inf");
    };
    check(stress_, "stress");
    if (cycles_) check(*cycles_, "cycles");
    if (orientation_ == Orientation::strength_specified && !cycles_)
      throw DomainError("strength-specified model requires a cycles domain");
    for (const auto& f : fixed_) {
      if (f.index >= param_count())
        throw DomainError("fixed parameter index out of range");
      if (f.index == param_count() - 1 && !(f.value > 0.0))
        throw DomainError("fixed sigma must be positive");
    }
  }

  Orientation orientation() const noexcept { return orientation_; }
  ErrorFamily family() const noexcept { return family_; }
  const CurveFamily& curve() const noexcept { return curve_; }
  const Interval& stress_domain() const noexcept { return stress_; }
  const std::optional<Interval>& cycles_domain() const noexcept { return cycles_; }
  const std::vector<FixedParam>& fixed() const noexcept { return fixed_; }

  std::size_t param_count() const noexcept { return curve_.coefficient_count() + 1; }
  std::size_t sigma_index() const noexcept { return curve_.coefficient_count(); }

  /// Domain of the curve's argument: stress for g, cycles for h.
  const Interval& curve_domain() const {
    return orientation_ == Orientation::life_specified ? stress_ : *cycles_;
  }

  bool is_fixed(std::size_t i) const {
    return std::any_of(fixed_.begin(), fixed_.end(),
                       [i](const FixedParam& f) { return f.index == i; });
  }

  std::vector<std::size_t> free_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < param_count(); ++i)
      if (!is_fixed(i)) idx.push_back(i);
    return idx;
  }

  /// Overwrites fixed entries of a flat parameter vector.
  void apply_fixed(std::span<double> flat) const {
    for (const auto& f : fixed_) flat[f.index] = f.value;
  }

  void require_stress(double s) const {
    if (!(std::isfinite(s) && stress_.contains(s))) {
      std::ostringstream os;
      os << "stress " << s << " outside working domain [" << stress_.lo << ", "
         << stress_.hi << "]";
      throw DomainError(os.str());
    }
  }

  void require_cycles(double t) const {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("cycles must be positive and finite");
    if (cycles_ && orientation_ == Orientation::strength_specified && !cycles_->contains(t)) {
      std::ostringstream os;
      os << "cycles " << t << " outside working domain [" << cycles_->lo << ", "
         << cycles_->hi << "]";
      throw DomainError(os.str());
    }
  }

  bool admissible(const ParamVector& theta) const {
    return theta.beta.size() == curve_.coefficient_count() && theta.sigma > 0.0 &&
           std::isfinite(theta.sigma) &&
           std::all_of(theta.beta.begin(), theta.beta.end(),
                       [](double b) { return std::isfinite(b); }) &&
           curve_.decreasing_on(theta.beta, curve_domain());
  }

  void require_admissible(const ParamVector& theta) const {
    if (theta.beta.size() != curve_.coefficient_count())
      throw DomainError("parameter vector length does not match the curve family");
    if (!(theta.sigma > 0.0)) throw DomainError("sigma must be positive");
    if (!admissible(theta))
      throw DomainError("curve is not strictly decreasing on the working domain");
  }

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    if (a.orientation_ != b.orientation_ || a.family_ != b.family_ || !(a.curve_ == b.curve_) ||
        !(a.stress_ == b.stress_) || a.cycles_ != b.cycles_ || a.fixed_.size() != b.fixed_.size())
      return false;
    for (std::size_t i = 0; i < a.fixed_.size(); ++i)
      if (a.fixed_[i].index != b.fixed_[i].index || a.fixed_[i].value != b.fixed_[i].value)
        return false;
    return true;
  }

 private:
  Orientation orientation_;
  ErrorFamily family_;
  CurveFamily curve_;
  Interval stress_;
  std::optional<Interval> cycles_;
  std::vector<FixedParam> fixed_;
};

/// Solves log c(a) = target for a on the domain. Closed form for loglinear;
/// safeguarded bisection/Newton in log space for logquadratic.
inline double invert_curve(const CurveFamily& curve, std::span<const double> beta,
                           double target, const Interval& domain) {
  if (!std::isfinite(target)) throw DomainError("invert_curve: target must be finite");
  const double llo = domain.log_lo();
  const double lhi = domain.log_hi();
  // Decreasing curve: the largest value is attained at the low end.
  const double vmax = curve.log_value(beta, llo);
  const double vmin = curve.log_value(beta, lhi);
  const double slack = 1e-12 * std::max(1.0, std::fabs(target));
  if (target > vmax + slack || target < vmin - slack) {
    std::ostringstream os;
    os << "inversion target " << target << " outside attainable log-range [" << vmin << ", "
       << vmax << "]";
    throw RangeError(os.str(), vmin, vmax);
  }
  if (curve.kind() == CurveKind::loglinear) {
    const double l = std::clamp((target - beta[0]) / beta[1], llo, lhi);
    return std::exp(l);
  }
  double a = llo, b = lhi;
  double l = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const double f = curve.log_value(beta, l) - target;
    if (std::fabs(f) <= 1e-13 * std::max(1.0, std::fabs(target))) break;
    if (f > 0.0) a = l; else b = l;
    const double slope = curve.log_slope(beta, l);
    double next = l - f / slope;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (b - a < 1e-15 * std::max(1.0, std::fabs(l))) { l = 0.5 * (a + b); break; }
    l = next;
  }
  return std::exp(l);
}

namespace detail {

inline double z_for_quantile(ErrorFamily f, double p) { return std_quantile(f, p); }

}  // namespace detail

/// Location of log life at stress s: log g(s) (life-specified) or the log t
/// solving log h(t) = log s (strength-specified).
inline double life_location(const ModelSpec& spec, const ParamVector& theta, double stress) {
  spec.require_stress(stress);
  spec.require_admissible(theta);
  if (spec.orientation() == Orientation::life_specified)
    return spec.curve().log_value(theta.beta, std::log(stress));
  return std::log(invert_curve(spec.curve(), theta.beta, std::log(stress), *spec.cycles_domain()));
}

/// Standardized argument of Phi for the fatigue-life cdf, and d z / d log t.
struct LifeStandardized {
  double z;
  double dz_dlogt;
};

inline LifeStandardized life_standardized(const ModelSpec& spec, const ParamVector& theta,
                                          double t, double stress) {
  const double lt = std::log(t);
  if (spec.orientation() == Orientation::life_specified) {
    const double mu = spec.curve().log_value(theta.beta, std::log(stress));
    return {(lt - mu) / theta.sigma, 1.0 / theta.sigma};
  }
  const double lh = spec.curve().log_value(theta.beta, lt);
  return {(std::log(stress) - lh) / theta.sigma,
          -spec.curve().log_slope(theta.beta, lt) / theta.sigma};
}

/// F_N(t; S_e).
inline double life_cdf(const ModelSpec& spec, const ParamVector& theta, double t, double stress) {
  spec.require_cycles(t);
  spec.require_stress(stress);
  spec.require_admissible(theta);
  return std_cdf(spec.family(), life_standardized(spec, theta, t, stress).z);
}

/// f_N(t; S_e) = d F_N / dt.
inline double life_pdf(const ModelSpec& spec, const ParamVector& theta, double t, double stress) {
  spec.require_cycles(t);
  spec.require_stress(stress);
  spec.require_admissible(theta);
  const auto zs = life_standardized(spec, theta, t, stress);
  return std_pdf(spec.family(), zs.z) * zs.dz_dlogt / t;
}

/// t_p(S_e).
inline double life_quantile(const ModelSpec& spec, const ParamVector& theta, double p,
                            double stress) {
  spec.require_stress(stress);
  spec.require_admissible(theta);
  const double z = detail::z_for_quantile(spec.family(), p);
  if (spec.orientation() == Orientation::life_specified)
    return std::exp(spec.curve().log_value(theta.beta, std::log(stress)) + z * theta.sigma);
  return invert_curve(spec.curve(), theta.beta, std::log(stress) - z * theta.sigma,
                      *spec.cycles_domain());
}

/// F_X(x; N_e).
inline double strength_cdf(const ModelSpec& spec, const ParamVector& theta, double x,
                           double cycles) {
  spec.require_stress(x);
  spec.require_cycles(cycles);
  spec.require_admissible(theta);
  double z;
  if (spec.orientation() == Orientation::life_specified)
    z = (std::log(cycles) - spec.curve().log_value(theta.beta, std::log(x))) / theta.sigma;
  else
    z = (std::log(x) - spec.curve().log_value(theta.beta, std::log(cycles))) / theta.sigma;
  return std_cdf(spec.family(), z);
}

/// x_p(N_e).
inline double strength_quantile(const ModelSpec& spec, const ParamVector& theta, double p,
                                double cycles) {
  spec.require_cycles(cycles);
  spec.require_admissible(theta);
  const double z = detail::z_for_quantile(spec.family(), p);
  if (spec.orientation() == Orientation::life_specified)
    return invert_curve(spec.curve(), theta.beta, std::log(cycles) - z * theta.sigma,
                        spec.stress_domain());
  const double lx = spec.curve().log_value(theta.beta, std::log(cycles)) + z * theta.sigma;
  const auto& dom = spec.stress_domain();
  if (!(lx >= dom.log_lo() && lx <= dom.log_hi()))
    throw RangeError("strength quantile outside the stress working domain", dom.log_lo(),
                     dom.log_hi());
  return std::exp(lx);
}

/// Strength-specified parameters reproducing a loglinear life-specified model:
/// log h(t) = (b0 - log t) / (-b1), sigma_X = sigma_N / |b1|.
inline ParamVector strength_params_from_life_loglinear(const ParamVector& life) {
  if (life.beta.size() != 2 || !(life.beta[1] < 0.0))
    throw DomainError("mapping requires a loglinear curve with negative slope");
  const double b0 = life.beta[0], b1 = life.beta[1];
  return ParamVector{{-b0 / b1, 1.0 / b1}, life.sigma / std::fabs(b1)};
}

inline ParamVector life_params_from_strength_loglinear(const ParamVector& strength) {
  if (strength.beta.size() != 2 || !(strength.beta[1] < 0.0))
    throw DomainError("mapping requires a loglinear curve with negative slope");
  const double c0 = strength.beta[0], c1 = strength.beta[1];
  return ParamVector{{-c0 / c1, 1.0 / c1}, strength.sigma / std::fabs(c1)};
}

}  // namespace snlr
