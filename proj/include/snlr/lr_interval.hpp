#pragma once

// Likelihood-ratio confidence intervals for scalar functions of theta.
//
// The interval endpoints are the extrema of xi(theta) over the level set
// loglik(theta) = k, k = loglik(theta_hat) - chi2_{1-alpha;1}/2. They are
// found by root-finding on the profile
//
//     lp(v) = max { loglik(theta) : xi(theta) = v }
//
// on each side of the estimate. Every target here is affine in the curve
// intercept b0, so the constraint xi(theta) = v is solved exactly for b0 and
// the profile is an unconstrained maximization over the remaining
// parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <Eigen/Dense>

#include "snlr/dist.hpp"
#include "snlr/errors.hpp"
#include "snlr/likelihood.hpp"
#include "snlr/models.hpp"
#include "snlr/nelder_mead.hpp"

namespace snlr {

enum class TargetKind { life_cdf, life_quantile, strength_cdf, strength_quantile, raw_parameter };

/// Scale on which an interval is reported (and its endpoints root-found).
enum class Transform { identity, log };

inline std::string_view to_string(TargetKind k) {
  switch (k) {
    case TargetKind::life_cdf: return "life-cdf";
    case TargetKind::life_quantile: return "life-quantile";
    case TargetKind::strength_cdf: return "strength-cdf";
    case TargetKind::strength_quantile: return "strength-quantile";
    case TargetKind::raw_parameter: return "raw-parameter";
  }
  return "?";
}

inline TargetKind parse_target_kind(std::string_view s) {
  if (s == "life-cdf") return TargetKind::life_cdf;
  if (s == "life-quantile") return TargetKind::life_quantile;
  if (s == "strength-cdf") return TargetKind::strength_cdf;
  if (s == "strength-quantile") return TargetKind::strength_quantile;
  if (s == "raw-parameter") return TargetKind::raw_parameter;
  throw DomainError("unknown target kind '" + std::string(s) + "'");
}

/// Descriptor of xi(theta).
///   life_cdf:          F_N(arg; at)   arg = cycles t,  at = stress S_e
///   life_quantile:     t_p(at)        arg = p,         at = stress S_e
///   strength_cdf:      F_X(arg; at)   arg = stress x,  at = cycles N_e
///   strength_quantile: x_p(at)        arg = p,         at = cycles N_e
///   raw_parameter:     theta[index]
struct ScalarTarget {
  TargetKind kind = TargetKind::life_quantile;
  double arg = 0.5;
  double at = 1.0;
  std::size_t index = 0;
  Transform transform = Transform::identity;

  static ScalarTarget life_cdf(double t, double stress) { return {TargetKind::life_cdf, t, stress}; }
  static ScalarTarget life_quantile(double p, double stress) {
    return {TargetKind::life_quantile, p, stress};
  }
  static ScalarTarget strength_cdf(double x, double cycles) {
    return {TargetKind::strength_cdf, x, cycles};
  }
  static ScalarTarget strength_quantile(double p, double cycles) {
    return {TargetKind::strength_quantile, p, cycles};
  }
  static ScalarTarget parameter(std::size_t i) { return {TargetKind::raw_parameter, 0.0, 0.0, i}; }

  ScalarTarget with_transform(Transform t) const {
    ScalarTarget s = *this;
    s.transform = t;
    return s;
  }

  bool is_cdf() const { return kind == TargetKind::life_cdf || kind == TargetKind::strength_cdf; }
  bool is_quantile() const {
    return kind == TargetKind::life_quantile || kind == TargetKind::strength_quantile;
  }

  void validate(const ModelSpec& spec) const {
    switch (kind) {
      case TargetKind::life_cdf:
        spec.require_stress(at);
        spec.require_cycles(arg);
        break;
      case TargetKind::life_quantile:
        spec.require_stress(at);
        detail::require_open_unit(arg, "life_quantile target");
        break;
      case TargetKind::strength_cdf:
        spec.require_stress(arg);
        spec.require_cycles(at);
        break;
      case TargetKind::strength_quantile:
        spec.require_cycles(at);
        detail::require_open_unit(arg, "strength_quantile target");
        break;
      case TargetKind::raw_parameter:
        if (index >= spec.param_count()) throw DomainError("parameter index out of range");
        if (spec.is_fixed(index)) throw PreconditionError("target parameter is fixed");
        break;
    }
    if (!is_cdf() && !is_quantile() && index != spec.sigma_index() && transform == Transform::log)
      throw UnsupportedError("log transform of a regression coefficient is not supported");
  }
};

// Internal coordinate u of a target: log of a quantile, the standardized z of
// a cdf, b_i for a coefficient, log sigma for sigma. u is increasing in xi.
namespace detail {

inline double target_u(const ModelSpec& spec, const ParamVector& th, const ScalarTarget& t) {
  const auto& c = spec.curve();
  const bool life_spec = spec.orientation() == Orientation::life_specified;
  switch (t.kind) {
    case TargetKind::life_quantile: {
      const double z = std_quantile(spec.family(), t.arg);
      if (life_spec) return c.log_value(th.beta, std::log(t.at)) + z * th.sigma;
      return std::log(invert_curve(c, th.beta, std::log(t.at) - z * th.sigma, *spec.cycles_domain()));
    }
    case TargetKind::life_cdf:
      return life_standardized(spec, th, t.arg, t.at).z;
    case TargetKind::strength_cdf:
      if (life_spec) return (std::log(t.at) - c.log_value(th.beta, std::log(t.arg))) / th.sigma;
      return (std::log(t.arg) - c.log_value(th.beta, std::log(t.at))) / th.sigma;
    case TargetKind::strength_quantile: {
      const double z = std_quantile(spec.family(), t.arg);
      if (life_spec)
        return std::log(invert_curve(c, th.beta, std::log(t.at) - z * th.sigma, spec.stress_domain()));
      return c.log_value(th.beta, std::log(t.at)) + z * th.sigma;
    }
    case TargetKind::raw_parameter:
      return t.index == spec.sigma_index() ? std::log(th.sigma) : th.beta[t.index];
  }
  return 0.0;
}

inline double natural_from_u(const ModelSpec& spec, const ScalarTarget& t, double u) {
  if (t.is_quantile()) return std::exp(u);
  if (t.is_cdf()) return std_cdf(spec.family(), u);
  return t.index == spec.sigma_index() ? std::exp(u) : u;
}

// Reported coordinate r = T(xi) and its inverse.
inline double reported_from_u(const ModelSpec& spec, const ScalarTarget& t, double u) {
  if (t.transform == Transform::log) {
    if (t.is_cdf()) return std_log_cdf(spec.family(), u);
    return u;  // quantiles and sigma are already logged in u
  }
  return natural_from_u(spec, t, u);
}

inline double u_from_reported(const ModelSpec& spec, const ScalarTarget& t, double r) {
  if (t.transform == Transform::log) {
    if (t.is_cdf()) return std_quantile(spec.family(), std::exp(r));
    return r;
  }
  if (t.is_quantile()) return std::log(r);
  if (t.is_cdf()) return std_quantile(spec.family(), r);
  return t.index == spec.sigma_index() ? std::log(r) : r;
}

// b0 = A - B*sigma - shape(L) solves xi(theta) = v for the intercept.
struct InterceptSolve {
  double a;
  double b;
  double log_arg;
};

inline InterceptSolve intercept_solve(const ModelSpec& spec, const ScalarTarget& t, double u) {
  const bool life_spec = spec.orientation() == Orientation::life_specified;
  switch (t.kind) {
    case TargetKind::life_quantile: {
      const double z = std_quantile(spec.family(), t.arg);
      return life_spec ? InterceptSolve{u, z, std::log(t.at)} : InterceptSolve{std::log(t.at), z, u};
    }
    case TargetKind::life_cdf:
      return life_spec ? InterceptSolve{std::log(t.arg), u, std::log(t.at)}
                       : InterceptSolve{std::log(t.at), u, std::log(t.arg)};
    case TargetKind::strength_cdf:
      return life_spec ? InterceptSolve{std::log(t.at), u, std::log(t.arg)}
                       : InterceptSolve{std::log(t.arg), u, std::log(t.at)};
    case TargetKind::strength_quantile: {
      const double z = std_quantile(spec.family(), t.arg);
      return life_spec ? InterceptSolve{std::log(t.at), z, u} : InterceptSolve{u, z, std::log(t.at)};
    }
    case TargetKind::raw_parameter: break;
  }
  throw PreconditionError("raw-parameter targets do not solve for the intercept");
}

inline constexpr double kLogSigmaBound = 30.0;

// Admissible range of u for a target.
inline std::pair<double, double> u_bounds(const ModelSpec& spec, const ScalarTarget& t) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const bool life_spec = spec.orientation() == Orientation::life_specified;
  switch (t.kind) {
    case TargetKind::life_quantile:
      if (life_spec) return {-inf, inf};
      return {spec.cycles_domain()->log_lo(), spec.cycles_domain()->log_hi()};
    case TargetKind::strength_quantile:
      return {spec.stress_domain().log_lo(), spec.stress_domain().log_hi()};
    case TargetKind::life_cdf:
    case TargetKind::strength_cdf:
      return spec.family() == ErrorFamily::sev ? std::pair{-40.0, 3.9} : std::pair{-40.0, 40.0};
    case TargetKind::raw_parameter:
      if (t.index == spec.sigma_index()) return {-kLogSigmaBound, kLogSigmaBound};
      return {-inf, inf};
  }
  return {-inf, inf};
}

}  // namespace detail

/// xi(theta) on its natural scale.
inline double evaluate_target(const ModelSpec& spec, const ParamVector& theta, const ScalarTarget& t) {
  switch (t.kind) {
    case TargetKind::life_cdf: return life_cdf(spec, theta, t.arg, t.at);
    case TargetKind::life_quantile: return life_quantile(spec, theta, t.arg, t.at);
    case TargetKind::strength_cdf: return strength_cdf(spec, theta, t.arg, t.at);
    case TargetKind::strength_quantile: return strength_quantile(spec, theta, t.arg, t.at);
    case TargetKind::raw_parameter: return theta[t.index];
  }
  return 0.0;
}

/// T(xi(theta)), the reported value.
inline double evaluate_reported(const ModelSpec& spec, const ParamVector& theta, const ScalarTarget& t) {
  return detail::reported_from_u(spec, t, detail::target_u(spec, theta, t));
}

enum class BoundKind { finite, boundary, failed };

inline std::string_view to_string(BoundKind k) {
  switch (k) {
    case BoundKind::finite: return "finite";
    case BoundKind::boundary: return "boundary";
    case BoundKind::failed: return "failed";
  }
  return "?";
}

struct Endpoint {
  double value = std::numeric_limits<double>::quiet_NaN();
  BoundKind kind = BoundKind::failed;
  std::vector<double> witness;  // theta* on the level set
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();  // |loglik(theta*) - k|
  std::string note;
};

struct LRInterval {
  double estimate = 0.0;
  Endpoint lower;
  Endpoint upper;
  double level = 0.0;     // 1 - alpha
  double cutoff_k = 0.0;  // loglik(theta_hat) - chi2/2
  std::vector<std::string> warnings;
};

enum class Side { lower, upper };

/// Profile log-likelihood of one target: lp(u) = max loglik subject to the
/// target's internal coordinate being u. Keeps a warm start between calls,
/// so one instance should not be shared across threads.
class ProfileLikelihood {
 public:
  ProfileLikelihood(const FittedModel& fit, const SNDataset& data, ScalarTarget target)
      : fit_(&fit), data_(&data), target_(target) {
    const auto& spec = fit.spec;
    target_.validate(spec);
    eliminated_ = target_.kind == TargetKind::raw_parameter ? target_.index : 0;
    if (spec.is_fixed(eliminated_))
      throw UnsupportedError("profiling a function target requires a free intercept");
    for (auto i : spec.free_indices())
      if (i != eliminated_) rest_.push_back(i);
    base_ = fit.theta_hat.flat();
    transform_.emplace(spec, base_, rest_, curve_log_center(spec, data));
    u_hat_ = detail::target_u(spec, fit.theta_hat, target_);
    const auto bounds = detail::u_bounds(spec, target_);
    u_lo_ = bounds.first;
    u_hi_ = bounds.second;
    if (target_.is_cdf()) {
      u_hat_ = std::clamp(u_hat_, u_lo_, u_hi_);  // saturated probability
    } else if (!(u_hat_ >= u_lo_ && u_hat_ <= u_hi_)) {
      throw DomainError(std::string(to_string(target_.kind)) + ": estimate lies outside the working domain");
    }
    start_hat_ = transform_->to_u(base_);
    reset_warm_start();
    steps_ = inner_steps();
  }

  double u_hat() const noexcept { return u_hat_; }
  double u_lo() const noexcept { return u_lo_; }
  double u_hi() const noexcept { return u_hi_; }
  const ScalarTarget& target() const noexcept { return target_; }

  void reset_warm_start() { warm_ = start_hat_; }

  /// Full parameter vector for a given u and remaining-parameter vector.
  std::vector<double> assemble(double u, std::span<const double> rest_u) const {
    const auto& spec = fit_->spec;
    if (target_.kind == TargetKind::raw_parameter) {
      const double v = eliminated_ == spec.sigma_index() ? std::exp(u) : u;
      return transform_->to_flat(rest_u, std::pair{eliminated_, v});
    }
    auto flat = transform_->to_flat(rest_u);
    const auto s = detail::intercept_solve(spec, target_, u);
    flat[0] = s.a - s.b * flat[spec.sigma_index()] -
              spec.curve().shape_value(std::span<const double>(flat.data(), flat.size() - 1), s.log_arg);
    return flat;
  }

  struct Value {
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> theta;
    bool converged = false;
  };

  Value evaluate(double u) {
    const auto& spec = fit_->spec;
    const Objective negll = [&](std::span<const double> ru) {
      for (std::size_t k = 0; k < rest_.size(); ++k)
        if (rest_[k] == spec.sigma_index() && std::fabs(ru[k]) > detail::kLogSigmaBound)
          return std::numeric_limits<double>::infinity();
      return -loglik_unchecked(spec, ParamVector::from_flat(assemble(u, ru)), *data_);
    };
    std::vector<double> start = warm_;
    // A warm start that drifted far toward the monotonicity boundary sits on
    // a flat part of the objective; pull it back so the simplex can move.
    if (transform_->log_slopes())
      for (std::size_t k = 0; k < rest_.size(); ++k)
        if (rest_[k] == 1 || rest_[k] == 2) start[k] = std::max(start[k], start_hat_[k] - 4.0);
    if (!std::isfinite(negll(start))) start = start_hat_;
    Value v;
    if (!std::isfinite(negll(start))) {
      v.theta = assemble(u, start);
      return v;
    }
    NelderMeadOptions nm;
    nm.f_tol = 1e-13;
    nm.x_tol = 1e-9;
    nm.max_evals = 8000;
    auto r = nelder_mead(negll, start, steps_, nm);
    newton_polish(negll, r);
    v.loglik = -r.f;
    v.theta = assemble(u, r.x);
    v.converged = r.converged;
    if (std::isfinite(r.f)) warm_ = r.x;
    ++evaluations_;
    return v;
  }

  int evaluations() const noexcept { return evaluations_; }

  /// Delta-method standard error of u from the fit's Wald covariance; NaN
  /// when unavailable.
  double wald_se_u() const {
    const auto& spec = fit_->spec;
    const auto flat = fit_->theta_hat.flat();
    if (fit_->wald_cov.rows() != static_cast<Eigen::Index>(flat.size())) return std::nan("");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(flat.size()));
    for (auto i : spec.free_indices()) {
      const double h = std::max(1e-6, 1e-6 * std::fabs(flat[i]));
      auto up = flat, dn = flat;
      up[i] += h;
      dn[i] -= h;
      try {
        g(static_cast<Eigen::Index>(i)) =
            (detail::target_u(spec, ParamVector::from_flat(up), target_) -
             detail::target_u(spec, ParamVector::from_flat(dn), target_)) / (2.0 * h);
      } catch (const std::exception&) {
        return std::nan("");
      }
    }
    const double var = g.dot(fit_->wald_cov * g);
    return var >= 0.0 ? std::sqrt(var) : std::nan("");
  }

 private:
  std::vector<double> inner_steps() const {
    const auto& spec = fit_->spec;
    const auto sd = transform_->coordinate_sd(fit_->wald_cov);
    const double sigma = fit_->theta_hat.sigma;
    std::vector<double> st(rest_.size());
    for (std::size_t k = 0; k < rest_.size(); ++k) {
      const auto i = rest_[k];
      if (sd[k] > 0.0) st[k] = 0.5 * sd[k];
      else if (i == spec.sigma_index()) st[k] = 0.1;
      else if (i == 0) st[k] = 0.2 * sigma;
      else st[k] = 0.05 * std::max(0.1, std::fabs(base_[i]));
    }
    return st;
  }

  const FittedModel* fit_;
  const SNDataset* data_;
  ScalarTarget target_;
  std::size_t eliminated_ = 0;
  std::vector<std::size_t> rest_;
  std::vector<double> base_;
  std::optional<ParamTransform> transform_;
  double u_hat_ = 0.0;
  double u_lo_ = 0.0, u_hi_ = 0.0;
  std::vector<double> start_hat_;
  std::vector<double> warm_;
  std::vector<double> steps_;
  int evaluations_ = 0;
};

/// Likelihood cutoff k for a two-sided 100(1-alpha)% interval. alpha = 1
/// gives the degenerate cutoff k = loglik(theta_hat).
inline double lr_cutoff(double loglik_hat, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
  return loglik_hat - 0.5 * chisq1_quantile(1.0 - alpha);
}

namespace detail {

inline Endpoint make_endpoint(const ModelSpec& spec, const ScalarTarget& t, double u, BoundKind kind,
                              const ProfileLikelihood::Value& v, double k) {
  Endpoint e;
  e.value = reported_from_u(spec, t, u);
  e.kind = kind;
  e.witness = v.theta;
  e.loglik = v.loglik;
  e.constraint_residual = std::fabs(v.loglik - k);
  return e;
}

inline Endpoint search_side(ProfileLikelihood& prof, const FittedModel& fit, const SNDataset& data,
                            double k, double chi2, Side side, std::vector<std::string>& warnings) {
  (void)data;
  const auto& spec = fit.spec;
  const auto& t = prof.target();
  const double dir = side == Side::upper ? 1.0 : -1.0;
  const double u_hat = prof.u_hat();
  prof.reset_warm_start();

  if (chi2 == 0.0) {
    ProfileLikelihood::Value v{fit.loglik_hat, fit.theta_hat.flat(), true};
    return make_endpoint(spec, t, u_hat, BoundKind::finite, v, k);
  }

  double se = prof.wald_se_u();
  if (!(se > 0.0) || !std::isfinite(se)) se = 0.1 * std::max(1.0, std::fabs(u_hat));
  double step = std::sqrt(chi2) * se;
  const double bound = side == Side::upper ? prof.u_hi() : prof.u_lo();

  double u_in = u_hat;
  double l_in = fit.loglik_hat;
  ProfileLikelihood::Value v_in{fit.loglik_hat, fit.theta_hat.flat(), true};
  double u_out = u_hat;
  ProfileLikelihood::Value v_out;
  bool bracketed = false;
  for (int it = 0; it < 80; ++it) {
    double u_try = u_in + dir * step;
    bool at_bound = false;
    if ((side == Side::upper && u_try >= bound) || (side == Side::lower && u_try <= bound)) {
      u_try = bound;
      at_bound = true;
    }
    auto v = prof.evaluate(u_try);
    if (!(v.loglik >= k)) {
      u_out = u_try;
      v_out = std::move(v);
      bracketed = true;
      break;
    }
    if (v.loglik > l_in + 1e-7) {
      std::ostringstream os;
      os << to_string(t.kind) << ": profile not monotone on the "
         << (side == Side::upper ? "upper" : "lower") << " side near u=" << u_try;
      warnings.push_back(os.str());
    }
    u_in = u_try;
    l_in = v.loglik;
    v_in = std::move(v);
    if (at_bound) {
      auto e = make_endpoint(spec, t, u_in, BoundKind::boundary, v_in, k);
      e.note = "level set does not close before the parameter-space boundary";
      return e;
    }
    step *= 1.6;
  }
  if (!bracketed) {
    auto e = make_endpoint(spec, t, u_in, BoundKind::boundary, v_in, k);
    e.note = "no crossing found within the search range";
    return e;
  }

  // Root of lp(u(r)) - k in the reported coordinate r.
  double r_in = reported_from_u(spec, t, u_in);
  double r_out = reported_from_u(spec, t, u_out);
  const double f_in = l_in - k;
  const double f_out = std::isfinite(v_out.loglik) ? v_out.loglik - k : -1e6;
  if (r_in == r_out) {
    auto e = make_endpoint(spec, t, u_out, BoundKind::boundary, v_out, k);
    e.note = "reported scale saturated";
    return e;
  }
  auto f = [&](double r) {
    if (r == r_in) return f_in;
    if (r == r_out) return f_out;
    const auto v = prof.evaluate(u_from_reported(spec, t, r));
    return std::isfinite(v.loglik) ? v.loglik - k : -1e6;
  };
  double a = r_in, b = r_out, fa = f_in, fb = f_out;
  if (a > b) { std::swap(a, b); std::swap(fa, fb); }
  std::uintmax_t max_iter = 200;
  boost::math::tools::eps_tolerance<double> tol(48);
  std::pair<double, double> root;
  try {
    root = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, max_iter);
  } catch (const std::exception& ex) {
    Endpoint e;
    e.kind = BoundKind::failed;
    e.note = std::string("root finding failed: ") + ex.what();
    return e;
  }
  // Pick the bracket end on the inside of the level set, then polish the
  // witness at the midpoint.
  const double r_star = 0.5 * (root.first + root.second);
  const double u_star = u_from_reported(spec, t, r_star);
  auto v = prof.evaluate(u_star);
  if (!std::isfinite(v.loglik) || std::fabs(v.loglik - k) > 1e-3) {
    auto e = make_endpoint(spec, t, u_star, BoundKind::boundary, v, k);
    e.note = "profile jumps across the cutoff (admissibility boundary)";
    return e;
  }
  auto e = make_endpoint(spec, t, u_star, BoundKind::finite, v, k);
  e.value = r_star;
  return e;
}

}  // namespace detail

/// One side of the LR interval.
inline Endpoint lr_bound(const FittedModel& fit, const SNDataset& data, const ScalarTarget& target,
                         double alpha, Side side, std::vector<std::string>* warnings = nullptr) {
  if (!fit.converged) throw PreconditionError("fitted model did not converge");
  const double chi2 = chisq1_quantile(1.0 - alpha);
  const double k = lr_cutoff(fit.loglik_hat, alpha);
  ProfileLikelihood prof(fit, data, target);
  std::vector<std::string> w;
  auto e = detail::search_side(prof, fit, data, k, chi2, side, w);
  if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
  return e;
}

/// Two-sided 100(1-alpha)% likelihood-ratio interval.
inline LRInterval lr_interval(const FittedModel& fit, const SNDataset& data, const ScalarTarget& target,
                              double alpha) {
  if (!fit.converged) throw PreconditionError("fitted model did not converge");
  const double chi2 = chisq1_quantile(1.0 - alpha);
  LRInterval out;
  out.level = 1.0 - alpha;
  out.cutoff_k = lr_cutoff(fit.loglik_hat, alpha);
  ProfileLikelihood prof(fit, data, target);
  out.estimate = detail::reported_from_u(fit.spec, prof.target(), prof.u_hat());
  out.lower = detail::search_side(prof, fit, data, out.cutoff_k, chi2, Side::lower, out.warnings);
  out.upper = detail::search_side(prof, fit, data, out.cutoff_k, chi2, Side::upper, out.warnings);
  return out;
}

struct ProfilePoint {
  double value = 0.0;     // theta_i
  double relative = 0.0;  // R(theta_i) in (0,1]
  bool ok = false;
};

/// Profile relative likelihood R(theta_i) = max over nuisance parameters of
/// L(theta)/L(theta_hat), on a grid of theta_i values.
inline std::vector<ProfilePoint> profile_relative(const FittedModel& fit, const SNDataset& data,
                                                  std::size_t param_index, std::span<const double> grid) {
  if (!fit.converged) throw PreconditionError("fitted model did not converge");
  ProfileLikelihood prof(fit, data, ScalarTarget::parameter(param_index));
  const bool is_sigma = param_index == fit.spec.sigma_index();
  const double hat = fit.theta_hat[param_index];
  std::vector<ProfilePoint> out(grid.size());
  // Walk outward from the estimate on each side so warm starts stay close.
  std::vector<std::size_t> above, below;
  for (std::size_t i = 0; i < grid.size(); ++i) (grid[i] >= hat ? above : below).push_back(i);
  std::sort(above.begin(), above.end(), [&](auto a, auto b) { return grid[a] < grid[b]; });
  std::sort(below.begin(), below.end(), [&](auto a, auto b) { return grid[a] > grid[b]; });
  for (const auto* side : {&above, &below}) {
    prof.reset_warm_start();
    for (auto i : *side) {
      auto& pt = out[i];
      pt.value = grid[i];
      if (is_sigma && !(grid[i] > 0.0)) continue;
      const double u = is_sigma ? std::log(grid[i]) : grid[i];
      const auto v = prof.evaluate(u);
      if (!std::isfinite(v.loglik)) continue;
      pt.relative = std::min(1.0, std::exp(v.loglik - fit.loglik_hat));
      pt.ok = v.converged;
    }
  }
  return out;
}

/// Outermost crossings of a profile curve with a relative-likelihood level,
/// by linear interpolation of log R between grid points. Returns NaN for a
/// side with no crossing.
inline std::pair<double, double> profile_crossings(std::span<const ProfilePoint> curve, double level) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::pair<double, double> out{nan, nan};
  const double ll = std::log(level);
  auto lr = [](const ProfilePoint& p) {
    return p.relative > 0.0 ? std::log(p.relative) : -std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const double a = lr(curve[i]), b = lr(curve[i + 1]);
    if (a < ll && b >= ll && std::isnan(out.first)) {
      const double w = std::isfinite(a) ? (ll - a) / (b - a) : 1.0;
      out.first = curve[i].value + w * (curve[i + 1].value - curve[i].value);
    }
    if (a >= ll && b < ll) {
      const double w = std::isfinite(b) ? (a - ll) / (a - b) : 0.0;
      out.second = curve[i].value + w * (curve[i + 1].value - curve[i].value);
    }
  }
  return out;
}

struct WaldInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double se_u = 0.0;  // standard error on the transformed scale
};

/// Wald interval: estimate +/- z_{1-alpha/2} * se on the log scale for
/// quantiles (and sigma), on the Phi^{-1} scale for cdfs; then
/// back-transformed. se by the delta method.
inline WaldInterval wald_interval(const FittedModel& fit, const ScalarTarget& target, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
  const auto& spec = fit.spec;
  target.validate(spec);
  const auto flat = fit.theta_hat.flat();
  const auto n = static_cast<Eigen::Index>(flat.size());
  if (fit.wald_cov.rows() != n || !fit.wald_cov.allFinite())
    throw SingularInformationError("Wald covariance unavailable");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (auto i : spec.free_indices()) {
    const double h = std::max(1e-6, 1e-6 * std::fabs(flat[i]));
    auto up = flat, dn = flat;
    up[i] += h;
    dn[i] -= h;
    g(static_cast<Eigen::Index>(i)) = (detail::target_u(spec, ParamVector::from_flat(up), target) -
                                       detail::target_u(spec, ParamVector::from_flat(dn), target)) /
                                      (2.0 * h);
  }
  const double var = g.dot(fit.wald_cov * g);
  const double se = var > 0.0 ? std::sqrt(var) : 0.0;
  const double u = detail::target_u(spec, fit.theta_hat, target);
  const double zq = alpha >= 1.0 ? 0.0 : std_quantile(ErrorFamily::normal, 1.0 - alpha / 2.0);
  WaldInterval w;
  w.se_u = se;
  w.estimate = detail::reported_from_u(spec, target, u);
  w.lower = detail::reported_from_u(spec, target, u - zq * se);
  w.upper = detail::reported_from_u(spec, target, u + zq * se);
  return w;
}

}  // namespace snlr
