#pragma once

// Censored log-likelihood for stress-life data and its maximization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "snlr/dist.hpp"
#include "snlr/errors.hpp"
#include "snlr/models.hpp"
#include "snlr/nelder_mead.hpp"

namespace snlr {

enum class Status { runout = 0, failure = 1 };

struct SNObservation {
  double stress = 0.0;
  double cycles = 0.0;
  Status status = Status::failure;
};

struct SNDataset {
  std::vector<SNObservation> observations;
  std::string label;

  std::size_t size() const noexcept { return observations.size(); }
  std::size_t failure_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(observations.begin(), observations.end(),
                      [](const SNObservation& o) { return o.status == Status::failure; }));
  }

  void validate() const {
    if (observations.empty()) throw DegenerateDataError("dataset is empty");
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const auto& o = observations[i];
      if (!(o.stress > 0.0 && std::isfinite(o.stress)) || !(o.cycles > 0.0 && std::isfinite(o.cycles))) {
        std::ostringstream os;
        os << "row " << i + 1 << ": stress and cycles must be positive and finite";
        throw DomainError(os.str());
      }
    }
  }
};

namespace detail {

// Contribution of one observation; no validation. Returns -inf for values
// the model cannot produce.
inline double observation_loglik(const ModelSpec& spec, const ParamVector& theta,
                                 const SNObservation& o) {
  const auto zs = life_standardized(spec, theta, o.cycles, o.stress);
  if (o.status == Status::failure) {
    if (!(zs.dz_dlogt > 0.0)) return -std::numeric_limits<double>::infinity();
    return std_log_pdf(spec.family(), zs.z) + std::log(zs.dz_dlogt) - std::log(o.cycles);
  }
  return std_log_sf(spec.family(), zs.z);
}

inline void check_observations(const ModelSpec& spec, const SNDataset& data) {
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& o = data.observations[i];
    try {
      spec.require_stress(o.stress);
      spec.require_cycles(o.cycles);
    } catch (const DomainError& e) {
      std::ostringstream os;
      os << "row " << i + 1 << ": " << e.what();
      throw DomainError(os.str());
    }
  }
}

}  // namespace detail

/// Log-likelihood value without input validation: -inf outside the
/// admissible parameter space. Used inside optimizers.
inline double loglik_unchecked(const ModelSpec& spec, const ParamVector& theta,
                               const SNDataset& data) {
  if (!spec.admissible(theta)) return -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& o : data.observations) {
    const double v = detail::observation_loglik(spec, theta, o);
    if (!std::isfinite(v)) return -std::numeric_limits<double>::infinity();
    sum += v;
  }
  return sum;
}

/// Sum over observations of delta*log f_N + (1-delta)*log(1 - F_N).
inline double loglik(const ModelSpec& spec, const ParamVector& theta, const SNDataset& data) {
  spec.require_admissible(theta);
  detail::check_observations(spec, data);
  return loglik_unchecked(spec, theta, data);
}

/// Maps an unconstrained optimizer vector onto a subset of theta. Sigma
/// enters as log sigma. The curve is re-expressed around the data center c:
/// the intercept coordinate is the curve value at c and, for logquadratic
/// curves, the linear coordinate is the slope at c. Both decorrelate the
/// coefficients the simplex has to move jointly.
class ParamTransform {
 public:
  ParamTransform(const ModelSpec& spec, std::vector<double> base_flat,
                 std::vector<std::size_t> optimized, double log_center)
      : spec_(&spec), base_(std::move(base_flat)), idx_(std::move(optimized)), c_(log_center) {
    auto has = [&](std::size_t i) { return std::find(idx_.begin(), idx_.end(), i) != idx_.end(); };
    centered_ = has(0);
    const bool quad = spec.curve().kind() == CurveKind::logquadratic;
    // With both shape coefficients free, optimize log(-slope) at the two
    // domain ends instead: every point is admissible and a maximum on the
    // monotonicity boundary is approached smoothly.
    log_slopes_ = quad && has(1) && has(2);
    centered_slope_ = quad && has(1) && !log_slopes_;
    lo_ = spec.curve_domain().log_lo();
    hi_ = spec.curve_domain().log_hi();
  }

  bool log_slopes() const noexcept { return log_slopes_; }

  std::size_t dim() const noexcept { return idx_.size(); }
  const std::vector<std::size_t>& indices() const noexcept { return idx_; }

  /// Optionally pins one non-optimized entry to a value before the curve is
  /// re-expressed.
  std::vector<double> to_flat(std::span<const double> u,
                              std::optional<std::pair<std::size_t, double>> pin = std::nullopt) const {
    std::vector<double> th(base_);
    if (pin) th[pin->first] = pin->second;
    double a0 = 0.0;
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      const auto i = idx_[k];
      if (i == spec_->sigma_index()) th[i] = std::exp(u[k]);
      else if (i == 0) a0 = u[k];
      else th[i] = u[k];
    }
    if (log_slopes_) {
      const double s_lo = -std::exp(th[1]), s_hi = -std::exp(th[2]);
      th[2] = (s_hi - s_lo) / (2.0 * (hi_ - lo_));
      th[1] = s_lo - 2.0 * th[2] * lo_;
    }
    if (centered_slope_) th[1] -= 2.0 * th[2] * c_;
    if (centered_) th[0] = a0 - spec_->curve().shape_value(std::span<const double>(th.data(), th.size() - 1), c_);
    return th;
  }

  ParamVector to_theta(std::span<const double> u) const { return ParamVector::from_flat(to_flat(u)); }

  std::vector<double> to_u(std::span<const double> flat) const {
    std::vector<double> u(idx_.size());
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      const auto i = idx_[k];
      if (i == spec_->sigma_index()) u[k] = std::log(flat[i]);
      else if (i == 0)
        u[k] = flat[0] + spec_->curve().shape_value(std::span<const double>(flat.data(), flat.size() - 1), c_);
      else if (log_slopes_ && (i == 1 || i == 2))
        u[k] = std::log(-(flat[1] + 2.0 * flat[2] * (i == 1 ? lo_ : hi_)));
      else if (i == 1 && centered_slope_) u[k] = flat[1] + 2.0 * flat[2] * c_;
      else u[k] = flat[i];
    }
    return u;
  }

  /// Standard deviation of each optimizer coordinate under a covariance of
  /// theta (delta method); 0 where the covariance carries no information.
  std::vector<double> coordinate_sd(const Eigen::MatrixXd& cov) const {
    std::vector<double> sd(idx_.size(), 0.0);
    const auto n = static_cast<Eigen::Index>(base_.size());
    if (cov.rows() != n || !cov.allFinite()) return sd;
    const auto u0 = to_u(base_);
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(idx_.size()), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      auto th = base_;
      const double h = 1e-6 * std::max(1.0, std::fabs(th[j]));
      th[j] += h;
      const auto u1 = to_u(th);
      for (std::size_t k = 0; k < idx_.size(); ++k) jac(static_cast<Eigen::Index>(k), j) = (u1[k] - u0[k]) / h;
    }
    const Eigen::MatrixXd v = jac * cov * jac.transpose();
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      const double d = v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      sd[k] = d > 0.0 ? std::sqrt(d) : 0.0;
    }
    return sd;
  }

 private:
  const ModelSpec* spec_;
  std::vector<double> base_;
  std::vector<std::size_t> idx_;
  double c_;
  bool centered_ = false;
  bool centered_slope_ = false;
  bool log_slopes_ = false;
  double lo_ = 0.0, hi_ = 0.0;
};

/// Mean log of the curve argument over the data (log stress or log cycles).
inline double curve_log_center(const ModelSpec& spec, const SNDataset& data) {
  double s = 0.0;
  for (const auto& o : data.observations)
    s += std::log(spec.orientation() == Orientation::life_specified ? o.stress : o.cycles);
  return s / static_cast<double>(data.size());
}

struct FitOptions {
  int starts = 8;
  int max_iter = 20000;  // objective evaluations per start
  double tol = 1e-12;
  std::uint64_t seed = 0x5eedf00dULL;
};

struct StartDiagnostic {
  std::vector<double> start;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int evaluations = 0;
};

struct FittedModel {
  ModelSpec spec;
  ParamVector theta_hat;
  double loglik_hat = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd wald_cov;  // empty when the information matrix is unusable
  std::string wald_note;
  bool converged = false;
  int iterations = 0;
  std::vector<StartDiagnostic> starts;
};

namespace detail {

// Least squares of the curve's log value on the log argument, treating
// runouts as failures; sigma start inflated by 1.5.
inline std::vector<double> least_squares_start(const ModelSpec& spec, const SNDataset& data) {
  const bool life = spec.orientation() == Orientation::life_specified;
  std::vector<double> xs, ys;
  for (const auto& o : data.observations) {
    xs.push_back(std::log(life ? o.stress : o.cycles));
    ys.push_back(std::log(life ? o.cycles : o.stress));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
  mx /= n; my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  std::vector<double> flat(spec.param_count(), 0.0);
  spec.apply_fixed(flat);
  double slope = spec.is_fixed(1) ? flat[1] : (sxx > 0.0 ? sxy / sxx : -1.0);
  if (!spec.is_fixed(1) && !(slope < 0.0)) slope = -1.0;
  flat[1] = slope;
  if (!spec.is_fixed(0)) flat[0] = my - slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - flat[0] - slope * xs[i];
    ss += r * r;
  }
  const auto si = spec.sigma_index();
  if (!spec.is_fixed(si)) {
    const double sd = std::sqrt(ss / n);
    flat[si] = 1.5 * (sd > 1e-8 ? sd : 0.1);
  }
  spec.apply_fixed(flat);
  return flat;
}

inline std::vector<double> default_steps(const ModelSpec& spec, std::span<const std::size_t> idx,
                                         std::span<const double> u, double sigma, bool log_slopes) {
  std::vector<double> step(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto i = idx[k];
    if (i == spec.sigma_index()) step[k] = 0.3;
    else if (log_slopes && i > 0) step[k] = 0.2;
    else if (i == 0) step[k] = 0.5 * sigma;
    else if (i == 1) step[k] = 0.2 * std::max(0.05, std::fabs(u[k]));
    else step[k] = 0.02;
  }
  return step;
}

}  // namespace detail

/// Inverse of the negative Hessian of the log-likelihood in (beta, sigma),
/// by central differences with h_j = max(1e-5, 1e-5*|theta_j|). Rows and
/// columns of fixed parameters are zero.
inline Eigen::MatrixXd wald_covariance(const ModelSpec& spec, const ParamVector& theta_hat,
                                       const SNDataset& data) {
  const auto flat = theta_hat.flat();
  const auto idx = spec.free_indices();
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(flat.size()),
                                              static_cast<Eigen::Index>(flat.size()));
  if (m == 0) return cov;
  std::vector<double> x0(idx.size()), h(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    x0[k] = flat[idx[k]];
    h[k] = std::max(1e-5, 1e-5 * std::fabs(x0[k]));
  }
  const Objective negll = [&](std::span<const double> x) {
    auto th = flat;
    for (std::size_t k = 0; k < idx.size(); ++k) th[idx[k]] = x[k];
    return -loglik_unchecked(spec, ParamVector::from_flat(th), data);
  };
  // Shrink the step when it crosses the admissibility boundary.
  Eigen::MatrixXd info;
  for (int shrink = 0; shrink < 4; ++shrink) {
    auto d = finite_difference_derivatives(negll, x0, h);
    info = 0.5 * (d.hessian + d.hessian.transpose());
    if (info.allFinite()) break;
    for (auto& hk : h) hk *= 0.1;
  }
  if (!info.allFinite()) throw SingularInformationError("Hessian is not finite at the estimate");
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success)
    throw SingularInformationError("negative Hessian is not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m, m));
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      cov(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b])) = inv(a, b);
  return cov;
}

/// Maximum likelihood fit by multi-start Nelder-Mead on (beta, log sigma),
/// polished with Newton steps. The best start wins.
inline FittedModel fit_ml(const ModelSpec& spec, const SNDataset& data, const FitOptions& opt = {}) {
  data.validate();
  detail::check_observations(spec, data);
  if (data.failure_count() == 0)
    throw DegenerateDataError("no failures in data: sigma is not estimable");

  const auto idx = spec.free_indices();
  const double center = curve_log_center(spec, data);
  const auto start0 = detail::least_squares_start(spec, data);
  ParamTransform tr(spec, start0, idx, center);

  const Objective negll = [&](std::span<const double> u) {
    return -loglik_unchecked(spec, tr.to_theta(u), data);
  };

  FittedModel fit{spec, ParamVector::from_flat(start0), -std::numeric_limits<double>::infinity(),
                  {}, {}, false, 0, {}};
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto u0 = tr.to_u(start0);
  const double sigma0 = start0[spec.sigma_index()];

  NelderMeadOptions nm;
  nm.max_evals = opt.max_iter;
  nm.f_tol = opt.tol;

  MinimizeResult best;
  bool best_converged = false;
  const int nstarts = std::max(1, opt.starts);
  for (int s = 0; s < nstarts; ++s) {
    std::vector<double> u = u0;
    if (s > 0) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        u = u0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const auto i = idx[k];
          const double g = gauss(rng);
          if (i == spec.sigma_index()) u[k] += 0.4 * g;
          else if (i == 0) u[k] += 0.5 * sigma0 * g;
          else if (tr.log_slopes()) u[k] += 0.25 * g;
          else if (i == 1) u[k] += 0.25 * std::fabs(u0[k]) * g;
          else u[k] += 0.01 * g;
        }
        if (std::isfinite(negll(u))) break;
      }
    }
    StartDiagnostic diag;
    diag.start = tr.to_flat(u);
    if (!std::isfinite(negll(u))) {
      fit.starts.push_back(diag);
      continue;
    }
    auto r = nelder_mead(negll, u, detail::default_steps(spec, idx, u, sigma0, tr.log_slopes()), nm);
    newton_polish(negll, r);
    diag.loglik = -r.f;
    diag.converged = r.converged;
    diag.evaluations = r.evals;
    fit.iterations += r.iterations;
    fit.starts.push_back(diag);
    if (r.converged && (!best_converged || r.f < best.f)) {
      best = r;
      best_converged = true;
    } else if (!best_converged && r.f < best.f) {
      best = r;
    }
  }
  if (!best_converged) {
    std::vector<std::string> trace;
    for (std::size_t s = 0; s < fit.starts.size(); ++s) {
      std::ostringstream os;
      os << "start " << s << ": loglik=" << fit.starts[s].loglik
         << " converged=" << fit.starts[s].converged << " evals=" << fit.starts[s].evaluations;
      trace.push_back(os.str());
    }
    throw OptimizationError("maximum likelihood: no start converged", trace);
  }
  fit.theta_hat = tr.to_theta(best.x);
  fit.loglik_hat = loglik_unchecked(spec, fit.theta_hat, data);
  fit.converged = true;
  try {
    fit.wald_cov = wald_covariance(spec, fit.theta_hat, data);
  } catch (const SingularInformationError& e) {
    fit.wald_note = e.what();  // LR inference does not need it
  }
  return fit;
}

}  // namespace snlr
