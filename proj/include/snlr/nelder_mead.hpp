#pragma once

// Derivative-free minimization (Nelder-Mead downhill simplex) with restarts,
// plus an optional damped-Newton polish on a finite-difference Hessian.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace snlr {

struct NelderMeadOptions {
  int max_evals = 20000;
  double f_tol = 1e-12;   // spread of f over the simplex
  double x_tol = 1e-10;   // simplex diameter, per coordinate (relative to max(1,|x|))
  int max_restarts = 6;   // restart from the best vertex until no improvement
  double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
};

struct MinimizeResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline MinimizeResult nelder_mead_once(const Objective& f, std::vector<double> x0,
                                       std::span<const double> step,
                                       const NelderMeadOptions& opt, int eval_budget) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step[i];
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (res.evals < eval_budget) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    {
      std::vector<std::vector<double>> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (std::size_t k = 0; k <= n; ++k) {
        s2[k] = std::move(simplex[order[k]]);
        f2[k] = fv[order[k]];
      }
      simplex.swap(s2);
      fv.swap(f2);
    }
    ++res.iterations;

    double diam = 0.0;
    for (std::size_t k = 1; k <= n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        diam = std::max(diam, std::fabs(simplex[k][i] - simplex[0][i]) /
                                  std::max(1.0, std::fabs(simplex[0][i])));
    const double spread = std::fabs(fv[n] - fv[0]);
    if (std::isfinite(fv[0]) && spread <= opt.f_tol * std::max(1.0, std::fabs(fv[0])) &&
        diam <= opt.x_tol) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / static_cast<double>(n);

    const auto& worst = simplex[n];
    for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + opt.reflect * (centroid[i] - worst[i]);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + opt.expand * (xr[i] - centroid[i]);
      const double fe = eval(xe);
      if (fe < fr) { simplex[n] = xe; fv[n] = fe; }
      else { simplex[n] = xr; fv[n] = fr; }
      continue;
    }
    if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
      continue;
    }
    const bool outside = fr < fv[n];
    for (std::size_t i = 0; i < n; ++i)
      xc[i] = outside ? centroid[i] + opt.contract * (xr[i] - centroid[i])
                      : centroid[i] + opt.contract * (worst[i] - centroid[i]);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[n])) {
      simplex[n] = xc;
      fv[n] = fc;
      continue;
    }
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t i = 0; i < n; ++i)
        simplex[k][i] = simplex[0][i] + opt.shrink * (simplex[k][i] - simplex[0][i]);
      fv[k] = eval(simplex[k]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = simplex[best];
  res.f = fv[best];
  return res;
}

}  // namespace detail

/// Nelder-Mead with restarts. Each restart rebuilds the simplex around the
/// incumbent with a step shrunk toward the last accepted movement.
inline MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0,
                                  std::vector<double> step, const NelderMeadOptions& opt = {}) {
  if (x0.empty()) {
    MinimizeResult r;
    r.f = f(x0);
    r.evals = 1;
    r.converged = std::isfinite(r.f);
    return r;
  }
  MinimizeResult best;
  best.x = x0;
  int total = 0, iters = 0;
  bool converged = false;
  for (int restart = 0; restart <= opt.max_restarts && total < opt.max_evals; ++restart) {
    auto r = detail::nelder_mead_once(f, best.x, step, opt, opt.max_evals - total);
    total += r.evals;
    iters += r.iterations;
    const double improvement = best.f - r.f;
    const bool better = r.f < best.f || !std::isfinite(best.f);
    if (better) {
      for (std::size_t i = 0; i < step.size(); ++i) {
        const double moved = std::fabs(r.x[i] - best.x[i]);
        step[i] = std::max({moved, 1e-3 * std::fabs(step[i]), 1e-7 * std::max(1.0, std::fabs(r.x[i]))});
      }
      best.x = r.x;
      best.f = r.f;
    } else {
      for (auto& s : step) s *= 0.1;
    }
    converged = r.converged;
    if (r.converged && std::isfinite(improvement) &&
        improvement <= opt.f_tol * std::max(1.0, std::fabs(best.f)))
      break;
  }
  best.evals = total;
  best.iterations = iters;
  best.converged = converged && std::isfinite(best.f);
  return best;
}

/// Central-difference gradient and Hessian with per-coordinate step h_j.
struct FiniteDifferenceDerivatives {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

inline FiniteDifferenceDerivatives finite_difference_derivatives(const Objective& f,
                                                                 std::span<const double> x,
                                                                 std::span<const double> h) {
  const auto n = static_cast<Eigen::Index>(x.size());
  FiniteDifferenceDerivatives d{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n)};
  std::vector<double> p(x.begin(), x.end());
  const double f0 = f(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = x[i] + h[i];
    const double fp = f(p);
    p[i] = x[i] - h[i];
    const double fm = f(p);
    p[i] = x[i];
    d.gradient(i) = (fp - fm) / (2.0 * h[i]);
    d.hessian(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      p[i] = x[i] + h[i]; p[j] = x[j] + h[j];
      const double fpp = f(p);
      p[j] = x[j] - h[j];
      const double fpm = f(p);
      p[i] = x[i] - h[i];
      const double fmm = f(p);
      p[j] = x[j] + h[j];
      const double fmp = f(p);
      p[i] = x[i]; p[j] = x[j];
      d.hessian(i, j) = d.hessian(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  return d;
}

/// A few damped Newton steps on a minimization problem, starting at a point
/// already near the optimum. Only improving steps are accepted.
inline void newton_polish(const Objective& f, MinimizeResult& r, int max_steps = 6) {
  const std::size_t n = r.x.size();
  if (n == 0 || !std::isfinite(r.f)) return;
  for (int it = 0; it < max_steps; ++it) {
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i) h[i] = 1e-4 * std::max(1.0, std::fabs(r.x[i]));
    const auto d = finite_difference_derivatives(f, r.x, h);
    r.evals += static_cast<int>(2 * n * n + 1);
    Eigen::LLT<Eigen::MatrixXd> llt(d.hessian);
    if (llt.info() != Eigen::Success) return;
    const Eigen::VectorXd delta = llt.solve(d.gradient);
    if (!delta.allFinite()) return;
    bool accepted = false;
    for (double damp = 1.0; damp > 1e-3; damp *= 0.5) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = r.x[i] - damp * delta(static_cast<Eigen::Index>(i));
      const double fx = f(x);
      ++r.evals;
      if (fx < r.f) {
        const double gain = r.f - fx;
        r.x = std::move(x);
        r.f = fx;
        accepted = true;
        if (gain < 1e-14 * std::max(1.0, std::fabs(fx))) return;
        break;
      }
    }
    if (!accepted) return;
  }
}

}  // namespace snlr
