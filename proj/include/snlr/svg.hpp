#pragma once

// Minimal SVG rendering of a confidence band: estimate curve, dashed
// pointwise bounds, and a rug (or S-N scatter) of the data with runouts
// drawn as open triangles.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "snlr/bands.hpp"
#include "snlr/dist.hpp"
#include "snlr/likelihood.hpp"

namespace snlr::svg {

namespace detail {

enum class Scale { log, probit };

struct Axis {
  Scale scale = Scale::log;
  double lo = 0.0, hi = 1.0;  // transformed
  std::string label;

  double t(double v) const {
    if (scale == Scale::log) return v > 0.0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN();
    if (!(v > 0.0 && v < 1.0)) return std::numeric_limits<double>::quiet_NaN();
    return std_quantile(ErrorFamily::normal, v);
  }
};

inline void widen(Axis& a) {
  if (!(a.hi > a.lo)) { a.lo -= 0.5; a.hi += 0.5; }
  const double pad = 0.04 * (a.hi - a.lo);
  a.lo -= pad;
  a.hi += pad;
}

inline std::vector<double> ticks(const Axis& a) {
  std::vector<double> out;
  if (a.scale == Scale::probit) {
    for (double p : {0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.8, 0.9, 0.95, 0.99, 0.999}) {
      const double x = a.t(p);
      if (x >= a.lo && x <= a.hi) out.push_back(p);
    }
    return out;
  }
  const double e0 = std::floor(a.lo / std::log(10.0)), e1 = std::ceil(a.hi / std::log(10.0));
  for (double e = e0; e <= e1; ++e)
    for (double m : {1.0, 2.0, 5.0}) {
      const double v = m * std::pow(10.0, e);
      const double x = std::log(v);
      if (x >= a.lo && x <= a.hi) out.push_back(v);
    }
  return out;
}

inline std::string tick_label(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

}  // namespace detail

/// Renders a band. `data` may be empty. Curves break at failed points.
inline std::string render_band(const ConfidenceBand& b, const SNDataset& data, const std::string& title) {
  using detail::Axis;
  using detail::Scale;
  constexpr double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 55;

  // S-N families plot cycles horizontally and stress vertically.
  const bool sn = b.family == BandFamily::life_qf_vs_stress || b.family == BandFamily::strength_qf_vs_cycles;
  const bool swap = b.family == BandFamily::life_qf_vs_stress || b.family == BandFamily::life_qf ||
                    b.family == BandFamily::strength_qf;
  Axis ax, ay;
  auto abscissa_axis = [&]() -> Axis {
    switch (b.family) {
      case BandFamily::life_cdf: return {Scale::log, 0, 0, "cycles"};
      case BandFamily::strength_cdf: return {Scale::log, 0, 0, "stress"};
      case BandFamily::life_qf:
      case BandFamily::strength_qf: return {Scale::probit, 0, 0, "fraction failing"};
      case BandFamily::life_qf_vs_stress: return {Scale::log, 0, 0, "stress"};
      case BandFamily::strength_qf_vs_cycles: return {Scale::log, 0, 0, "cycles"};
    }
    return {};
  }();
  Axis value_axis = [&]() -> Axis {
    switch (b.family) {
      case BandFamily::life_cdf:
      case BandFamily::strength_cdf: return {Scale::probit, 0, 0, "fraction failing"};
      case BandFamily::life_qf:
      case BandFamily::life_qf_vs_stress: return {Scale::log, 0, 0, "cycles"};
      case BandFamily::strength_qf:
      case BandFamily::strength_qf_vs_cycles: return {Scale::log, 0, 0, "stress"};
    }
    return {};
  }();
  // Horizontal axis: cycles for S-N plots and for life quantiles; the cdf
  // abscissa otherwise.
  if (swap) { ax = value_axis; ay = abscissa_axis; }
  else { ax = abscissa_axis; ay = value_axis; }

  struct Pt { double x, y; };
  auto point = [&](double a, double v) -> Pt {
    const double ta = abscissa_axis.t(a), tv = value_axis.t(v);
    return swap ? Pt{tv, ta} : Pt{ta, tv};
  };

  ax.lo = ay.lo = std::numeric_limits<double>::infinity();
  ax.hi = ay.hi = -std::numeric_limits<double>::infinity();
  auto include = [&](Pt p) {
    if (std::isfinite(p.x)) { ax.lo = std::min(ax.lo, p.x); ax.hi = std::max(ax.hi, p.x); }
    if (std::isfinite(p.y)) { ay.lo = std::min(ay.lo, p.y); ay.hi = std::max(ay.hi, p.y); }
  };
  for (std::size_t i = 0; i < b.size(); ++i)
    for (double v : {b.estimates[i], b.lowers[i], b.uppers[i]}) include(point(b.grid[i], v));
  if (sn)
    for (const auto& o : data.observations) include({std::log(o.cycles), std::log(o.stress)});
  if (!std::isfinite(ax.lo)) { ax.lo = 0; ax.hi = 1; }
  if (!std::isfinite(ay.lo)) { ay.lo = 0; ay.hi = 1; }
  detail::widen(ax);
  detail::widen(ay);

  auto px = [&](double x) { return ml + (x - ax.lo) / (ax.hi - ax.lo) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ay.lo) / (ay.hi - ay.lo) * (H - mt - mb); };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : detail::ticks(ax)) {
    const double x = px(ax.t(v));
    os << "<line x1=\"" << x << "\" y1=\"" << H - mb << "\" x2=\"" << x << "\" y2=\"" << mt
       << "\" stroke=\"#ddd\"/>\n<text x=\"" << x << "\" y=\"" << H - mb + 14 << "\" text-anchor=\"middle\">"
       << detail::tick_label(v) << "</text>\n";
  }
  for (double v : detail::ticks(ay)) {
    const double y = py(ay.t(v));
    os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << W - mr << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n<text x=\"" << ml - 4 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
       << detail::tick_label(v) << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << ax.label << "</text>\n";
  os << "<text transform=\"translate(16," << H / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ay.label
     << "</text>\n";

  auto polyline = [&](const std::vector<double>& vals, const std::vector<BoundKind>* kinds, const char* style) {
    std::vector<std::string> runs(1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const bool bad = (kinds && (*kinds)[i] == BoundKind::failed);
      const Pt p = point(b.grid[i], vals[i]);
      if (bad || !std::isfinite(p.x) || !std::isfinite(p.y)) {
        if (!runs.back().empty()) runs.emplace_back();
        continue;
      }
      std::ostringstream s;
      s << std::setprecision(6) << px(p.x) << ',' << py(p.y) << ' ';
      runs.back() += s.str();
    }
    for (const auto& r : runs)
      if (!r.empty()) os << "<polyline fill=\"none\" " << style << " points=\"" << r << "\"/>\n";
  };
  polyline(b.estimates, nullptr, "stroke=\"black\" stroke-width=\"1.5\"");
  polyline(b.lowers, &b.lower_kind, "stroke=\"#1f5fbf\" stroke-dasharray=\"6,4\"");
  polyline(b.uppers, &b.upper_kind, "stroke=\"#1f5fbf\" stroke-dasharray=\"6,4\"");

  // Data: S-N scatter, or a rug along the cycles/stress axis.
  for (const auto& o : data.observations) {
    double x, y;
    if (sn) {
      x = px(std::log(o.cycles));
      y = py(std::log(o.stress));
    } else {
      const bool on_x = ax.scale == Scale::log;
      const double v = ax.label == "stress" || ay.label == "stress" ? o.stress : o.cycles;
      if (on_x) { x = px(std::log(v)); y = H - mb - 6; }
      else { x = ml + 6; y = py(std::log(v)); }
    }
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if (o.status == Status::failure)
      os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"#c0392b\"/>\n";
    else
      os << "<path d=\"M" << x - 4 << ',' << y + 3 << " L" << x + 4 << ',' << y + 3 << " L" << x << ',' << y - 4
         << " Z\" fill=\"none\" stroke=\"#c0392b\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace snlr::svg
