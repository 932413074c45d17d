#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "wavelab/analysis.hpp"
#include "wavelab/fields.hpp"

namespace wavelab::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
};

struct Marker {
  double x = 0.0, y = 0.0;
  std::string color = "#d62728";
};

struct Plot {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  std::vector<Marker> markers;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '&': out += "&amp;"; break;
    default: out += c;
    }
  }
  return out;
}

} // namespace detail

/// Static line plot with linear axes, five ticks per axis and a legend.
inline void write(std::ostream& os, const Plot& plot) {
  using detail::fmt;
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  for (const auto& m : plot.markers) {
    x0 = std::min(x0, m.x), x1 = std::max(x1, m.x);
    y0 = std::min(y0, m.y), y1 = std::max(y1, m.y);
  }
  if (!(x1 > x0)) x0 -= 0.5, x1 += 0.5;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(plot.title)
     << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << detail::tick(xv)
       << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">" << detail::tick(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
     << detail::escape(plot.xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << detail::escape(plot.ylabel) << "</text>\n";
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& sr = plot.series[s];
    os << "<polyline fill=\"none\" stroke=\"" << sr.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < sr.x.size(); ++i) os << (i ? " " : "") << fmt(px(sr.x[i])) << ',' << fmt(py(sr.y[i]));
    os << "\"/>\n";
    if (!sr.label.empty()) {
      const double ly = T + 16 + 16.0 * static_cast<double>(s);
      os << "<line x1=\"" << W - R - 150 << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << W - R - 130 << "\" y2=\""
         << fmt(ly - 4) << "\" stroke=\"" << sr.color << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << W - R - 125 << "\" y=\"" << fmt(ly) << "\">" << detail::escape(sr.label) << "</text>\n";
    }
  }
  for (const auto& m : plot.markers) {
    os << "<circle cx=\"" << fmt(px(m.x)) << "\" cy=\"" << fmt(py(m.y)) << "\" r=\"4\" fill=\"" << m.color
       << "\"/>\n";
  }
  os << "</svg>\n";
}

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  return p;
}

/// Free surface with its inflection points marked.
inline Plot surface_plot(const HeightField& f, const AnalysisReport& rep) {
  const auto& g = f.grid();
  Plot p{"Free surface", "x", "eta", {}, {}};
  Series s{"eta(x)", {}, {}, palette()[0]};
  std::vector<double> row = f.h.row(g.np - 1);
  for (int i = 0; i < g.nq; ++i) {
    s.x.push_back(g.q(i));
    s.y.push_back(row[i] - f.depth);
  }
  if (!rep.inflections.empty()) {
    for (double x0 : rep.inflections.back().positions) {
      const double t = x0 / g.dq();
      const int i = std::clamp(static_cast<int>(t), 0, g.nq - 2);
      const double w = t - i;
      p.markers.push_back({x0, (1 - w) * s.y[i] + w * s.y[i + 1], "#d62728"});
    }
  }
  p.series.push_back(std::move(s));
  return p;
}

/// v along four streamlines from the surface down.
inline Plot velocity_plot(const HeightField& f, const VelocityField& vf) {
  const auto& g = f.grid();
  Plot p{"Vertical velocity along streamlines", "x", "v", {}, {}};
  const int n = g.np - 1;
  const int levels[] = {n, 3 * n / 4, n / 2, n / 4};
  for (int k = 0; k < 4; ++k) {
    Series s{"p = " + detail::tick(g.p(levels[k])), {}, {}, palette()[static_cast<std::size_t>(k)]};
    for (int i = 0; i < g.nq; ++i) {
      s.x.push_back(g.q(i));
      s.y.push_back(vf.v(i, levels[k]));
    }
    p.series.push_back(std::move(s));
  }
  return p;
}

/// Vertical displacement H = y(0) - y(pi) against mean streamline depth.
inline Plot displacement_plot(const std::vector<DisplacementPoint>& pts) {
  Plot p{"Vertical displacement", "mean depth y0", "H", {}, {}};
  Series s{"H(y0)", {}, {}, palette()[2]};
  for (const auto& d : pts) {
    s.x.push_back(d.mean_depth);
    s.y.push_back(d.H);
  }
  p.series.push_back(std::move(s));
  return p;
}

} // namespace wavelab::svg
