#pragma once

// Small SVG line charts: one polyline per series, linear axes, legend.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace pvdiff::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 640;
  int height = 400;
};

namespace detail {

inline std::string fmt(double v, const char* f = "%.4g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  return palette[i % (sizeof palette / sizeof palette[0])];
}

}  // namespace detail

/// Renders the chart. Non-finite points are skipped; an empty chart still yields valid SVG.
inline std::string render(const Chart& c) {
  using detail::fmt;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : c.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5 * std::max(1e-3, std::abs(y0)), y1 += 0.5 * std::max(1e-3, std::abs(y1));
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;

  const double left = 70, right = 160, top = 40, bottom = 50;
  const double pw = c.width - left - right, ph = c.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(c.width) + "\" height=\"" +
       std::to_string(c.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::escape(c.title) + "</text>\n";
  o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o += "<text x=\"" + fmt(px(xv)) + "\" y=\"" + fmt(top + ph + 18) + "\" text-anchor=\"middle\">" + fmt(xv) +
         "</text>\n";
    o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(yv) + 4) + "\" text-anchor=\"end\">" + fmt(yv) +
         "</text>\n";
    o += "<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(left + pw) + "\" y1=\"" + fmt(py(yv)) + "\" y2=\"" +
         fmt(py(yv)) + "\" stroke=\"#ddd\"/>\n";
  }
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(c.height - 10.0) + "\" text-anchor=\"middle\">" +
       detail::escape(c.x_label) + "</text>\n";
  o += "<text transform=\"translate(16," + fmt(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::escape(c.y_label) + "</text>\n";
  for (std::size_t si = 0; si < c.series.size(); ++si) {
    const auto& s = c.series[si];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += fmt(px(s.x[i]), "%.2f") + "," + fmt(py(s.y[i]), "%.2f") + " ";
      o += "<circle cx=\"" + fmt(px(s.x[i]), "%.2f") + "\" cy=\"" + fmt(py(s.y[i]), "%.2f") + "\" r=\"3\" fill=\"" +
           detail::color(si) + "\"/>\n";
    }
    if (!pts.empty()) pts.pop_back();
    o += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(detail::color(si)) + "\" points=\"" +
         pts + "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(si);
    o += "<line x1=\"" + fmt(left + pw + 12) + "\" x2=\"" + fmt(left + pw + 32) + "\" y1=\"" + fmt(ly - 4) +
         "\" y2=\"" + fmt(ly - 4) + "\" stroke-width=\"2\" stroke=\"" + detail::color(si) + "\"/>\n";
    o += "<text x=\"" + fmt(left + pw + 38) + "\" y=\"" + fmt(ly) + "\">" + detail::escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace pvdiff::svg
