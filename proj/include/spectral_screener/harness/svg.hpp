#pragma once

// Log-scale scree plot rendered as a standalone SVG document.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "spectral_screener/error.hpp"
#include "spectral_screener/linalg.hpp"

namespace spectral::harness {

struct ThresholdLine {
  std::string label;
  double value = 0.0;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// One <circle> per eigenvalue and one <line> per threshold. Nonpositive
// eigenvalues are drawn on the floor of the axis.
inline std::string scree_svg(const Vector& eigenvalues, const std::vector<ThresholdLine>& thresholds,
                             const std::string& title = "Scree plot") {
  if (eigenvalues.size() == 0) throw InvalidArgument("scree_svg: empty spectrum");
  double top = 0.0;
  double bottom = INFINITY;
  for (Index k = 0; k < eigenvalues.size(); ++k) {
    if (eigenvalues(k) > 0.0) {
      top = std::max(top, eigenvalues(k));
      bottom = std::min(bottom, eigenvalues(k));
    }
  }
  if (top == 0.0) throw InvalidArgument("scree_svg: spectrum has no positive eigenvalue");
  for (const auto& t : thresholds) {
    if (t.value > 0.0) {
      top = std::max(top, t.value);
      bottom = std::min(bottom, t.value);
    }
  }
  double log_hi = std::ceil(std::log10(top));
  double log_lo = std::floor(std::log10(bottom));
  if (log_hi == log_lo) log_lo -= 1.0;

  const double width = 640.0;
  const double height = 400.0;
  const double left = 70.0;
  const double right = 20.0;
  const double upper = 40.0;
  const double lower = 50.0;
  const double plot_w = width - left - right;
  const double plot_h = height - upper - lower;
  const Index p = eigenvalues.size();

  const auto x_of = [&](Index k) {
    return p == 1 ? left + plot_w / 2.0 : left + plot_w * static_cast<double>(k) / static_cast<double>(p - 1);
  };
  const auto y_of = [&](double v) {
    const double lv = v > 0.0 ? std::clamp(std::log10(v), log_lo, log_hi) : log_lo;
    return upper + plot_h * (log_hi - lv) / (log_hi - log_lo);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<title>" << detail::xml_escape(title) << "</title>\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<path d=\"M" << left << ' ' << upper << " V" << upper + plot_h << " H" << left + plot_w
      << "\" stroke=\"black\" fill=\"none\"/>\n";
  for (double d = log_lo; d <= log_hi; d += 1.0) {
    const double y = upper + plot_h * (log_hi - d) / (log_hi - log_lo);
    svg << "<text x=\"" << left - 8 << "\" y=\"" << detail::fmt(y + 4) << "\" font-size=\"11\" text-anchor=\"end\">1e"
        << static_cast<int>(d) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
      << "\" font-size=\"12\" text-anchor=\"middle\">index k</text>\n";
  svg << "<g class=\"eigenvalues\" fill=\"steelblue\">\n";
  for (Index k = 0; k < p; ++k) {
    svg << "<circle cx=\"" << detail::fmt(x_of(k)) << "\" cy=\"" << detail::fmt(y_of(eigenvalues(k)))
        << "\" r=\"3\"/>\n";
  }
  svg << "</g>\n";
  svg << "<g class=\"thresholds\" stroke=\"firebrick\" stroke-dasharray=\"6 3\">\n";
  for (const auto& t : thresholds) {
    const double y = y_of(t.value);
    svg << "<line x1=\"" << left << "\" y1=\"" << detail::fmt(y) << "\" x2=\"" << left + plot_w << "\" y2=\""
        << detail::fmt(y) << "\"/>\n";
    svg << "<text x=\"" << left + plot_w - 4 << "\" y=\"" << detail::fmt(y - 4)
        << "\" font-size=\"11\" text-anchor=\"end\" stroke=\"none\" fill=\"firebrick\">"
        << detail::xml_escape(t.label) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace spectral::harness
