#include "geoworld/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "geoworld/keyvalue.hpp"

namespace geoworld::plot {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
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

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Roughly five "nice" ticks (1, 2, 5 x 10^k spacing) covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(t == 0.0 ? 0.0 : t);
  return ticks;
}

}  // namespace

std::string render_line_chart(const std::vector<Curve>& curves, const ChartOptions& options) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& c : curves) {
    if (c.xs.size() != c.ys.size()) throw std::invalid_argument("curve " + c.name + ": xs and ys differ in length");
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      if (!std::isfinite(c.xs[i]) || !std::isfinite(c.ys[i])) continue;
      x_lo = std::min(x_lo, c.xs[i]);
      x_hi = std::max(x_hi, c.xs[i]);
      y_lo = std::min(y_lo, c.ys[i]);
      y_hi = std::max(y_hi, c.ys[i]);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double left = 70, right = 160, top = 40, bottom = 50;
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(options.title) << "</text>\n";
  svg << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw) << "\" height=\""
      << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : nice_ticks(x_lo, x_hi)) {
    svg << "<line x1=\"" << fixed(sx(t)) << "\" y1=\"" << fixed(top + ph) << "\" x2=\"" << fixed(sx(t)) << "\" y2=\""
        << fixed(top + ph + 5) << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << fixed(sx(t)) << "\" y=\"" << fixed(top + ph + 18) << "\" text-anchor=\"middle\">"
        << tick_label(t) << "</text>\n";
  }
  for (double t : nice_ticks(y_lo, y_hi)) {
    svg << "<line x1=\"" << fixed(left - 5) << "\" y1=\"" << fixed(sy(t)) << "\" x2=\"" << fixed(left) << "\" y2=\""
        << fixed(sy(t)) << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << fixed(left - 8) << "\" y=\"" << fixed(sy(t) + 4) << "\" text-anchor=\"end\">"
        << tick_label(t) << "</text>\n";
  }
  svg << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(options.height - 10.0)
      << "\" text-anchor=\"middle\">" << escape(options.x_label) << "</text>\n";
  svg << "<text x=\"15\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << fixed(top + ph / 2) << ")\">" << escape(options.y_label) << "</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      if (!std::isfinite(c.xs[i]) || !std::isfinite(c.ys[i])) continue;
      svg << fixed(sx(c.xs[i])) << ',' << fixed(sy(c.ys[i])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = top + 15 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << fixed(left + pw + 10) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(left + pw + 30)
        << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    svg << "<text x=\"" << fixed(left + pw + 35) << "\" y=\"" << fixed(ly + 4) << "\">" << escape(c.name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string plot_data(const std::vector<Curve>& curves) {
  std::string out;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    if (k) out += "\n";
    out += "# " + curves[k].name + "\n";
    for (std::size_t i = 0; i < curves[k].xs.size(); ++i) {
      out += format_double(curves[k].xs[i]) + " " + format_double(curves[k].ys[i]) + "\n";
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace geoworld::plot
