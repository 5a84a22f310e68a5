#include "ltlrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ltlrl {

namespace {

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
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

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// Round step for roughly `target` ticks over the span.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

void draw(std::ostringstream& out, const Chart& chart, double ox, double width, double height) {
  const double left = ox + 64, right = ox + width - 16, top = 36, bottom = height - 48;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };

  out << "<text x=\"" << (left + right) / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(chart.title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = axis == 0 ? x0 : y0, hi = axis == 0 ? x1 : y1;
    const double step = tick_step(hi - lo, 5);
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
      if (axis == 0)
        out << "<line x1=\"" << px(v) << "\" y1=\"" << bottom << "\" x2=\"" << px(v) << "\" y2=\"" << bottom + 4
            << "\" stroke=\"#333\"/><text x=\"" << px(v) << "\" y=\"" << bottom + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(v) << "</text>\n";
      else
        out << "<line x1=\"" << left - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << left << "\" y2=\"" << py(v)
            << "\" stroke=\"#333\"/><text x=\"" << left - 6 << "\" y=\"" << py(v) + 3
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v) << "</text>\n";
    }
  }
  out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(chart.x_label) << "</text>\n";
  out << "<text x=\"" << ox + 14 << "\" y=\"" << (top + bottom) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 " << ox + 14 << ' ' << (top + bottom) / 2 << ")\">" << escape(chart.y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const std::string color = s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
    std::ostringstream pts;
    auto flush = [&] {
      if (!pts.str().empty())
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
            << "\"/>\n";
      pts.str("");
    };
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      pts << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
    }
    flush();
    const double ly = top + 14 + 16 * static_cast<double>(k);
    out << "<line x1=\"" << left + 8 << "\" y1=\"" << ly << "\" x2=\"" << left + 28 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + 32 << "\" y=\"" << ly + 4
        << "\" font-size=\"11\">" << escape(s.name) << "</text>\n";
  }
}

}  // namespace

std::string render_svg(const Chart& chart, int width, int height) { return render_svg_row({chart}, width, height); }

std::string render_svg_row(const std::vector<Chart>& charts, int panel_width, int height) {
  std::ostringstream out;
  const auto total = panel_width * static_cast<int>(std::max<std::size_t>(1, charts.size()));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << height
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i)
    draw(out, charts[i], static_cast<double>(i) * panel_width, panel_width, height);
  out << "</svg>\n";
  return out.str();
}

}  // namespace ltlrl
