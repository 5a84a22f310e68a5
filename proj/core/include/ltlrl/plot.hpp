#pragma once

#include <string>
#include <vector>

namespace ltlrl {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // non-finite values break the line
  std::string color;      // empty picks from the default palette
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// Standalone SVG line chart with axes, ticks and a legend.
std::string render_svg(const Chart& chart, int width = 640, int height = 400);
// Several charts side by side in one SVG.
std::string render_svg_row(const std::vector<Chart>& charts, int panel_width = 480, int height = 360);

}  // namespace ltlrl
