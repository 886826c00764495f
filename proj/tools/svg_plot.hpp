#pragma once

#include <span>
#include <string>

namespace dmap::tools {

struct HistogramPlot {
  std::string title;
  double width = 640.0;
  double height = 400.0;
};

// Self-contained SVG bar chart of k equal-width bins on [0, 1] with a dashed
// reference line at the uniform density. The root element carries
// data-scale (pixels per unit height) so bar heights can be read back.
std::string histogram_svg(std::span<const double> heights, const HistogramPlot& plot);

}  // namespace dmap::tools
