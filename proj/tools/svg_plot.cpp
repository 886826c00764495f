#include "svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <string_view>

namespace dmap::tools {

namespace {

constexpr double kLeft = 56.0;
constexpr double kRight = 16.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 44.0;

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(std::string_view s) {
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

}  // namespace

std::string histogram_svg(std::span<const double> heights, const HistogramPlot& plot) {
  const double plot_w = plot.width - kLeft - kRight;
  const double plot_h = plot.height - kTop - kBottom;
  const double top_value = 1.1 * std::max(1.0, *std::max_element(heights.begin(), heights.end()));
  const double scale = plot_h / top_value;
  const double base_y = kTop + plot_h;
  const double bar_w = plot_w / static_cast<double>(heights.size());

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(plot.width, 0) +
       "\" height=\"" + fixed(plot.height, 0) + "\" viewBox=\"0 0 " + fixed(plot.width, 0) +
       " " + fixed(plot.height, 0) + "\" data-scale=\"" + fixed(scale, 9) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!plot.title.empty()) {
    s += "<text x=\"" + fixed(plot.width / 2, 1) +
         "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">" +
         escape(plot.title) + "</text>\n";
  }

  s += "<g class=\"bars\" fill=\"#4c72b0\" stroke=\"white\" stroke-width=\"0.5\">\n";
  for (std::size_t j = 0; j < heights.size(); ++j) {
    const double h = std::max(0.0, heights[j]) * scale;
    s += "<rect x=\"" + fixed(kLeft + bar_w * static_cast<double>(j)) + "\" y=\"" +
         fixed(base_y - h) + "\" width=\"" + fixed(bar_w) + "\" height=\"" + fixed(h) +
         "\"/>\n";
  }
  s += "</g>\n";

  const double ref_y = base_y - scale;
  s += "<line class=\"reference\" x1=\"" + fixed(kLeft, 1) + "\" y1=\"" + fixed(ref_y) +
       "\" x2=\"" + fixed(kLeft + plot_w, 1) + "\" y2=\"" + fixed(ref_y) +
       "\" stroke=\"#c44e52\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";

  // Axes and ticks.
  s += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + fixed(kLeft, 1) + "\" y1=\"" + fixed(base_y, 1) + "\" x2=\"" +
       fixed(kLeft + plot_w, 1) + "\" y2=\"" + fixed(base_y, 1) + "\"/>\n";
  s += "<line x1=\"" + fixed(kLeft, 1) + "\" y1=\"" + fixed(kTop, 1) + "\" x2=\"" +
       fixed(kLeft, 1) + "\" y2=\"" + fixed(base_y, 1) + "\"/>\n";
  s += "</g>\n";
  s += "<g class=\"labels\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    const double x = kLeft + v * plot_w;
    s += "<text x=\"" + fixed(x, 1) + "\" y=\"" + fixed(base_y + 16, 1) +
         "\" text-anchor=\"middle\">" + fixed(v, 2) + "</text>\n";
  }
  const int yticks = 4;
  for (int i = 0; i <= yticks; ++i) {
    const double v = top_value * i / yticks;
    s += "<text x=\"" + fixed(kLeft - 6, 1) + "\" y=\"" + fixed(base_y - v * scale + 4, 1) +
         "\" text-anchor=\"end\">" + fixed(v, 2) + "</text>\n";
  }
  s += "<text x=\"" + fixed(kLeft + plot_w / 2, 1) + "\" y=\"" + fixed(plot.height - 8, 1) +
       "\" text-anchor=\"middle\">position in next-token distribution</text>\n";
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace dmap::tools
