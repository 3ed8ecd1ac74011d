#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace geoworld::plot {

struct Curve {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct ChartOptions {
  std::string title;
  std::string x_label = "step";
  std::string y_label;
  int width = 640;
  int height = 400;
};

/// Self-contained SVG with axes, ticks, one polyline per curve and a legend.
/// Output depends only on the inputs, so reruns are byte-identical.
std::string render_line_chart(const std::vector<Curve>& curves, const ChartOptions& options);

/// Two-column whitespace-separated series, one block per curve separated by a blank line.
std::string plot_data(const std::vector<Curve>& curves);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace geoworld::plot
