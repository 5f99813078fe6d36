#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "c2al/types.hpp"

namespace c2al {

struct SvgSeries {
  std::string label;
  std::string color;  // CSS color
  Vector values;      // one value per bin / x position
};

// Self-contained SVG line chart: axes, tick labels, legend; one polyline per
// series over a shared x range.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           double x_min, double x_max,
                           const std::vector<SvgSeries>& series, int width = 640,
                           int height = 400);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace c2al
