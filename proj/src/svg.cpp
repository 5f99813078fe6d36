#include "c2al/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace c2al {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           double x_min, double x_max,
                           const std::vector<SvgSeries>& series, int width,
                           int height) {
  if (series.empty()) {
    throw ContractError("svg_line_chart: no series");
  }
  const double margin_left = 56;
  const double margin_right = 16;
  const double margin_top = 36;
  const double margin_bottom = 44;
  const double plot_w = width - margin_left - margin_right;
  const double plot_h = height - margin_top - margin_bottom;

  double y_max = 0.0;
  for (const auto& s : series) {
    if (s.values.size() == 0) {
      throw ContractError("svg_line_chart: empty series");
    }
    y_max = std::max(y_max, s.values.maxCoeff());
  }
  if (y_max <= 0.0) {
    y_max = 1.0;
  }

  const auto x_pos = [&](double frac) { return margin_left + frac * plot_w; };
  const auto y_pos = [&](double v) {
    return margin_top + (1.0 - v / y_max) * plot_h;
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt(width / 2.0) +
         "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" +
         title + "</text>\n";

  // axes
  out += "<line x1=\"" + fmt(margin_left) + "\" y1=\"" + fmt(margin_top) +
         "\" x2=\"" + fmt(margin_left) + "\" y2=\"" +
         fmt(margin_top + plot_h) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + fmt(margin_left) + "\" y1=\"" + fmt(margin_top + plot_h) +
         "\" x2=\"" + fmt(margin_left + plot_w) + "\" y2=\"" +
         fmt(margin_top + plot_h) + "\" stroke=\"black\"/>\n";

  // ticks: 5 along each axis
  for (int i = 0; i <= 4; ++i) {
    const double frac = i / 4.0;
    const double xv = x_min + frac * (x_max - x_min);
    out += "<text x=\"" + fmt(x_pos(frac)) + "\" y=\"" +
           fmt(margin_top + plot_h + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">" +
           fmt(xv) + "</text>\n";
    const double yv = frac * y_max;
    out += "<text x=\"" + fmt(margin_left - 6) + "\" y=\"" + fmt(y_pos(yv) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt(yv) + "</text>\n";
  }
  out += "<text x=\"" + fmt(margin_left + plot_w / 2) + "\" y=\"" +
         fmt(height - 10.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
         x_label + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sr = series[s];
    const Index n = sr.values.size();
    std::string points;
    for (Index i = 0; i < n; ++i) {
      const double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
      points += fmt(x_pos(frac)) + "," + fmt(y_pos(sr.values[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + sr.color +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    // legend entry
    const double ly = margin_top + 14.0 * (s + 1);
    out += "<line x1=\"" + fmt(margin_left + plot_w - 110) + "\" y1=\"" + fmt(ly) +
           "\" x2=\"" + fmt(margin_left + plot_w - 92) + "\" y2=\"" + fmt(ly) +
           "\" stroke=\"" + sr.color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fmt(margin_left + plot_w - 88) + "\" y=\"" + fmt(ly + 3) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + sr.label +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << content;
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

}  // namespace c2al
