#pragma once

#include <filesystem>
#include <string>
#include <vector>

// Minimal dependency-free SVG line charts: polyline means with optional
// translucent +/- band polygons, fixed 800x500 viewBox, optional log-y.

namespace cprop {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;     // mean line
  std::vector<double> y_lo;  // optional band; empty = no band
  std::vector<double> y_hi;
};

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<SvgSeries>& series, bool log_y = false);

}  // namespace cprop
