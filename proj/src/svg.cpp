#include "cprop/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cprop {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<SvgSeries>& series, bool log_y) {
  Range xr, yr;
  double y_pos_min = std::numeric_limits<double>::infinity();  // smallest positive y, for log scale
  for (const SvgSeries& s : series) {
    for (double v : s.x) xr.include(v);
    auto include_y = [&](double v) {
      if (!std::isfinite(v)) return;
      if (v > 0.0) y_pos_min = std::min(y_pos_min, v);
      yr.include(v);
    };
    for (double v : s.y) include_y(v);
    for (double v : s.y_lo) include_y(v);
    for (double v : s.y_hi) include_y(v);
  }
  if (!(xr.lo <= xr.hi) || !(yr.lo <= yr.hi))
    throw std::invalid_argument("write_line_chart_svg: no finite data");
  if (xr.lo == xr.hi) { xr.lo -= 1.0; xr.hi += 1.0; }
  if (log_y) {
    if (!std::isfinite(y_pos_min))
      throw std::invalid_argument("write_line_chart_svg: log scale needs positive values");
    yr.lo = y_pos_min;
    if (yr.hi <= yr.lo) yr.hi = yr.lo * 10.0;
  }
  if (yr.lo == yr.hi) { yr.lo -= 1.0; yr.hi += 1.0; }

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto tx = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto ty = [&](double y) {
    double v = y;
    double lo = yr.lo, hi = yr.hi;
    if (log_y) {
      v = std::log10(std::max(y, yr.lo));
      lo = std::log10(yr.lo);
      hi = std::log10(yr.hi);
    }
    return kMarginTop + plot_h - (v - lo) / (hi - lo) * plot_h;
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  svg << "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
      << "</text>\n";

  // Axes with 5 ticks each.
  svg << "<g stroke=\"#222222\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << num(kMarginLeft) << "\" y1=\"" << num(kMarginTop + plot_h) << "\" x2=\""
      << num(kMarginLeft + plot_w) << "\" y2=\"" << num(kMarginTop + plot_h) << "\"/>\n";
  svg << "<line x1=\"" << num(kMarginLeft) << "\" y1=\"" << num(kMarginTop) << "\" x2=\""
      << num(kMarginLeft) << "\" y2=\"" << num(kMarginTop + plot_h) << "\"/>\n";
  svg << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double px = tx(fx);
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << num(kMarginTop + plot_h) << "\" x2=\""
        << num(px) << "\" y2=\"" << num(kMarginTop + plot_h + 5) << "\" stroke=\"#222222\"/>\n";
    svg << "<text x=\"" << num(px) << "\" y=\"" << num(kMarginTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
    double fy;
    if (log_y) {
      const double llo = std::log10(yr.lo), lhi = std::log10(yr.hi);
      fy = std::pow(10.0, llo + (lhi - llo) * i / 4.0);
    } else {
      fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    }
    const double py = ty(fy);
    svg << "<line x1=\"" << num(kMarginLeft - 5) << "\" y1=\"" << num(py) << "\" x2=\""
        << num(kMarginLeft) << "\" y2=\"" << num(py) << "\" stroke=\"#222222\"/>\n";
    svg << "<text x=\"" << num(kMarginLeft - 8) << "\" y=\"" << num(py + 4)
        << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
  }
  svg << "<text x=\"" << num(kMarginLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 12)
      << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << num(kMarginTop + plot_h / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << num(kMarginTop + plot_h / 2)
      << ")\">" << xml_escape(y_label) << "</text>\n";

  // Bands first so lines draw on top.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (s.y_lo.size() == s.x.size() && s.y_hi.size() == s.x.size() && !s.x.empty()) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        svg << num(tx(s.x[i])) << "," << num(ty(s.y_hi[i])) << " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        svg << num(tx(s.x[i])) << "," << num(ty(s.y_lo[i])) << " ";
      svg << "\"/>\n";
    }
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << num(tx(s.x[i])) << "," << num(ty(s.y[i])) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << num(kMarginLeft + plot_w - 8) << "\" y=\""
        << num(kMarginTop + 16 + 16 * static_cast<double>(si)) << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << xml_escape(s.label) << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg.str();
}

}  // namespace cprop
