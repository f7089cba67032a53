#include "letsne/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace letsne {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 600;
constexpr double kMargin = 0.05;

const char* kPalette[12] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78"};

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string ramp_color(double t) {
  // blue (0) -> red (1)
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 * t));
  const int b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  const int g = static_cast<int>(std::lround(80.0 * (1.0 - std::abs(2.0 * t - 1.0))));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string scatter_svg(const Matrix& points, const std::vector<double>& color_values,
                        ColorMode mode, double point_size) {
  if (points.rows() < 1 || points.cols() < 2) {
    throw UsageError("scatter_svg: need at least one point with 2 coordinates");
  }
  if (!color_values.empty() && static_cast<Index>(color_values.size()) != points.rows()) {
    throw UsageError("scatter_svg: color values must match the points");
  }

  double min_x = points.col(0).minCoeff(), max_x = points.col(0).maxCoeff();
  double min_y = points.col(1).minCoeff(), max_y = points.col(1).maxCoeff();
  if (max_x == min_x) max_x = min_x + 1.0;  // degenerate extent: center the points
  if (max_y == min_y) max_y = min_y + 1.0;
  double min_c = 0.0, max_c = 1.0;
  if (!color_values.empty()) {
    const auto [lo, hi] = std::minmax_element(color_values.begin(), color_values.end());
    min_c = *lo;
    max_c = *hi > *lo ? *hi : *lo + 1.0;
  }

  const double x0 = kMargin * kWidth, x1 = (1.0 - kMargin) * kWidth;
  const double y0 = kMargin * kHeight, y1 = (1.0 - kMargin) * kHeight;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Index i = 0; i < points.rows(); ++i) {
    const double px = x0 + (points(i, 0) - min_x) / (max_x - min_x) * (x1 - x0);
    // SVG y grows downward
    const double py = y1 - (points(i, 1) - min_y) / (max_y - min_y) * (y1 - y0);
    std::string fill = kPalette[0];
    if (!color_values.empty()) {
      const double v = color_values[static_cast<size_t>(i)];
      if (mode == ColorMode::categorical) {
        const long id = std::lround(v);
        fill = kPalette[((id % 12) + 12) % 12];
      } else {
        fill = ramp_color((v - min_c) / (max_c - min_c));
      }
    }
    out << "<circle cx=\"" << format_coord(px) << "\" cy=\"" << format_coord(py) << "\" r=\""
        << format_coord(point_size) << "\" fill=\"" << fill << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string region_svg(const RegionMap& map) {
  const double cell = std::max(1.0, std::floor(600.0 / std::max(map.height, map.width)));
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << map.width * cell
      << "\" height=\"" << map.height * cell << "\">\n";
  for (int r = 0; r < map.height; ++r) {
    // run-length encode each row into one rect per run
    int c = 0;
    while (c < map.width) {
      const int id = map.id_at(r, c);
      int end = c + 1;
      while (end < map.width && map.id_at(r, end) == id) ++end;
      out << "<rect x=\"" << c * cell << "\" y=\"" << r * cell << "\" width=\""
          << (end - c) * cell << "\" height=\"" << cell << "\" fill=\"" << kPalette[id % 12]
          << "\"/>\n";
      c = end;
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace letsne
