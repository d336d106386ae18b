#pragma once

#include "cnf/geometry.hpp"

#include <string>
#include <vector>

namespace cnf {

/// SVG canvas size used by every plot.
inline constexpr int kSvgWidth = 800;
inline constexpr int kSvgHeight = 600;

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart of several series. With `log_y`, non-positive or non-finite
/// values are skipped and the axis shows log10(y).
std::string svg_line_chart(const std::string& title, const std::vector<Series>& series, bool log_y = false);

/// Heatmap of row-major grid values (one rect per node, row 0 at the bottom).
/// Colour of value v with t = (v − lo)/(hi − lo) clamped to [0, 1], where lo and
/// hi are the finite min and max: rgb(round(255·t), round(64·(1 − |2t − 1|)),
/// round(255·(1 − t))), i.e. blue at the minimum, red at the maximum. A
/// constant grid maps to t = 0.
std::string svg_heatmap(const std::string& title, const EvalGrid& grid, const std::vector<double>& values);

/// The fill colour svg_heatmap gives t ∈ [0, 1], as "rgb(r,g,b)".
std::string heat_colour(double t);

/// Polylines plus optional marker points, in a square view of [lo, hi]².
std::string svg_polylines(const std::string& title, const std::vector<Polyline>& lines, double lo, double hi,
                          const std::vector<Point>& markers = {});

}  // namespace cnf
