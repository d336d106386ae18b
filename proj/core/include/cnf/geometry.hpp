#pragma once

#include "cnf/diff.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cnf {

/// Regular 2D sample grid. Points are row-major: index j·nx + i holds
/// (xs[i], ys[j]), so x varies fastest.
struct EvalGrid {
  std::vector<double> xs;
  std::vector<double> ys;

  /// n nodes per axis including both ends of [lo, hi].
  static EvalGrid nodes(double lo, double hi, int n);
  /// Nodes spaced `step` apart starting at lo; the last node is ≤ hi + step/2.
  static EvalGrid stepped(double lo, double hi, double step);
  /// n cell centres per axis of [lo, hi].
  static EvalGrid cells(double lo, double hi, int n);

  int nx() const { return static_cast<int>(xs.size()); }
  int ny() const { return static_cast<int>(ys.size()); }
  std::size_t size() const { return xs.size() * ys.size(); }
  Point point(std::size_t k) const;
  std::vector<Point> points() const;
};

using Polyline = std::vector<Eigen::Vector2d>;

/// Iso-contours of grid values (row-major over `grid`) by marching squares
/// with linear interpolation along edges. Saddle cells are split according to
/// the sign of the cell-centre average. Corners with `valid[k] == 0` exclude
/// every cell touching them; an empty mask means all valid. Segments are
/// joined into polylines; closed loops repeat their first point.
std::vector<Polyline> marching_squares(const EvalGrid& grid, const std::vector<double>& values, double iso = 0.0,
                                       const std::vector<char>& valid = {});

/// Largest distance from a polyline vertex to the nearest point of the other
/// polyline set (one-sided).
double max_distance_to(const std::vector<Polyline>& from, const std::vector<Polyline>& to);
/// Symmetric Hausdorff distance over polyline vertices and segments.
double hausdorff(const std::vector<Polyline>& a, const std::vector<Polyline>& b);

/// Largest | ‖v‖ − r | over polyline vertices.
double max_radial_deviation(const std::vector<Polyline>& lines, double radius);

/// Oriented 2D samples of a built-in outline: "circle" (radius), "line"
/// (segment [−radius, radius] on the x axis, normal +y), "triangle" and
/// "diamond" (regular polygons with circumradius `radius`). Points are spread
/// evenly along the perimeter starting at a vertex; polygon vertex normals
/// bisect the adjacent edge normals. Throws BadConfig for unknown names.
struct OrientedPoints {
  std::vector<Point> points;
  std::vector<Point> normals;
};
OrientedPoints builtin_shape(const std::string& name, int count, double radius = 1.0);

/// Signed distance to the built-in outline (unsigned for "line").
double builtin_shape_sdf(const std::string& name, const Eigen::Vector2d& p, double radius = 1.0);

/// Regular nx × nt lattice in the open unit square, perturbed by Gaussian
/// noise of standard deviation sigma·cell and clamped to [margin, 1 − margin].
/// Points closer than `min_sep` to an earlier point (or to any of `fixed`) are
/// re-drawn. Cell centres are ((i + ½)/nx, (j + 1)/(nt + 1)).
std::vector<Point> perturbed_lattice(int nx, int nt, double sigma, std::mt19937_64& rng,
                                     const std::vector<Point>& fixed = {}, double min_sep = 1e-4,
                                     double margin = 1e-3);

/// √(mean (f − u)²).
double rmse(const std::vector<double>& f, const std::vector<double>& u);
/// rmse / √(mean u²).
double nrmse(const std::vector<double>& f, const std::vector<double>& u);

}  // namespace cnf
