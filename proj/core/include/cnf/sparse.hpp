#pragma once

#include "cnf/basis.hpp"
#include "cnf/collocation.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cnf {

/// Default neighbourhood cap for patch solves.
inline constexpr std::size_t kDefaultPatchCap = 60;

/// Uniform grid over anchors with cell size equal to the support radius, so a
/// query's support lies in its own and the 3^M surrounding cells.
class SpatialIndex {
 public:
  SpatialIndex(std::vector<Point> anchors, double radius);

  double cell_size() const { return radius_; }
  double radius() const { return radius_; }
  const std::vector<Point>& anchors() const { return anchors_; }
  std::size_t bucket_count() const { return buckets_.size(); }
  std::vector<std::int64_t> cell_of(const Point& p) const;
  const std::map<std::vector<std::int64_t>, std::vector<int>>& buckets() const { return buckets_; }

  /// Anchors in the 3^M cells around q (a superset of the support).
  std::vector<int> candidates(const Point& q) const;

 private:
  std::vector<Point> anchors_;
  double radius_;
  std::map<std::vector<std::int64_t>, std::vector<int>> buckets_;
};

/// Index with cell size 3σ.
SpatialIndex build_index(const std::vector<Point>& anchors, double sigma);

/// Anchors strictly closer than the support radius, nearest first (ties by
/// index), truncated to `cap`.
std::vector<int> support_set(const SpatialIndex& index, const Point& q, std::size_t cap = kDefaultPatchCap);

/// Field evaluation by local dense solves: at each query the rows and columns
/// of the collocation system are restricted to the query's support set.
/// Subsystem solutions are memoized by support set.
class PatchSolver {
 public:
  PatchSolver(const HybridKernelBasis& family, const ConstraintSet& constraints, std::size_t cap = kDefaultPatchCap);

  /// One value per channel; the fallback value where the support is empty.
  /// Throws SingularMatrix naming the query when a subsystem is singular.
  Eigen::VectorXd eval(const Point& q);

  std::size_t cache_size() const { return cache_.size(); }
  std::size_t solves() const { return solves_; }
  void clear_cache() { cache_.clear(); }
  const SpatialIndex& index() const { return index_; }

 private:
  const HybridKernelBasis& family_;
  const ConstraintSet& constraints_;
  std::size_t cap_;
  SpatialIndex index_;
  std::map<std::vector<int>, Eigen::MatrixXd> cache_;
  std::size_t solves_ = 0;
};

/// Single-query convenience wrapper around PatchSolver.
Eigen::VectorXd patch_solve(const HybridKernelBasis& family, const ConstraintSet& constraints, const Point& q,
                            std::size_t cap = kDefaultPatchCap);

/// Oriented points: positions and unit normals.
struct PointCloud {
  std::vector<Point> points;
  std::vector<Point> normals;
};

/// Reads `x y nx ny` or `x y z nx ny nz` records; `#` starts a comment line.
/// Normals are normalized. Throws IoError.
PointCloud read_point_cloud(const std::string& path);

/// Mean distance from each point to its nearest other point (brute force).
double mean_nearest_neighbor_distance(const std::vector<Point>& points);

}  // namespace cnf
