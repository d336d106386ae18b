#include "doctest.h"
#include "toys.hpp"

#include "cnf/errors.hpp"
#include "cnf/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace cnf;

namespace {

std::vector<int> brute_support(const std::vector<Point>& anchors, const Point& q, double radius) {
  std::vector<int> out;
  for (std::size_t i = 0; i < anchors.size(); ++i)
    if ((anchors[i] - q).norm() < radius) out.push_back(static_cast<int>(i));
  return out;
}

HybridKernelBasis hybrid(const std::vector<Point>& anchors, double sigma) {
  BasisConfig c;
  c.kind = "hybrid_kernel";
  c.anchors = anchors;
  c.hidden = {8};
  c.features = 4;
  c.kernel_scale = 1.0;
  c.sigma = sigma;
  auto fam = init_basis(c, 5);
  return dynamic_cast<const HybridKernelBasis&>(*fam);
}

ConstraintSet value_constraints(const std::vector<Point>& pts) {
  const std::vector<std::string> dims{"x", "y"};
  std::vector<Constraint> rows;
  for (const auto& p : pts)
    rows.push_back(Constraint{identity_operator(dims), p, Eigen::VectorXd::Constant(1, std::cos(3 * p[0]) * p[1])});
  return ConstraintSet(std::move(rows), 1);
}

}  // namespace

TEST_CASE("every anchor lands in exactly one bucket") {
  const auto pts = toy::points(300, 1);
  const SpatialIndex idx = build_index(pts, 0.05);
  CHECK(idx.cell_size() == doctest::Approx(0.15));
  std::multiset<int> seen;
  for (const auto& [cell, members] : idx.buckets()) {
    for (int m : members) {
      seen.insert(m);
      CHECK(idx.cell_of(pts[static_cast<std::size_t>(m)]) == cell);
    }
  }
  CHECK(seen.size() == pts.size());
  for (int i = 0; i < 300; ++i) CHECK(seen.count(i) == 1);
}

TEST_CASE("candidates cover the brute-force support; support_set is exact, sorted and capped") {
  const auto pts = toy::points(400, 2);
  const SpatialIndex idx = build_index(pts, 0.04);
  for (const auto& q : toy::points(50, 3)) {
    const auto truth = brute_support(pts, q, 0.12);
    auto cand = idx.candidates(q);
    std::sort(cand.begin(), cand.end());
    CHECK(std::includes(cand.begin(), cand.end(), truth.begin(), truth.end()));

    const auto sup = support_set(idx, q, 1000);
    CHECK(sup.size() == truth.size());
    for (std::size_t k = 1; k < sup.size(); ++k) {
      CHECK((pts[static_cast<std::size_t>(sup[k - 1])] - q).norm() <= (pts[static_cast<std::size_t>(sup[k])] - q).norm());
    }
    const auto capped = support_set(idx, q, 3);
    CHECK(capped.size() == std::min<std::size_t>(3, truth.size()));
    CHECK(std::equal(capped.begin(), capped.end(), sup.begin()));
  }
}

TEST_CASE("patch solve equals the global solve when the support covers the domain") {
  const auto pts = toy::points(40, 4);
  const HybridKernelBasis fam = hybrid(pts, 10.0);
  const ConstraintSet cs = value_constraints(pts);
  ConstrainedField global(fam.clone(), cs);
  global.solve();
  PatchSolver solver(fam, cs, 100);
  for (const auto& q : toy::points(100, 5)) CHECK(std::abs(solver.eval(q)[0] - global.eval(q)[0]) < 1e-6);
  CHECK(solver.solves() == 1);
  CHECK(solver.cache_size() == 1);
  CHECK(std::abs(patch_solve(fam, cs, pts[3], 100)[0] - cs[3].target[0]) < 1e-9);
}

TEST_CASE("patch solve interpolates local data and falls back in empty regions") {
  const auto pts = toy::points(200, 6);
  const HybridKernelBasis fam = hybrid(pts, 0.05);
  const ConstraintSet cs = value_constraints(pts);
  PatchSolver solver(fam, cs, 60);
  CHECK(solver.eval(Eigen::Vector2d(7.0, 7.0))[0] == 1e5);
  for (int i = 0; i < 10; ++i) {
    CHECK(solver.eval(pts[static_cast<std::size_t>(i)])[0] ==
          doctest::Approx(cs[i].target[0]).epsilon(1e-6));
  }
}

TEST_CASE("mean nearest-neighbour distance on a regular lattice") {
  std::vector<Point> lattice;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) lattice.push_back(Eigen::Vector2d(0.25 * i, 0.25 * j));
  CHECK(mean_nearest_neighbor_distance(lattice) == doctest::Approx(0.25));
  CHECK_THROWS(mean_nearest_neighbor_distance({Point(Eigen::Vector2d(0, 0))}));
}

TEST_CASE("point cloud files") {
  const auto dir = std::filesystem::temp_directory_path() / "cnf_unit_cloud";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "c.txt").string();
  {
    std::ofstream out(path);
    out << "# x y nx ny\n0 0 2 0\n1 0 0 -3\n";
  }
  const PointCloud pc = read_point_cloud(path);
  REQUIRE(pc.points.size() == 2);
  CHECK(pc.normals[0] == Eigen::Vector2d(1, 0));
  CHECK(pc.normals[1] == Eigen::Vector2d(0, -1));
  {
    std::ofstream out(path);
    out << "0 0 1\n";
  }
  CHECK_THROWS_AS(read_point_cloud(path), IoError);
  CHECK_THROWS_AS(read_point_cloud((dir / "missing.txt").string()), IoError);
}
