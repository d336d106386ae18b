#include "cnf/sparse.hpp"

#include "cnf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace cnf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SpatialIndex::SpatialIndex(std::vector<Point> anchors, double radius) : anchors_(std::move(anchors)), radius_(radius) {
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) throw BadConfig("index: radius must be positive and finite");
  for (std::size_t i = 0; i < anchors_.size(); ++i) buckets_[cell_of(anchors_[i])].push_back(static_cast<int>(i));
}

std::vector<std::int64_t> SpatialIndex::cell_of(const Point& p) const {
  std::vector<std::int64_t> c(static_cast<std::size_t>(p.size()));
  for (Index k = 0; k < p.size(); ++k) c[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(p[k] / radius_));
  return c;
}

std::vector<int> SpatialIndex::candidates(const Point& q) const {
  const auto base = cell_of(q);
  const std::size_t m = base.size();
  std::vector<int> out;
  std::vector<std::int64_t> cell(m);
  std::size_t total = 1;
  for (std::size_t k = 0; k < m; ++k) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    for (std::size_t k = 0; k < m; ++k) {
      cell[k] = base[k] + static_cast<std::int64_t>(rest % 3) - 1;
      rest /= 3;
    }
    const auto it = buckets_.find(cell);
    if (it != buckets_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

SpatialIndex build_index(const std::vector<Point>& anchors, double sigma) {
  if (!(sigma > 0.0)) throw BadConfig("index: sigma must be positive");
  return SpatialIndex(anchors, 3.0 * sigma);
}

std::vector<int> support_set(const SpatialIndex& index, const Point& q, std::size_t cap) {
  const double r2 = index.radius() * index.radius();
  std::vector<std::pair<double, int>> hits;
  for (int i : index.candidates(q)) {
    const double d2 = (index.anchors()[static_cast<std::size_t>(i)] - q).squaredNorm();
    if (d2 < r2) hits.emplace_back(d2, i);
  }
  std::sort(hits.begin(), hits.end());
  if (hits.size() > cap) hits.resize(cap);
  std::vector<int> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

PatchSolver::PatchSolver(const HybridKernelBasis& family, const ConstraintSet& constraints, std::size_t cap)
    : family_(family),
      constraints_(constraints),
      cap_(cap),
      index_(build_index(family.anchors(), family.sigma())) {
  if (family.size() != constraints.size()) throw DimensionMismatch("patch: family and constraint counts differ");
  const auto an = family.anchors();
  for (int r = 0; r < constraints.size(); ++r) {
    if (an[static_cast<std::size_t>(r)] != constraints[r].anchor) {
      throw BadConfig("patch: constraint anchors must coincide with the basis anchors");
    }
  }
}

VectorXd PatchSolver::eval(const Point& q) {
  const int nch = constraints_.channels();
  const std::vector<int> s = support_set(index_, q, cap_);
  if (s.empty()) return VectorXd::Constant(nch, *family_.fallback_value());

  std::vector<int> key = s;
  std::sort(key.begin(), key.end());
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    const Index k = static_cast<Index>(key.size());
    linalg::DenseMatrix a(k, k);
    MatrixXd g(k, nch);
    for (Index j = 0; j < k; ++j) {
      const int r = key[static_cast<std::size_t>(j)];
      const DerivativeBundle b = family_.eval_subset(constraints_[r].anchor, constraints_.order(r), key);
      a.row(j) = apply_slots(constraints_.slots(r), b).transpose();
      g.row(j) = constraints_[r].target.transpose();
    }
    MatrixXd beta;
    try {
      beta = linalg::lu_solve(linalg::lu_factor(a), linalg::RhsBlock(g));
    } catch (const SingularMatrix& e) {
      std::ostringstream msg;
      msg << "patch subsystem singular at query (";
      for (Index d = 0; d < q.size(); ++d) msg << (d ? ", " : "") << q[d];
      msg << "): " << e.what();
      throw SingularMatrix(e.pivot_index(), msg.str());
    }
    ++solves_;
    it = cache_.emplace(std::move(key), std::move(beta)).first;
  }
  const DerivativeBundle psi = family_.eval_subset(q, 0, it->first);
  return it->second.transpose() * psi.value;
}

VectorXd patch_solve(const HybridKernelBasis& family, const ConstraintSet& constraints, const Point& q,
                     std::size_t cap) {
  PatchSolver solver(family, constraints, cap);
  return solver.eval(q);
}

PointCloud read_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point cloud '" + path + "'");
  PointCloud pc;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> v;
    double x = 0.0;
    while (ss >> x) v.push_back(x);
    if (!ss.eof() || (v.size() != 4 && v.size() != 6)) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected 'x y nx ny' or 'x y z nx ny nz'");
    }
    if (width == 0) width = v.size();
    if (v.size() != width) throw IoError(path + ":" + std::to_string(lineno) + ": mixed 2D and 3D records");
    const Index m = static_cast<Index>(v.size() / 2);
    Point p(m), n(m);
    for (Index k = 0; k < m; ++k) {
      p[k] = v[static_cast<std::size_t>(k)];
      n[k] = v[static_cast<std::size_t>(k + m)];
    }
    if (!p.allFinite() || !n.allFinite() || n.norm() == 0.0) {
      throw IoError(path + ":" + std::to_string(lineno) + ": non-finite value or zero normal");
    }
    pc.points.push_back(p);
    pc.normals.push_back(n.normalized());
  }
  if (pc.points.empty()) throw IoError("point cloud '" + path + "' has no records");
  return pc;
}

double mean_nearest_neighbor_distance(const std::vector<Point>& points) {
  if (points.size() < 2) throw BadConfig("nearest neighbour distance needs at least two points");
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i != j) best = std::min(best, (points[i] - points[j]).squaredNorm());
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(points.size());
}

}  // namespace cnf
