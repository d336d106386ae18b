#include "cnf/geometry.hpp"

#include "cnf/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace cnf {

EvalGrid EvalGrid::nodes(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw BadConfig("grid: need at least 2 nodes over a nonempty interval");
  EvalGrid g;
  for (int i = 0; i < n; ++i) g.xs.push_back(lo + (hi - lo) * i / (n - 1));
  g.ys = g.xs;
  return g;
}

EvalGrid EvalGrid::stepped(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw BadConfig("grid: step and interval must be positive");
  const int n = static_cast<int>(std::floor((hi - lo) / step + 0.5)) + 1;
  EvalGrid g;
  for (int i = 0; i < n; ++i) g.xs.push_back(lo + step * i);
  g.ys = g.xs;
  return g;
}

EvalGrid EvalGrid::cells(double lo, double hi, int n) {
  if (n < 1 || !(hi > lo)) throw BadConfig("grid: need at least 1 cell over a nonempty interval");
  EvalGrid g;
  for (int i = 0; i < n; ++i) g.xs.push_back(lo + (hi - lo) * (i + 0.5) / n);
  g.ys = g.xs;
  return g;
}

Point EvalGrid::point(std::size_t k) const {
  const std::size_t n = xs.size();
  return Eigen::Vector2d(xs[k % n], ys[k / n]);
}

std::vector<Point> EvalGrid::points() const {
  std::vector<Point> out;
  out.reserve(size());
  for (std::size_t k = 0; k < size(); ++k) out.push_back(point(k));
  return out;
}

namespace {

// Corners: 0 (i,j), 1 (i+1,j), 2 (i+1,j+1), 3 (i,j+1). Edges: 0 bottom (0-1),
// 1 right (1-2), 2 top (3-2), 3 left (0-3). Bit c of the case is set when
// corner c lies below the iso value. Saddles 5 and 10 list both splittings:
// the first applies when the centre is below the iso value.
constexpr std::array<std::array<int, 4>, 16> kSegments{{
    {-1, -1, -1, -1},  // 0
    {3, 0, -1, -1},    // 1
    {0, 1, -1, -1},    // 2
    {3, 1, -1, -1},    // 3
    {1, 2, -1, -1},    // 4
    {3, 0, 1, 2},      // 5 (saddle, centre above)
    {0, 2, -1, -1},    // 6
    {3, 2, -1, -1},    // 7
    {2, 3, -1, -1},    // 8
    {0, 2, -1, -1},    // 9
    {0, 1, 2, 3},      // 10 (saddle, centre above)
    {1, 2, -1, -1},    // 11
    {1, 3, -1, -1},    // 12
    {0, 1, -1, -1},    // 13
    {3, 0, -1, -1},    // 14
    {-1, -1, -1, -1},  // 15
}};
constexpr std::array<int, 4> kSaddle5Low{3, 2, 1, 0};   // centre below: corners 0 and 2 joined
constexpr std::array<int, 4> kSaddle10Low{0, 3, 1, 2};  // centre below: corners 1 and 3 joined

struct Segment {
  std::int64_t a, b;  // global edge ids
};

}  // namespace

std::vector<Polyline> marching_squares(const EvalGrid& grid, const std::vector<double>& values, double iso,
                                       const std::vector<char>& valid) {
  const int nx = grid.nx();
  const int ny = grid.ny();
  if (values.size() != grid.size()) throw DimensionMismatch("marching_squares: value count does not match the grid");
  if (!valid.empty() && valid.size() != grid.size()) throw DimensionMismatch("marching_squares: mask size");
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteValue("marching_squares: grid values must be finite");
  }
  auto at = [&](int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; };
  auto ok = [&](int i, int j) { return valid.empty() || valid[static_cast<std::size_t>(j) * nx + i] != 0; };

  // Edge id 2·(j·nx + i) is the horizontal edge (i,j)-(i+1,j); +1 the
  // vertical edge (i,j)-(i,j+1).
  std::map<std::int64_t, Eigen::Vector2d> crossing;
  auto edge_point = [&](std::int64_t id) {
    auto it = crossing.find(id);
    if (it != crossing.end()) return id;
    const std::int64_t node = id / 2;
    const int i = static_cast<int>(node % nx);
    const int j = static_cast<int>(node / nx);
    const int i2 = (id % 2 == 0) ? i + 1 : i;
    const int j2 = (id % 2 == 0) ? j : j + 1;
    const double va = at(i, j), vb = at(i2, j2);
    const double t = (iso - va) / (vb - va);
    const Eigen::Vector2d pa(grid.xs[i], grid.ys[j]);
    const Eigen::Vector2d pb(grid.xs[i2], grid.ys[j2]);
    crossing.emplace(id, pa + t * (pb - pa));
    return id;
  };

  std::vector<Segment> segs;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      if (!ok(i, j) || !ok(i + 1, j) || !ok(i + 1, j + 1) || !ok(i, j + 1)) continue;
      const std::array<double, 4> v{at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      int cs = 0;
      for (int c = 0; c < 4; ++c) {
        if (v[c] < iso) cs |= 1 << c;
      }
      if (cs == 0 || cs == 15) continue;
      std::array<int, 4> e = kSegments[cs];
      if (cs == 5 || cs == 10) {
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        if (centre < iso) e = cs == 5 ? kSaddle5Low : kSaddle10Low;
      }
      const std::int64_t base = 2 * (static_cast<std::int64_t>(j) * nx + i);
      const std::array<std::int64_t, 4> ids{base, 2 * (static_cast<std::int64_t>(j) * nx + i + 1) + 1,
                                            2 * (static_cast<std::int64_t>(j + 1) * nx + i), base + 1};
      for (int s = 0; s < 4 && e[s] >= 0; s += 2) {
        segs.push_back(Segment{edge_point(ids[e[s]]), edge_point(ids[e[s + 1]])});
      }
    }
  }

  std::map<std::int64_t, std::vector<std::size_t>> touching;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    touching[segs[s].a].push_back(s);
    touching[segs[s].b].push_back(s);
  }
  std::vector<char> used(segs.size(), 0);
  auto next = [&](std::int64_t edge, std::size_t from) -> std::ptrdiff_t {
    for (std::size_t s : touching[edge]) {
      if (s != from && !used[s]) return static_cast<std::ptrdiff_t>(s);
    }
    return -1;
  };
  auto walk = [&](std::size_t start, std::int64_t edge) {
    std::vector<std::int64_t> chain;
    std::size_t cur = start;
    for (;;) {
      const std::ptrdiff_t n = next(edge, cur);
      if (n < 0) break;
      cur = static_cast<std::size_t>(n);
      used[cur] = 1;
      edge = segs[cur].a == edge ? segs[cur].b : segs[cur].a;
      chain.push_back(edge);
    }
    return chain;
  };

  std::vector<Polyline> out;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (used[s]) continue;
    used[s] = 1;
    const std::vector<std::int64_t> fwd = walk(s, segs[s].b);
    const bool closed = !fwd.empty() && fwd.back() == segs[s].a;
    std::vector<std::int64_t> ids;
    if (!closed) {
      const std::vector<std::int64_t> back = walk(s, segs[s].a);
      ids.assign(back.rbegin(), back.rend());
    }
    ids.push_back(segs[s].a);
    ids.push_back(segs[s].b);
    ids.insert(ids.end(), fwd.begin(), fwd.end());
    Polyline line;
    for (std::int64_t id : ids) line.push_back(crossing.at(id));
    out.push_back(std::move(line));
  }
  return out;
}

namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (a + t * d - p).norm();
}

double distance_to_lines(const Eigen::Vector2d& p, const std::vector<Polyline>& lines) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : lines) {
    if (l.size() == 1) best = std::min(best, (l[0] - p).norm());
    for (std::size_t k = 0; k + 1 < l.size(); ++k) best = std::min(best, point_segment_distance(p, l[k], l[k + 1]));
  }
  return best;
}

}  // namespace

double max_distance_to(const std::vector<Polyline>& from, const std::vector<Polyline>& to) {
  double worst = 0.0;
  for (const auto& l : from) {
    for (const auto& p : l) worst = std::max(worst, distance_to_lines(p, to));
  }
  return worst;
}

double hausdorff(const std::vector<Polyline>& a, const std::vector<Polyline>& b) {
  return std::max(max_distance_to(a, b), max_distance_to(b, a));
}

double max_radial_deviation(const std::vector<Polyline>& lines, double radius) {
  double worst = 0.0;
  for (const auto& l : lines) {
    for (const auto& p : l) worst = std::max(worst, std::abs(p.norm() - radius));
  }
  return worst;
}

namespace {

std::vector<Eigen::Vector2d> polygon_vertices(int sides, double radius) {
  std::vector<Eigen::Vector2d> v;
  for (int k = 0; k < sides; ++k) {
    const double a = std::numbers::pi / 2 + 2 * std::numbers::pi * k / sides;
    v.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return v;
}

int polygon_sides(const std::string& name) {
  if (name == "triangle") return 3;
  if (name == "diamond") return 4;
  return 0;
}

// Outward normal of the counter-clockwise edge a→b.
Eigen::Vector2d edge_normal(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = (b - a).normalized();
  return Eigen::Vector2d(d.y(), -d.x());
}

}  // namespace

OrientedPoints builtin_shape(const std::string& name, int count, double radius) {
  if (count < 1) throw BadConfig("shape: point count must be positive");
  if (!(radius > 0.0)) throw BadConfig("shape: radius must be positive");
  OrientedPoints out;
  auto push = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& n) {
    out.points.push_back(p);
    out.normals.push_back(n.normalized());
  };
  if (name == "circle") {
    for (int k = 0; k < count; ++k) {
      const double a = 2 * std::numbers::pi * k / count;
      const Eigen::Vector2d n(std::cos(a), std::sin(a));
      push(radius * n, n);
    }
    return out;
  }
  if (name == "line") {
    for (int k = 0; k < count; ++k) {
      const double t = count == 1 ? 0.5 : static_cast<double>(k) / (count - 1);
      push(Eigen::Vector2d(-radius + 2 * radius * t, 0.0), Eigen::Vector2d(0.0, 1.0));
    }
    return out;
  }
  const int sides = polygon_sides(name);
  if (sides == 0) throw BadConfig("shape: unknown built-in shape '" + name + "'");
  const auto v = polygon_vertices(sides, radius);
  const double edge = (v[1] - v[0]).norm();
  const double perimeter = edge * sides;
  for (int k = 0; k < count; ++k) {
    const double s = perimeter * k / count;
    int e = std::min(static_cast<int>(s / edge), sides - 1);
    double t = s / edge - e;
    if (t > 1.0 - 1e-12) {
      e = (e + 1) % sides;
      t = 0.0;
    }
    const Eigen::Vector2d& a = v[static_cast<std::size_t>(e)];
    const Eigen::Vector2d& b = v[static_cast<std::size_t>((e + 1) % sides)];
    Eigen::Vector2d n = edge_normal(a, b);
    if (t < 1e-12) {
      const Eigen::Vector2d& prev = v[static_cast<std::size_t>((e + sides - 1) % sides)];
      n += edge_normal(prev, a);
    }
    push(a + t * (b - a), n);
  }
  return out;
}

double builtin_shape_sdf(const std::string& name, const Eigen::Vector2d& p, double radius) {
  if (name == "circle") return p.norm() - radius;
  if (name == "line") {
    return point_segment_distance(p, Eigen::Vector2d(-radius, 0.0), Eigen::Vector2d(radius, 0.0));
  }
  const int sides = polygon_sides(name);
  if (sides == 0) throw BadConfig("shape: unknown built-in shape '" + name + "'");
  const auto v = polygon_vertices(sides, radius);
  double d = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (int k = 0; k < sides; ++k) {
    const auto& a = v[static_cast<std::size_t>(k)];
    const auto& b = v[static_cast<std::size_t>((k + 1) % sides)];
    d = std::min(d, point_segment_distance(p, a, b));
    if (edge_normal(a, b).dot(p - a) > 0.0) inside = false;
  }
  return inside ? -d : d;
}

std::vector<Point> perturbed_lattice(int nx, int nt, double sigma, std::mt19937_64& rng,
                                     const std::vector<Point>& fixed, double min_sep, double margin) {
  if (nx < 1 || nt < 1) throw BadConfig("lattice: sizes must be positive");
  if (!(sigma >= 0.0)) throw BadConfig("lattice: perturbation must be >= 0");
  std::normal_distribution<double> noise(0.0, 1.0);
  const double hx = 1.0 / nx;
  const double ht = 1.0 / (nt + 1);
  std::vector<Point> out;
  auto too_close = [&](const Eigen::Vector2d& p) {
    for (const auto& q : fixed) {
      if ((q - p).norm() < min_sep) return true;
    }
    for (const auto& q : out) {
      if ((q - p).norm() < min_sep) return true;
    }
    return false;
  };
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Eigen::Vector2d c((i + 0.5) * hx, (j + 1) * ht);
      Eigen::Vector2d p;
      int tries = 0;
      do {
        if (++tries > 1000) throw Error("lattice: cannot place a point with the required separation");
        const double dx = sigma * hx * noise(rng);
        const double dt = sigma * ht * noise(rng);
        p = Eigen::Vector2d(std::clamp(c.x() + dx, margin, 1.0 - margin), std::clamp(c.y() + dt, margin, 1.0 - margin));
      } while (too_close(p));
      out.push_back(p);
    }
  }
  return out;
}

double rmse(const std::vector<double>& f, const std::vector<double>& u) {
  if (f.size() != u.size() || f.empty()) throw DimensionMismatch("rmse: sizes differ or are empty");
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += (f[k] - u[k]) * (f[k] - u[k]);
  return std::sqrt(s / static_cast<double>(f.size()));
}

double nrmse(const std::vector<double>& f, const std::vector<double>& u) {
  double s = 0.0;
  for (double v : u) s += v * v;
  const double rms = std::sqrt(s / static_cast<double>(u.size()));
  return rmse(f, u) / rms;
}

}  // namespace cnf
