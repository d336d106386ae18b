#include "cnf/demos.hpp"

#include "cnf/errors.hpp"
#include "cnf/output.hpp"
#include "cnf/sparse.hpp"
#include "demo_common.hpp"

#include <cmath>
#include <limits>

namespace cnf {

using Eigen::VectorXd;

ReconResult run_recon_sparse(const RunConfig& cfg, const std::string& out_dir) {
  const std::uint64_t seed = detail::prepare(cfg, "recon_sparse");
  const std::string file = cfg.get_string("cloud", "file", "");
  const std::string shape = cfg.get_string("cloud", "shape", "circle");
  const double radius = detail::bounded(cfg, "cloud", "radius", 1.0, 1e-6, 1e6);
  OrientedPoints pts;
  if (!file.empty()) {
    const PointCloud pc = read_point_cloud(file);
    if (pc.points.empty() || pc.points[0].size() != 2) throw BadConfig("recon: point file must hold 2D records");
    pts = OrientedPoints{pc.points, pc.normals};
  } else {
    const int count = static_cast<int>(detail::bounded_int(cfg, "cloud", "points", 2000, 2, 10000000));
    try {
      pts = builtin_shape(shape, count, radius);
    } catch (const BadConfig& e) {
      throw ConfigError(cfg.line("cloud", "shape"), e.what());
    }
  }
  if (pts.points.size() < 2) throw BadConfig("recon: need at least 2 points");

  const double eps = detail::bounded(cfg, "patch", "epsilon", 0.01, 1e-12, 1e6);
  const double factor = detail::bounded(cfg, "patch", "support_factor", 4.0, 1e-6, 1e9);
  const auto cap = static_cast<std::size_t>(detail::bounded_int(cfg, "patch", "cap", 60, 1, 100000));
  const double fallback = cfg.get_double("patch", "fallback", 1e5);
  const double lo = cfg.get_double("domain", "lo", -1.5);
  const double hi = cfg.get_double("domain", "hi", 1.5);
  if (!(hi > lo)) throw ConfigError(cfg.line("domain", "hi"), "[domain] hi must exceed lo");
  const double step = detail::bounded(cfg, "domain", "step", 0.005, 1e-6, hi - lo);

  ReconResult r;
  r.points = static_cast<int>(pts.points.size());
  r.sigma = factor * mean_nearest_neighbor_distance(pts.points) / 3.0;

  const std::vector<std::string> dims{"x", "y"};
  const LinearOperator id = identity_operator(dims);
  std::vector<Constraint> rows;
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    const Point& p = pts.points[i];
    const Point& n = pts.normals[i];
    rows.push_back(Constraint{id, p, VectorXd::Zero(1)});
    rows.push_back(Constraint{id, Point(p + eps * n), VectorXd::Constant(1, eps)});
    rows.push_back(Constraint{id, Point(p - eps * n), VectorXd::Constant(1, -eps)});
  }
  const ConstraintSet cs(std::move(rows), 1);

  BasisConfig bc;
  bc.kind = "hybrid_kernel";
  bc.input_dim = 2;
  bc.anchors = cs.anchors();
  bc.inner = cfg.get_string("basis", "inner", "gaussian_kernel");
  bc.hidden = cfg.get_ints("basis", "hidden", {16});
  bc.features = static_cast<int>(detail::bounded_int(cfg, "basis", "features", 8, 1, 100000));
  try {
    bc.activation = parse_activation(cfg.get_string("basis", "activation", "softplus"));
  } catch (const Error& e) {
    throw ConfigError(cfg.line("basis", "activation"), e.what());
  }
  bc.activation_param = bc.activation == Activation::kSine ? kDefaultSineOmega : kDefaultSoftplusBeta;
  bc.kernel_scale = detail::bounded(cfg, "basis", "kernel_scale", 50.0, 1e-12, 1e12);
  bc.hyper_hidden = cfg.get_ints("basis", "hyper_hidden", {16});
  bc.hyper_gain = detail::bounded(cfg, "basis", "hyper_gain", 1.0, 0.0, 1e6);
  bc.sigma = r.sigma;
  bc.fallback_value = fallback;
  std::unique_ptr<BasisFamily> fam;
  try {
    fam = init_basis(bc, seed);
  } catch (const BadConfig& e) {
    throw ConfigError(cfg.line("basis", "inner"), e.what());
  }
  const auto& hybrid = dynamic_cast<const HybridKernelBasis&>(*fam);

  PatchSolver solver(hybrid, cs, cap);
  const EvalGrid grid = EvalGrid::stepped(lo, hi, step);
  std::vector<double> values(grid.size());
  std::vector<char> valid(grid.size(), 1);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Point q = grid.point(k);
    if (support_set(solver.index(), q, cap).empty()) {
      valid[k] = 0;
      values[k] = fallback;
      ++r.empty_queries;
      continue;
    }
    values[k] = solver.eval(q)[0];
  }
  r.patch_solves = solver.solves();
  // Cells touching an unsupported corner only carry the jump to the fallback
  // value, not a zero crossing of the field, so they are masked out.
  r.contour = marching_squares(grid, values, 0.0, valid);
  r.max_radial_deviation = (file.empty() && shape == "circle") ? max_radial_deviation(r.contour, radius)
                                                                : std::numeric_limits<double>::quiet_NaN();

  detail::OutputSink sink(out_dir);
  sink.table("recon_contour.csv", detail::polyline_table(r.contour));
  sink.text("recon_contour.svg", svg_polylines("reconstructed zero level set", r.contour, lo, hi));
  sink.metrics("recon_metrics.csv", {{"points", static_cast<double>(r.points)},
                                     {"sigma", r.sigma},
                                     {"max_radial_deviation", r.max_radial_deviation},
                                     {"empty_queries", static_cast<double>(r.empty_queries)},
                                     {"patch_solves", static_cast<double>(r.patch_solves)},
                                     {"polylines", static_cast<double>(r.contour.size())}});
  r.files = sink.files();
  return r;
}

}  // namespace cnf
