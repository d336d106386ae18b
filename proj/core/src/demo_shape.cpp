#include "cnf/demos.hpp"

#include "cnf/errors.hpp"
#include "cnf/output.hpp"
#include "cnf/sparse.hpp"
#include "demo_common.hpp"

#include <cmath>

namespace cnf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::vector<std::string> kDims{"x", "y"};

OrientedPoints load_points(const RunConfig& cfg) {
  const std::string file = cfg.get_string("shape", "file", "");
  if (!file.empty()) {
    const PointCloud pc = read_point_cloud(file);
    if (pc.points.empty() || pc.points[0].size() != 2) throw BadConfig("shape: point file must hold 2D records");
    return OrientedPoints{pc.points, pc.normals};
  }
  const std::string name = cfg.get_string("shape", "name", "circle");
  const int count = static_cast<int>(detail::bounded_int(cfg, "shape", "points", 32, 1, 100000));
  const double radius = detail::bounded(cfg, "shape", "radius", 1.0, 1e-6, 1e6);
  try {
    return builtin_shape(name, count, radius);
  } catch (const BadConfig& e) {
    throw ConfigError(cfg.line("shape", "name"), e.what());
  }
}

// Rows per point: Φ = value, ∂Φ/∂x = gx, ∂Φ/∂y = gy.
ConstraintSet normal_constraints(const OrientedPoints& pts, const std::vector<double>& values,
                                 const std::vector<Point>& grads) {
  const LinearOperator id = identity_operator(kDims);
  const LinearOperator dx = parse_operator("dx", kDims);
  const LinearOperator dy = parse_operator("dy", kDims);
  std::vector<Constraint> rows;
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    rows.push_back(Constraint{id, pts.points[i], VectorXd::Constant(1, values[i])});
    rows.push_back(Constraint{dx, pts.points[i], VectorXd::Constant(1, grads[i][0])});
    rows.push_back(Constraint{dy, pts.points[i], VectorXd::Constant(1, grads[i][1])});
  }
  return ConstraintSet(std::move(rows), 1);
}

double circle_sdf(const Point& p, double r) { return p.norm() - r; }

Point circle_grad(const Point& p) {
  const double n = p.norm();
  return n > 0.0 ? Point(p / n) : Point(Eigen::Vector2d(1.0, 0.0));
}

double normal_error(const ConstrainedField& f, const OrientedPoints& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    const DerivativeBundle b = f.eval_bundle(pts.points[i], 1);
    s += (b.jac.row(0).transpose() - pts.normals[i]).norm();
  }
  return s / static_cast<double>(pts.points.size());
}

double value_error(const ConstrainedField& f, const OrientedPoints& pts) {
  double worst = 0.0;
  for (const auto& p : pts.points) worst = std::max(worst, std::abs(f.eval(p)[0]));
  return worst;
}

}  // namespace

ShapeResult run_shape2d(const RunConfig& cfg, const std::string& out_dir) {
  const std::uint64_t seed = detail::prepare(cfg, "shape2d");
  const OrientedPoints pts = load_points(cfg);

  BasisConfig bc;
  bc.kind = "hypernet_kernel";
  bc.input_dim = 2;
  bc.hidden = cfg.get_ints("basis", "hidden", {64});
  bc.features = static_cast<int>(detail::bounded_int(cfg, "basis", "features", 32, 1, 100000));
  try {
    bc.activation = parse_activation(cfg.get_string("basis", "activation", "softplus"));
  } catch (const Error& e) {
    throw ConfigError(cfg.line("basis", "activation"), e.what());
  }
  bc.activation_param = bc.activation == Activation::kSine ? kDefaultSineOmega : kDefaultSoftplusBeta;
  bc.kernel_scale = detail::bounded(cfg, "basis", "kernel_scale", 50.0, 1e-12, 1e12);
  bc.train_scale = cfg.get_bool("basis", "train_scale", true);
  bc.hyper_hidden = cfg.get_ints("basis", "hyper_hidden", {16});
  bc.hyper_gain = detail::bounded(cfg, "basis", "hyper_gain", 1.0, 0.0, 1e6);
  for (const auto& p : pts.points) {
    for (int k = 0; k < 3; ++k) bc.anchors.push_back(p);
  }

  const int pre_iters = static_cast<int>(detail::bounded_int(cfg, "pretrain", "iterations", 100, 0, 10000000));
  const double pre_lr = detail::bounded(cfg, "pretrain", "lr", 1e-3, 0.0, 10.0);
  const int pre_samples = static_cast<int>(detail::bounded_int(cfg, "pretrain", "samples", 256, 1, 10000000));
  const double pre_radius = detail::bounded(cfg, "pretrain", "radius", 1.0, 1e-6, 1e6);
  const int epochs = static_cast<int>(detail::bounded_int(cfg, "train", "epochs", 50, 0, 10000000));
  const double lr = detail::bounded(cfg, "train", "lr", 1e-5, 0.0, 10.0);
  const int samples = static_cast<int>(detail::bounded_int(cfg, "train", "samples", 1000, 1, 10000000));
  const double lo = cfg.get_double("domain", "lo", -2.0);
  const double hi = cfg.get_double("domain", "hi", 2.0);
  if (!(hi > lo)) throw ConfigError(cfg.line("domain", "hi"), "[domain] hi must exceed lo");
  const double step = detail::bounded(cfg, "domain", "step", 1.0 / 60.0, 1e-6, hi - lo);
  const bool contour = cfg.get_bool("output", "contour", true);
  const Box box{Eigen::Vector2d(lo, lo), Eigen::Vector2d(hi, hi)};

  // Pretraining: same anchors and operators, circle SDF targets and data.
  std::vector<double> pre_values, zeros(pts.points.size(), 0.0);
  std::vector<Point> pre_grads;
  for (const auto& p : pts.points) {
    pre_values.push_back(circle_sdf(p, pre_radius));
    pre_grads.push_back(circle_grad(p));
  }
  std::unique_ptr<BasisFamily> basis;
  try {
    basis = init_basis(bc, seed);
  } catch (const BadConfig& e) {
    throw ConfigError(0, e.what());
  }
  ConstrainedField field(std::move(basis), normal_constraints(pts, pre_values, pre_grads));
  field.solve();

  ShapeResult r;
  std::mt19937_64 rng(seed);
  std::vector<Point> xs;
  MatrixXd ys(pre_samples, 1);
  for (int k = 0; k < pre_samples; ++k) {
    xs.push_back(box.sample(rng));
    ys(k, 0) = circle_sdf(xs.back(), pre_radius);
  }
  LossSpec pre;
  pre.add(1.0, std::make_shared<DataL2Loss>(xs, ys));
  TrainOptions pre_opt;
  pre_opt.iterations = pre_iters;
  pre_opt.lr = pre_lr;
  pre_opt.seed = seed;
  r.pretrain = train(field, pre, pre_opt);
  if (r.pretrain.singular) throw SingularMatrix(0, r.pretrain.message);

  const ConstraintSet target = normal_constraints(pts, zeros, pts.normals);
  field.resolve_targets(target.targets());
  r.target_norm = target.targets().cwiseAbs().maxCoeff();

  const EikonalLoss eik(box, samples);
  std::mt19937_64 probe_rng(seed + 1);
  r.normal_error_init = normal_error(field, pts);
  r.eikonal_init = eik.evaluate(field, probe_rng).value;

  LossSpec spec;
  spec.add(1.0, std::make_shared<EikonalLoss>(box, samples));
  TrainOptions opt;
  opt.iterations = epochs;
  opt.lr = lr;
  opt.seed = seed + 2;
  r.trace = train(field, spec, opt);
  if (r.trace.singular) throw SingularMatrix(0, r.trace.message);

  probe_rng.seed(seed + 1);
  r.normal_error_final = normal_error(field, pts);
  r.value_error_final = value_error(field, pts);
  r.eikonal_final = eik.evaluate(field, probe_rng).value;

  if (contour) {
    const EvalGrid grid = EvalGrid::stepped(lo, hi, step);
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) v[k] = field.eval(grid.point(k))[0];
    r.contour = marching_squares(grid, v, 0.0);
  }

  detail::OutputSink sink(out_dir);
  sink.table("shape_pretrain_trace.csv", r.pretrain.table());
  sink.table("shape_trace.csv", r.trace.table());
  if (contour) {
    sink.table("shape_contour.csv", detail::polyline_table(r.contour));
    sink.text("shape_contour.svg", svg_polylines("zero level set", r.contour, lo, hi, pts.points));
  }
  sink.metrics("shape_metrics.csv", {{"normal_error_init", r.normal_error_init},
                                     {"normal_error_final", r.normal_error_final},
                                     {"value_error_final", r.value_error_final},
                                     {"eikonal_init", r.eikonal_init},
                                     {"eikonal_final", r.eikonal_final},
                                     {"final_cond", field.system().cond},
                                     {"constraints", static_cast<double>(field.constraints().size())}});
  r.files = sink.files();
  return r;
}

}  // namespace cnf
