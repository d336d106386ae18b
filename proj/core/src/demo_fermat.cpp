#include "cnf/demos.hpp"

#include "cnf/errors.hpp"
#include "cnf/output.hpp"
#include "demo_common.hpp"

#include <algorithm>
#include <cmath>

namespace cnf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

TravelTimeLoss::TravelTimeLoss(int samples, double n0, double slope, double n_min)
    : samples_(samples), n0_(n0), slope_(slope), n_min_(n_min) {
  if (samples_ < 2) throw BadConfig("travel_time: need at least 2 samples");
  if (!(n_min_ > 0.0)) throw BadConfig("travel_time: n_min must be positive");
}

double TravelTimeLoss::index(double y) const { return std::max(n0_ + slope_ * y, n_min_); }

LossEvaluation TravelTimeLoss::evaluate(const ConstrainedField& field, std::mt19937_64&) const {
  if (field.dims() != 1 || field.channels() != 2) throw DimensionMismatch("travel_time: needs a 1D -> 2D field");
  LossEvaluation out;
  const double h = 1.0 / (samples_ - 1);
  for (int k = 0; k < samples_; ++k) {
    const double w = (k == 0 || k == samples_ - 1) ? 0.5 * h : h;
    Point x(1);
    x[0] = k * h;
    const DerivativeBundle b = field.eval_bundle(x, 1);
    const double dx = b.jac(0, 0), dy = b.jac(1, 0);
    const double speed = std::max(std::hypot(dx, dy), kNormFloor);
    const double y = b.value[1];
    const double n = index(y);
    const double dn = n0_ + slope_ * y > n_min_ ? slope_ : 0.0;
    out.value += w * speed * n;
    FieldProbe p;
    p.x = x;
    p.order = 1;
    p.cot = MatrixXd::Zero(2, 2);
    p.cot(0, 1) = w * n * dx / speed;
    p.cot(1, 0) = w * speed * dn;
    p.cot(1, 1) = w * n * dy / speed;
    out.probes.push_back(std::move(p));
  }
  return out;
}

namespace {

std::vector<Eigen::Vector2d> sample_path(const ConstrainedField& f, int count) {
  std::vector<Eigen::Vector2d> out;
  for (int k = 0; k < count; ++k) {
    Point x(1);
    x[0] = static_cast<double>(k) / (count - 1);
    const VectorXd v = f.eval(x);
    out.emplace_back(v[0], v[1]);
  }
  return out;
}

double endpoint_residual(const ConstrainedField& f, const VectorXd& p0, const VectorXd& p1) {
  Point a(1), b(1);
  a[0] = 0.0;
  b[0] = 1.0;
  return std::max((f.eval(a) - p0).cwiseAbs().maxCoeff(), (f.eval(b) - p1).cwiseAbs().maxCoeff());
}

}  // namespace

FermatResult run_fermat(const RunConfig& cfg, const std::string& out_dir) {
  const std::uint64_t seed = detail::prepare(cfg, "fermat");
  const auto start = cfg.get_doubles("path", "start", {0.0, 0.0});
  const auto end = cfg.get_doubles("path", "end", {1.0, 1.0});
  if (start.size() != 2) throw ConfigError(cfg.line("path", "start"), "[path] start needs 2 values");
  if (end.size() != 2) throw ConfigError(cfg.line("path", "end"), "[path] end needs 2 values");
  const int samples = static_cast<int>(detail::bounded_int(cfg, "path", "samples", 256, 2, 1000000));
  const double n0 = cfg.get_double("medium", "n0", 1.0);
  const double slope = cfg.get_double("medium", "slope", 1.0);
  const double n_min = detail::bounded(cfg, "medium", "n_min", 0.05, 1e-6, 1e6);
  TrainOptions opt;
  opt.iterations = static_cast<int>(detail::bounded_int(cfg, "train", "iterations", 2000, 0, 10000000));
  opt.lr = detail::bounded(cfg, "train", "lr", 1e-2, 0.0, 10.0);
  opt.seed = seed;

  const VectorXd p0 = Eigen::Vector2d(start[0], start[1]);
  const VectorXd p1 = Eigen::Vector2d(end[0], end[1]);
  const std::vector<std::string> dims{"s"};
  Point s0(1), s1(1);
  s0[0] = 0.0;
  s1[0] = 1.0;
  ConstraintSet cs({Constraint{identity_operator(dims), s0, p0}, Constraint{identity_operator(dims), s1, p1}}, 2);

  BasisConfig bc;
  bc.kind = "polynomial";
  bc.input_dim = 1;
  bc.count = 2;
  bc.channels = 2;
  ConstrainedField field(init_basis(bc, seed), cs);
  field.solve();

  auto loss = std::make_shared<TravelTimeLoss>(samples, n0, slope, n_min);
  LossSpec spec;
  spec.add(1.0, loss);

  FermatResult r;
  r.target_norm = std::max(p0.cwiseAbs().maxCoeff(), p1.cwiseAbs().maxCoeff());
  std::mt19937_64 rng(seed);
  r.initial_time = loss->evaluate(field, rng).value;
  r.initial_path = sample_path(field, 101);
  r.max_endpoint_residual = endpoint_residual(field, p0, p1);
  {
    const double h = 1.0 / (samples - 1);
    const double len = (p1 - p0).norm();
    for (int k = 0; k < samples; ++k) {
      const double w = (k == 0 || k == samples - 1) ? 0.5 * h : h;
      r.chord_time += w * len * loss->index(p0[1] + k * h * (p1[1] - p0[1]));
    }
  }

  opt.on_iteration = [&](int, const ConstrainedField& f) {
    r.max_endpoint_residual = std::max(r.max_endpoint_residual, endpoint_residual(f, p0, p1));
  };
  r.trace = train(field, spec, opt);
  if (r.trace.singular) throw SingularMatrix(0, r.trace.message);
  r.final_time = loss->evaluate(field, rng).value;
  r.final_path = sample_path(field, 101);

  detail::OutputSink sink(out_dir);
  sink.table("fermat_trace.csv", r.trace.table());
  CsvTable path({"s", "x_initial", "y_initial", "x_final", "y_final"});
  for (std::size_t k = 0; k < r.final_path.size(); ++k) {
    path.add_row(std::vector<double>{static_cast<double>(k) / 100.0, r.initial_path[k].x(), r.initial_path[k].y(),
                                     r.final_path[k].x(), r.final_path[k].y()});
  }
  sink.table("fermat_path.csv", path);
  std::vector<Series> series(3);
  series[0].name = "initial";
  series[1].name = "optimized";
  series[2].name = "chord";
  for (std::size_t k = 0; k < r.final_path.size(); ++k) {
    series[0].x.push_back(r.initial_path[k].x());
    series[0].y.push_back(r.initial_path[k].y());
    series[1].x.push_back(r.final_path[k].x());
    series[1].y.push_back(r.final_path[k].y());
  }
  series[2].x = {p0[0], p1[0]};
  series[2].y = {p0[1], p1[1]};
  sink.text("fermat_path.svg", svg_line_chart("least-time path", series));
  sink.metrics("fermat_metrics.csv", {{"initial_time", r.initial_time},
                                      {"final_time", r.final_time},
                                      {"chord_time", r.chord_time},
                                      {"max_endpoint_residual", r.max_endpoint_residual},
                                      {"iterations", static_cast<double>(r.trace.rows.size())}});
  r.files = sink.files();
  return r;
}

}  // namespace cnf
