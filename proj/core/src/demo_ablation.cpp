#include "cnf/demos.hpp"

#include "cnf/errors.hpp"
#include "cnf/output.hpp"
#include "demo_common.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cnf {

namespace {

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

AblationResult run_cond_ablation(const RunConfig& cfg, const std::string& out_dir) {
  const std::uint64_t seed = detail::prepare(cfg, "cond_ablation");
  const int n = static_cast<int>(detail::bounded_int(cfg, "problem", "constraints", 512, 1, 100000));
  AblationResult r;
  r.families = split(cfg.get_string("problem", "families", "constraint_layer, hypernet, dot_kernel, gaussian_kernel"));
  for (const auto& f : r.families) {
    if (f != "constraint_layer" && f != "hypernet" && f != "dot_kernel" && f != "gaussian_kernel") {
      throw ConfigError(cfg.line("problem", "families"), "[problem] families: unknown family '" + f + "'");
    }
  }
  const auto hidden = cfg.get_ints("basis", "hidden", {64});
  const int features = static_cast<int>(detail::bounded_int(cfg, "basis", "features", 64, 1, 100000));
  const double scale = detail::bounded(cfg, "basis", "kernel_scale", 1.0, 1e-12, 1e12);
  const auto hyper_hidden = cfg.get_ints("basis", "hyper_hidden", {16});
  const auto target_hidden = cfg.get_ints("basis", "target_hidden", {16});
  TrainOptions opt;
  opt.iterations = static_cast<int>(detail::bounded_int(cfg, "train", "iterations", 500, 0, 10000000));
  opt.lr = detail::bounded(cfg, "train", "lr", 5e-4, 0.0, 10.0);
  opt.seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<std::string> dims{"x", "y"};
  std::vector<Constraint> rows;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d p(u(rng), u(rng));
    const double g = std::sin(std::numbers::pi * p.x()) * std::cos(std::numbers::pi * p.y());
    rows.push_back(Constraint{identity_operator(dims), p, Eigen::VectorXd::Constant(1, g)});
  }
  const ConstraintSet cs(std::move(rows), 1);
  const double inf = std::numeric_limits<double>::infinity();

  for (const auto& fam : r.families) {
    BasisConfig bc;
    bc.kind = fam;
    bc.input_dim = 2;
    bc.activation = Activation::kTanh;
    bc.hidden = hidden;
    bc.features = features;
    bc.kernel_scale = scale;
    bc.hyper_hidden = hyper_hidden;
    bc.count = n;
    if (fam == "constraint_layer") bc.output_activation = Activation::kTanh;
    if (fam == "hypernet") bc.hidden = target_hidden;
    if (fam == "dot_kernel" || fam == "gaussian_kernel") bc.anchors = cs.anchors();

    std::vector<double> conds;
    try {
      ConstrainedField field(init_basis(bc, seed), cs);
      field.solve();
      LossSpec spec;
      spec.add(1.0, std::make_shared<CondLoss>());
      const TrainTrace t = train(field, spec, opt);
      for (const auto& row : t.rows) conds.push_back(row.cond);
    } catch (const SingularMatrix&) {
    }
    conds.resize(static_cast<std::size_t>(opt.iterations), inf);
    r.conds.push_back(std::move(conds));
  }

  detail::OutputSink sink(out_dir);
  std::vector<std::string> header{"iter"};
  for (const auto& f : r.families) header.push_back(f);
  CsvTable t(header);
  std::vector<Series> series;
  for (const auto& f : r.families) series.push_back(Series{f, {}, {}});
  for (int it = 0; it < opt.iterations; ++it) {
    std::vector<double> row{static_cast<double>(it)};
    for (std::size_t f = 0; f < r.families.size(); ++f) {
      const double c = r.conds[f][static_cast<std::size_t>(it)];
      row.push_back(c);
      series[f].x.push_back(it);
      series[f].y.push_back(c);
    }
    t.add_row(row);
  }
  sink.table("ablation_cond.csv", t);
  sink.text("ablation_cond.svg", svg_line_chart("condition surrogate vs iteration", series, true));
  r.files = sink.files();
  return r;
}

}  // namespace cnf
