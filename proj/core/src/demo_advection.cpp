#include "cnf/demos.hpp"

#include "cnf/errors.hpp"
#include "cnf/output.hpp"
#include "demo_common.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cnf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::vector<std::string> kDims{"x", "t"};

double exact(double x, double t, double beta, double shift) {
  return std::sin(2.0 * std::numbers::pi * (x - beta * t)) + shift;
}

// Everything needed to rebuild a trained advection field.
struct AdvectionModel {
  std::string kind;
  double beta = 0.1;
  std::string op = "dt + beta*dx";
  std::vector<Point> anchors;
  std::vector<char> boundary;  // 1 for initial-condition rows
  std::vector<double> params;
};

ConstraintSet advection_constraints(const AdvectionModel& m, double shift) {
  CoefficientRegistry coeffs;
  coeffs.set("beta", m.beta);
  const LinearOperator pde = parse_operator(m.op, kDims);
  const LinearOperator id = identity_operator(kDims);
  std::vector<Constraint> rows;
  for (std::size_t r = 0; r < m.anchors.size(); ++r) {
    VectorXd g(1);
    g[0] = m.boundary[r] ? exact(m.anchors[r][0], 0.0, m.beta, shift) : 0.0;
    rows.push_back(Constraint{m.boundary[r] ? id : pde, m.anchors[r], g});
  }
  return ConstraintSet(std::move(rows), 1, coeffs);
}

std::string model_text(const AdvectionModel& m) {
  std::ostringstream os;
  os << "# cnfield advection model\n";
  os << "kind " << m.kind << "\n";
  os << "beta " << format_real(m.beta) << "\n";
  os << "op " << m.op << "\n";
  os << "rows " << m.anchors.size() << "\n";
  for (std::size_t r = 0; r < m.anchors.size(); ++r) {
    os << (m.boundary[r] ? "b " : "p ") << format_real(m.anchors[r][0]) << " " << format_real(m.anchors[r][1]) << "\n";
  }
  os << "params " << m.params.size() << "\n";
  for (double v : m.params) os << format_real(v) << "\n";
  return os.str();
}

AdvectionModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model file '" + path + "'");
  AdvectionModel m;
  std::string line, word;
  auto next = [&](const char* expect) {
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      ls >> word;
      if (word != expect) break;
      return line.substr(word.size() + (line.size() > word.size() ? 1 : 0));
    }
    throw IoError("model file '" + path + "': expected '" + expect + "'");
  };
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw IoError("model file '" + path + "': bad number '" + s + "'");
    }
    return v;
  };
  m.kind = next("kind");
  if (m.kind != "skewed_rbf" && m.kind != "rbf") throw IoError("model file '" + path + "': unknown kind " + m.kind);
  m.beta = number(next("beta"));
  m.op = next("op");
  const long rows = std::lround(number(next("rows")));
  for (long r = 0; r < rows; ++r) {
    std::string tag, xs, ts;
    if (!(in >> tag >> xs >> ts) || (tag != "b" && tag != "p")) throw IoError("model file '" + path + "': bad row");
    m.anchors.push_back(Eigen::Vector2d(number(xs), number(ts)));
    m.boundary.push_back(tag == "b");
  }
  std::getline(in, line);
  const long count = std::lround(number(next("params")));
  for (long k = 0; k < count; ++k) {
    std::string v;
    if (!(in >> v)) throw IoError("model file '" + path + "': truncated parameters");
    m.params.push_back(number(v));
  }
  return m;
}

std::unique_ptr<BasisFamily> model_basis(const AdvectionModel& m) {
  auto b = std::make_unique<SkewedRBFBasis>(m.anchors, 0.1, m.kind == "rbf");
  if (static_cast<int>(m.params.size()) != b->param_count()) {
    throw IoError("model file: parameter count does not match the basis");
  }
  b->set_params(m.params);
  return b;
}

struct GridError {
  std::vector<double> f, u;
};

GridError evaluate_grid(const ConstrainedField& field, const EvalGrid& grid, double beta, double shift) {
  GridError e;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Point p = grid.point(k);
    e.f.push_back(field.eval(p)[0]);
    e.u.push_back(exact(p[0], p[1], beta, shift));
  }
  return e;
}

double relative_residual(const ConstrainedField& f) {
  return f.max_residual() / (f.constraints().targets().cwiseAbs().maxCoeff() + 1.0);
}

}  // namespace

AdvectionResult run_advection(const RunConfig& cfg, const std::string& out_dir) {
  const std::uint64_t seed = detail::prepare(cfg, "advection");
  AdvectionModel m;
  m.beta = cfg.get_double("problem", "beta", 0.1);
  m.op = cfg.get_string("problem", "op", "dt + beta*dx");
  m.kind = cfg.get_string("basis", "kind", "skewed_rbf");
  if (m.kind != "skewed_rbf" && m.kind != "rbf") {
    throw ConfigError(cfg.line("basis", "kind"), "[basis] kind must be skewed_rbf or rbf");
  }
  const double sigma = detail::bounded(cfg, "problem", "perturbation", 0.1, 0.0, 10.0);
  const int nb = static_cast<int>(detail::bounded_int(cfg, "problem", "boundary", 32, 1, 100000));
  const int nx = static_cast<int>(detail::bounded_int(cfg, "problem", "interior_x", 32, 1, 100000));
  const int nt = static_cast<int>(detail::bounded_int(cfg, "problem", "interior_t", 31, 1, 100000));
  const double shift = cfg.get_double("problem", "shift", 0.0);
  const double min_sep = detail::bounded(cfg, "problem", "min_separation", 1e-4, 0.0, 0.1);
  const double bandwidth = detail::bounded(cfg, "basis", "bandwidth", 0.05, 1e-6, 100.0);
  const double w_cond = detail::bounded(cfg, "loss", "cond_weight", 1.0, 0.0, 1e12);
  const double w_tv = detail::bounded(cfg, "loss", "tv_weight", 1.0, 0.0, 1e12);
  const int tv_samples = static_cast<int>(detail::bounded_int(cfg, "loss", "tv_samples", 256, 1, 10000000));
  const int res = static_cast<int>(detail::bounded_int(cfg, "eval", "resolution", 64, 1, 100000));
  TrainOptions opt;
  opt.iterations = static_cast<int>(detail::bounded_int(cfg, "train", "iterations", 100, 0, 10000000));
  opt.lr = detail::bounded(cfg, "train", "lr", 1e-2, 0.0, 10.0);
  opt.seed = seed;
  const std::string model_name = cfg.get_string("output", "model", "advection_model.txt");
  try {
    parse_operator(m.op, kDims);
  } catch (const ParseError& e) {
    throw ConfigError(cfg.line("problem", "op"), std::string("[problem] op: ") + e.what());
  }

  std::mt19937_64 rng(seed);
  for (int i = 0; i < nb; ++i) {
    m.anchors.push_back(Eigen::Vector2d((i + 0.5) / nb, 0.0));
    m.boundary.push_back(1);
  }
  for (auto& p : perturbed_lattice(nx, nt, sigma, rng, m.anchors, min_sep)) {
    m.anchors.push_back(p);
    m.boundary.push_back(0);
  }

  BasisConfig bc;
  bc.kind = m.kind;
  bc.anchors = m.anchors;
  bc.bandwidth = bandwidth;
  ConstrainedField field(init_basis(bc, seed), advection_constraints(m, shift));
  field.solve();

  AdvectionResult r;
  r.constraints = field.constraints().size();
  r.target_norm = field.constraints().targets().cwiseAbs().maxCoeff();
  const EvalGrid grid = EvalGrid::cells(0.0, 1.0, res);
  {
    const GridError e = evaluate_grid(field, grid, m.beta, shift);
    r.initial_rmse = rmse(e.f, e.u);
    r.initial_nrmse = nrmse(e.f, e.u);
  }
  r.max_relative_residual = relative_residual(field);

  Box box{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0)};
  LossSpec spec;
  spec.add(w_cond, std::make_shared<CondLoss>());
  spec.add(w_tv, std::make_shared<TotalVariationLoss>(box, tv_samples));
  opt.on_iteration = [&](int, const ConstrainedField& f) {
    r.max_relative_residual = std::max(r.max_relative_residual, relative_residual(f));
  };
  r.trace = train(field, spec, opt);
  if (r.trace.singular) throw SingularMatrix(0, r.trace.message);

  const GridError e = evaluate_grid(field, grid, m.beta, shift);
  r.rmse = rmse(e.f, e.u);
  r.nrmse = nrmse(e.f, e.u);

  detail::OutputSink sink(out_dir);
  sink.table("advection_trace.csv", r.trace.table());
  CsvTable map({"x", "t", "u", "exact", "abs_error"});
  std::vector<double> err(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Point p = grid.point(k);
    err[k] = std::abs(e.f[k] - e.u[k]);
    map.add_row(std::vector<double>{p[0], p[1], e.f[k], e.u[k], err[k]});
  }
  sink.table("advection_error.csv", map);
  sink.text("advection_error.svg", svg_heatmap("absolute error (" + m.kind + ")", grid, err));
  sink.metrics("advection_metrics.csv", {{"initial_rmse", r.initial_rmse},
                                         {"initial_nrmse", r.initial_nrmse},
                                         {"rmse", r.rmse},
                                         {"nrmse", r.nrmse},
                                         {"max_relative_residual", r.max_relative_residual},
                                         {"constraints", static_cast<double>(r.constraints)},
                                         {"final_cond", field.system().cond}});
  m.params.assign(field.family().params().begin(), field.family().params().end());
  sink.text(model_name, model_text(m));
  r.files = sink.files();
  return r;
}

TransferResult run_transfer(const RunConfig& cfg, const std::string& out_dir) {
  detail::prepare(cfg, "transfer");
  const std::string path = cfg.get_string("transfer", "model", "");
  if (path.empty()) throw ConfigError(cfg.line("transfer", "model"), "[transfer] model is required");
  const auto shifts = cfg.get_doubles("transfer", "shifts", {0.0, 1.0, 10.0, 100.0});
  const int res = static_cast<int>(detail::bounded_int(cfg, "eval", "resolution", 64, 1, 100000));

  const AdvectionModel m = read_model(path);
  ConstrainedField field(model_basis(m), advection_constraints(m, shifts.empty() ? 0.0 : shifts[0]));
  field.solve();
  const EvalGrid grid = EvalGrid::cells(0.0, 1.0, res);

  TransferResult r;
  for (double mu : shifts) {
    field.resolve_targets(advection_constraints(m, mu).targets());
    const GridError e = evaluate_grid(field, grid, m.beta, mu);
    r.rows.push_back(TransferRow{mu, rmse(e.f, e.u), nrmse(e.f, e.u)});
  }

  detail::OutputSink sink(out_dir);
  CsvTable t({"shift", "rmse", "nrmse"});
  for (const auto& row : r.rows) t.add_row(std::vector<double>{row.shift, row.rmse, row.nrmse});
  sink.table("transfer.csv", t);
  r.files = sink.files();
  return r;
}

}  // namespace cnf
