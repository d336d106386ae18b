#include "cnf/demos.hpp"

#include "cnf/errors.hpp"
#include "demo_common.hpp"

#include <cmath>

namespace cnf {

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names{"fermat", "advection", "transfer", "shape2d", "recon_sparse",
                                              "cond_ablation"};
  return names;
}

const ConfigSchema& demo_schema(const std::string& demo) {
  static const std::set<std::string> run{"demo", "seed"};
  static const std::map<std::string, ConfigSchema> schemas{
      {"fermat",
       {{"run", run},
        {"path", {"start", "end", "samples"}},
        {"medium", {"n0", "slope", "n_min"}},
        {"train", {"iterations", "lr"}}}},
      {"advection",
       {{"run", run},
        {"problem", {"beta", "perturbation", "boundary", "interior_x", "interior_t", "shift", "min_separation", "op"}},
        {"basis", {"kind", "bandwidth"}},
        {"loss", {"cond_weight", "tv_weight", "tv_samples"}},
        {"train", {"iterations", "lr"}},
        {"eval", {"resolution"}},
        {"output", {"model"}}}},
      {"transfer", {{"run", run}, {"transfer", {"model", "shifts"}}, {"eval", {"resolution"}}}},
      {"shape2d",
       {{"run", run},
        {"shape", {"name", "points", "radius", "file"}},
        {"basis", {"hidden", "features", "activation", "kernel_scale", "train_scale", "hyper_hidden", "hyper_gain"}},
        {"pretrain", {"iterations", "lr", "samples", "radius"}},
        {"train", {"epochs", "lr", "samples"}},
        {"domain", {"lo", "hi", "step"}},
        {"output", {"contour"}}}},
      {"recon_sparse",
       {{"run", run},
        {"cloud", {"shape", "points", "radius", "file"}},
        {"basis", {"inner", "hidden", "features", "activation", "kernel_scale", "hyper_hidden", "hyper_gain"}},
        {"patch", {"epsilon", "support_factor", "cap", "fallback"}},
        {"domain", {"lo", "hi", "step"}}}},
      {"cond_ablation",
       {{"run", run},
        {"problem", {"constraints", "families"}},
        {"basis", {"hidden", "features", "kernel_scale", "hyper_hidden", "target_hidden"}},
        {"train", {"iterations", "lr"}}}},
  };
  const auto it = schemas.find(demo);
  if (it == schemas.end()) throw BadConfig("unknown demo '" + demo + "'");
  return it->second;
}

namespace {

void add(Metrics& m, const std::string& k, double v) { m[k] = v; }

}  // namespace

DemoResult run_demo(const RunConfig& cfg, const std::string& out_dir, const std::string& demo) {
  std::string name = cfg.demo();
  if (!demo.empty()) {
    if (!name.empty() && name != demo) {
      throw ConfigError(cfg.line("run", "demo"), "config is for demo '" + name + "', not '" + demo + "'");
    }
    name = demo;
  }
  if (name.empty()) throw ConfigError(0, "no demo named: set [run] demo");
  bool known = false;
  for (const auto& n : demo_names()) known = known || n == name;
  if (!known) throw ConfigError(cfg.line("run", "demo"), "unknown demo '" + name + "'");

  DemoResult out;
  if (name == "fermat") {
    auto r = run_fermat(cfg, out_dir);
    add(out.metrics, "initial_time", r.initial_time);
    add(out.metrics, "final_time", r.final_time);
    add(out.metrics, "chord_time", r.chord_time);
    add(out.metrics, "max_endpoint_residual", r.max_endpoint_residual);
    out.files = r.files;
  } else if (name == "advection") {
    auto r = run_advection(cfg, out_dir);
    add(out.metrics, "rmse", r.rmse);
    add(out.metrics, "nrmse", r.nrmse);
    add(out.metrics, "initial_nrmse", r.initial_nrmse);
    add(out.metrics, "max_relative_residual", r.max_relative_residual);
    out.files = r.files;
  } else if (name == "transfer") {
    auto r = run_transfer(cfg, out_dir);
    for (const auto& row : r.rows) add(out.metrics, "nrmse_shift_" + format_real(row.shift), row.nrmse);
    out.files = r.files;
  } else if (name == "shape2d") {
    auto r = run_shape2d(cfg, out_dir);
    add(out.metrics, "normal_error_init", r.normal_error_init);
    add(out.metrics, "normal_error_final", r.normal_error_final);
    add(out.metrics, "eikonal_init", r.eikonal_init);
    add(out.metrics, "eikonal_final", r.eikonal_final);
    out.files = r.files;
  } else if (name == "recon_sparse") {
    auto r = run_recon_sparse(cfg, out_dir);
    add(out.metrics, "sigma", r.sigma);
    add(out.metrics, "max_radial_deviation", r.max_radial_deviation);
    add(out.metrics, "polylines", static_cast<double>(r.contour.size()));
    out.files = r.files;
  } else {
    auto r = run_cond_ablation(cfg, out_dir);
    for (std::size_t f = 0; f < r.families.size(); ++f) {
      const auto& c = r.conds[f];
      add(out.metrics, r.families[f] + "_final_cond", c.empty() ? NAN : c.back());
    }
    out.files = r.files;
  }
  return out;
}

namespace detail {

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return dir.empty() || dir.back() == '/' ? dir + name : dir + "/" + name;
}

}  // namespace

void OutputSink::table(const std::string& name, const CsvTable& t) {
  if (!enabled()) return;
  t.write(join(dir_, name));
  files_.push_back(join(dir_, name));
}

void OutputSink::text(const std::string& name, const std::string& body) {
  if (!enabled()) return;
  write_text_file(join(dir_, name), body);
  files_.push_back(join(dir_, name));
}

void OutputSink::metrics(const std::string& name, const Metrics& m) {
  CsvTable t({"metric", "value"});
  for (const auto& [k, v] : m) t.add_row(std::vector<std::string>{k, format_real(v)});
  table(name, t);
}

std::uint64_t prepare(const RunConfig& cfg, const std::string& demo) {
  cfg.check_schema(demo_schema(demo));
  const std::string named = cfg.demo();
  if (!named.empty() && named != demo) {
    throw ConfigError(cfg.line("run", "demo"), "config is for demo '" + named + "', not '" + demo + "'");
  }
  return cfg.get_seed("run", "seed", 0);
}

double bounded(const RunConfig& cfg, const std::string& section, const std::string& key, double fallback, double lo,
               double hi) {
  const double v = cfg.get_double(section, key, fallback);
  if (!(v >= lo && v <= hi)) {
    throw ConfigError(cfg.line(section, key), "[" + section + "] " + key + " must lie in [" + format_real(lo) + ", " +
                                                  format_real(hi) + "]");
  }
  return v;
}

long bounded_int(const RunConfig& cfg, const std::string& section, const std::string& key, long fallback, long lo,
                 long hi) {
  const long v = cfg.get_int(section, key, fallback);
  if (v < lo || v > hi) {
    throw ConfigError(cfg.line(section, key), "[" + section + "] " + key + " must lie in [" + std::to_string(lo) +
                                                  ", " + std::to_string(hi) + "]");
  }
  return v;
}

CsvTable polyline_table(const std::vector<Polyline>& lines) {
  CsvTable t({"line", "x", "y"});
  for (std::size_t l = 0; l < lines.size(); ++l) {
    for (const auto& p : lines[l]) t.add_row(std::vector<double>{static_cast<double>(l), p.x(), p.y()});
  }
  return t;
}

}  // namespace detail

}  // namespace cnf
