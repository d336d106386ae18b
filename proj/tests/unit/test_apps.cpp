#include "doctest.h"

#include "cnf/config.hpp"
#include "cnf/csv.hpp"
#include "cnf/demos.hpp"
#include "cnf/errors.hpp"
#include "cnf/geometry.hpp"
#include "cnf/output.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

using namespace cnf;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    RunConfig::parse(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cnf_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

// ----------------------------------------------------------------- config

TEST_CASE("config parsing") {
  const RunConfig cfg = RunConfig::parse(
      "# header\n"
      "[run]\n"
      "demo = advection\n"
      "seed = 7   # trailing\n"
      "; other comment\n"
      "[problem]\n"
      "op = \"dt + beta*dx\"  # quoted\n"
      "shifts = 0, 1, 10.5\n"
      "sizes = 3,4\n"
      "flag = true\n"
      "tag = \"a # b\"\n");
  CHECK(cfg.demo() == "advection");
  CHECK(cfg.get_seed("run", "seed", 0) == 7);
  CHECK(cfg.get_string("problem", "op", "") == "dt + beta*dx");
  CHECK(cfg.get_doubles("problem", "shifts", {}) == std::vector<double>{0, 1, 10.5});
  CHECK(cfg.get_ints("problem", "sizes", {}) == std::vector<int>{3, 4});
  CHECK(cfg.get_bool("problem", "flag", false));
  CHECK(cfg.get_string("problem", "tag", "") == "a # b");
  CHECK(cfg.get_double("problem", "missing", 2.5) == 2.5);
  CHECK(cfg.line("problem", "shifts") == 8);
  CHECK(cfg.has_section("run"));
  CHECK(!cfg.has("run", "nothing"));
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_line("[run\n") == 1);
  CHECK(error_line("key = 1\n") == 1);
  CHECK(error_line("[a]\nx = 1\nx = 2\n") == 3);
  CHECK(error_line("[a]\n[a]\n") == 2);
  CHECK(error_line("[a]\nnovalue\n") == 2);
  CHECK(error_line("[a]\ns = \"open\n") == 2);
  CHECK(error_line("[a b]\n") == 1);

  const RunConfig cfg = RunConfig::parse("[a]\nx = abc\ny = 1.5\nz = -1\n");
  try {
    cfg.get_double("a", "x", 0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(cfg.get_int("a", "y", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_seed("a", "z", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("a", "y", false), ConfigError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("config schema") {
  const RunConfig cfg = RunConfig::parse("[run]\ndemo = fermat\n[path]\nsamples = 10\nbogus = 1\n");
  try {
    cfg.check_schema({{"run", {"demo"}}, {"path", {"samples"}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 5);
  }
  try {
    cfg.check_schema({{"run", {"demo"}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
  }
  RunConfig c2 = cfg;
  c2.set("path", "samples", "20");
  CHECK(c2.get_int("path", "samples", 0) == 20);
  CHECK(c2.line("path", "samples") == 0);
}

// ----------------------------------------------------------------- csv

TEST_CASE("csv formatting round-trips doubles") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) CHECK(std::stod(format_real(v)) == v);
  CHECK(format_real(1.0) == "1");
  CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_real(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_real(std::nan("")) == "nan");

  CsvTable t({"a", "b"});
  t.add_row(std::vector<double>{1.5, 2});
  t.add_row(std::vector<std::string>{"x", "y"});
  CHECK(t.str() == "a,b\n1.5,2\nx,y\n");
  CHECK_THROWS_AS(t.add_row(std::vector<double>{1}), DimensionMismatch);
}

// ----------------------------------------------------------------- geometry

TEST_CASE("evaluation grids") {
  const EvalGrid n = EvalGrid::nodes(0, 1, 5);
  CHECK(n.xs == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  const EvalGrid c = EvalGrid::cells(0, 1, 4);
  CHECK(c.xs[0] == 0.125);
  CHECK(c.xs[3] == 0.875);
  const EvalGrid s = EvalGrid::stepped(-2, 2, 1.0 / 60);
  CHECK(s.nx() == 241);
  CHECK(s.xs.back() == doctest::Approx(2.0));
  CHECK(n.point(6) == Eigen::Vector2d(0.25, 0.25));
  CHECK(n.points().size() == 25);
}

TEST_CASE("marching squares recovers a circle") {
  const EvalGrid g = EvalGrid::stepped(-1.5, 1.5, 0.02);
  std::vector<double> v;
  for (const auto& p : g.points()) v.push_back(p.norm() - 1.0);
  const auto lines = marching_squares(g, v);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].front() == lines[0].back());
  CHECK(max_radial_deviation(lines, 1.0) < 1e-3);
  CHECK(marching_squares(g, v, 5.0).empty());
}

TEST_CASE("marching squares on a single cell") {
  const EvalGrid g = EvalGrid::nodes(0, 1, 2);
  // one corner below iso: a single segment cutting the corner
  auto lines = marching_squares(g, {-1, 1, 1, 1});
  REQUIRE(lines.size() == 1);
  REQUIRE(lines[0].size() == 2);
  for (const auto& p : lines[0]) CHECK((p.isApprox(Eigen::Vector2d(0.5, 0)) || p.isApprox(Eigen::Vector2d(0, 0.5))));
  // saddle: centre average positive separates the two negative corners
  lines = marching_squares(g, {-1, 3, 3, -1});
  CHECK(lines.size() == 2);
  lines = marching_squares(g, {1, -3, -3, 1});
  CHECK(lines.size() == 2);
  // masked corner removes the cell
  CHECK(marching_squares(g, {-1, 1, 1, 1}, 0.0, {1, 1, 1, 0}).empty());
  CHECK_THROWS(marching_squares(g, {1, 2, 3}));
}

TEST_CASE("polyline distances") {
  const std::vector<Polyline> a{{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)}};
  const std::vector<Polyline> b{{Eigen::Vector2d(0, 0.5), Eigen::Vector2d(1, 0.5)}};
  CHECK(hausdorff(a, b) == doctest::Approx(0.5));
  CHECK(max_distance_to(a, b) == doctest::Approx(0.5));
  const std::vector<Polyline> c{{Eigen::Vector2d(2, 0)}};
  CHECK(max_radial_deviation(c, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("built-in shapes lie on their outlines with unit normals") {
  for (const char* name : {"circle", "line", "triangle", "diamond"}) {
    CAPTURE(name);
    const OrientedPoints s = builtin_shape(name, 32, 1.0);
    REQUIRE(s.points.size() == 32);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      CHECK(s.normals[i].norm() == doctest::Approx(1.0));
      CHECK(std::abs(builtin_shape_sdf(name, s.points[i], 1.0)) < 1e-12);
    }
  }
  const OrientedPoints c = builtin_shape("circle", 8, 2.0);
  CHECK(c.normals[3].dot(c.points[3] / 2.0) == doctest::Approx(1.0));
  CHECK(builtin_shape_sdf("circle", Eigen::Vector2d(0, 0), 2.0) == doctest::Approx(-2.0));
  CHECK(builtin_shape_sdf("diamond", Eigen::Vector2d(0, 0), 1.0) == doctest::Approx(-std::sqrt(0.5)));
  CHECK_THROWS_AS(builtin_shape("hexagon", 10), BadConfig);
}

TEST_CASE("perturbed lattice") {
  std::mt19937_64 r1(3), r2(3);
  const auto a = perturbed_lattice(8, 7, 0.1, r1);
  const auto b = perturbed_lattice(8, 7, 0.1, r2);
  REQUIRE(a.size() == 56);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].minCoeff() >= 1e-3);
    CHECK(a[i].maxCoeff() <= 1 - 1e-3);
    for (std::size_t j = 0; j < i; ++j) CHECK((a[i] - a[j]).norm() >= 1e-4);
  }
  std::mt19937_64 r3(3);
  const auto z = perturbed_lattice(4, 3, 0.0, r3);
  CHECK(z[0].isApprox(Eigen::Vector2d(0.125, 0.25)));
  CHECK(z[11].isApprox(Eigen::Vector2d(0.875, 0.75)));
}

TEST_CASE("error metrics") {
  CHECK(rmse({1, 2, 3}, {1, 2, 5}) == doctest::Approx(std::sqrt(4.0 / 3)));
  CHECK(nrmse({1, 1}, {2, 2}) == doctest::Approx(0.5));
}

// ----------------------------------------------------------------- output

TEST_CASE("heat colour endpoints") {
  CHECK(heat_colour(0.0) == "rgb(0,0,255)");
  CHECK(heat_colour(1.0) == "rgb(255,0,0)");
  CHECK(heat_colour(0.5) == "rgb(128,64,128)");
}

TEST_CASE("2x2 heatmap") {
  const EvalGrid g = EvalGrid::nodes(0, 1, 2);
  const std::string svg = svg_heatmap("h", g, {0, 1, 2, 3});
  const std::regex rect("<rect x=\"([0-9.]+)\" y=\"([0-9.]+)\" width=\"[0-9.]+\" height=\"[0-9.]+\" fill=\"(rgb\\([0-9,]+\\))\"/>");
  std::vector<std::string> fills;
  std::vector<double> ys;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), rect); it != std::sregex_iterator(); ++it) {
    ys.push_back(std::stod((*it)[2]));
    fills.push_back((*it)[3]);
  }
  REQUIRE(fills.size() == 4);
  CHECK(fills == std::vector<std::string>{"rgb(0,0,255)", "rgb(85,43,170)", "rgb(170,43,85)", "rgb(255,0,0)"});
  CHECK(ys[0] > ys[2]);  // row 0 at the bottom
  CHECK(ys[0] == ys[1]);
  CHECK(svg.find("width=\"800\"") != std::string::npos);
  CHECK(svg_heatmap("h", g, {5, 5, 5, 5}).find("rgb(0,0,255)") != std::string::npos);
  CHECK_THROWS_AS(svg_heatmap("h", g, {1, 2}), DimensionMismatch);
}

TEST_CASE("charts are deterministic text") {
  const std::vector<Series> s{{"a", {0, 1, 2}, {1, 10, 100}}};
  CHECK(svg_line_chart("t", s, true) == svg_line_chart("t", s, true));
  CHECK(svg_line_chart("t<&>", s).find("t&lt;&amp;&gt;") != std::string::npos);
  const std::string p = svg_polylines("p", {{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)}}, -1, 1);
  CHECK(p.find("<polyline") != std::string::npos);
}

// ----------------------------------------------------------------- demos

TEST_CASE("demo registry and schemas") {
  CHECK(demo_names().size() == 6);
  for (const auto& d : demo_names()) CHECK(demo_schema(d).count("run") == 1);
  const RunConfig cfg = RunConfig::parse("[run]\ndemo = fermat\n[medium]\nviscosity = 2\n");
  CHECK_THROWS_AS(run_demo(cfg, scratch("schema").string()), ConfigError);
  CHECK_THROWS_AS(run_demo(RunConfig::parse("[run]\ndemo = nope\n"), scratch("schema").string()), ConfigError);
  CHECK_THROWS_AS(run_demo(RunConfig::parse("[run]\ndemo = fermat\n"), scratch("schema").string(), "advection"),
                  ConfigError);
  CHECK_THROWS_AS(run_demo(RunConfig::parse("[run]\ndemo = fermat\n[path]\nsamples = 1\n"),
                           scratch("schema").string()),
                  ConfigError);
}

TEST_CASE("travel time loss on a straight path") {
  // chord from (0,0) to (1,1) in n = 1 + y: ∫ √2 (1 + s) ds = 1.5 √2
  const auto out = scratch("fermat0");
  const RunConfig cfg = RunConfig::parse(
      "[run]\ndemo = fermat\n[medium]\nn0 = 1\nslope = 1\n[path]\nsamples = 1001\n[train]\niterations = 0\n");
  const FermatResult r = run_fermat(cfg, out.string());
  CHECK(r.chord_time == doctest::Approx(1.5 * std::numbers::sqrt2).epsilon(1e-9));
  CHECK(r.max_endpoint_residual < 1e-12);
  CHECK(r.trace.rows.empty());
}

TEST_CASE("fermat demo: graded medium shortens travel time, files are deterministic") {
  const std::string text =
      "[run]\ndemo = fermat\nseed = 1\n[path]\nsamples = 64\n[medium]\nslope = 1\n[train]\niterations = 200\n";
  const auto o1 = scratch("fermat1"), o2 = scratch("fermat2");
  const DemoResult a = run_demo(RunConfig::parse(text), o1.string());
  const DemoResult b = run_demo(RunConfig::parse(text), o2.string());
  CHECK(a.metrics.at("final_time") < a.metrics.at("initial_time"));
  CHECK(a.metrics.at("max_endpoint_residual") < 1e-10);
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    const auto name = std::filesystem::path(a.files[i]).filename();
    CHECK(slurp(o1 / name) == slurp(o2 / name));
  }
  CHECK(std::filesystem::exists(o1 / "fermat_path.svg"));
}

TEST_CASE("travel time gradient matches finite differences") {
  const std::vector<std::string> dims{"s"};
  Point a(1), b(1);
  a[0] = 0.0;
  b[0] = 1.0;
  ConstraintSet cs({Constraint{identity_operator(dims), a, Eigen::Vector2d(0, 0)},
                    Constraint{identity_operator(dims), b, Eigen::Vector2d(1, 1)}},
                   2);
  BasisConfig c;
  c.kind = "polynomial";
  c.input_dim = 1;
  c.count = 2;
  c.channels = 2;
  ConstrainedField f(init_basis(c, 4), cs);
  f.solve();
  LossSpec spec;
  spec.add(1.0, std::make_shared<TravelTimeLoss>(33, 1.0, 0.7));
  std::mt19937_64 rng(0);
  const ParamCotangent g = total_loss_grad(f, spec, rng, true).grad;
  auto value = [&](const std::vector<double>& v) {
    ConstrainedField h(f);
    h.set_params(v);
    h.solve();
    std::mt19937_64 r(0);
    return total_loss_grad(h, spec, r, false).total;
  };
  const std::vector<double> at(f.family().params().begin(), f.family().params().end());
  CHECK(fd_check(value, at, g, 1e-9) < 1e-5);
  TravelTimeLoss floor(8, 1.0, -2.0, 0.05);
  CHECK(floor.index(1.0) == 0.05);
  CHECK(floor.index(0.25) == 0.5);
}
