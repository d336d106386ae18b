#include "cnf/checks.hpp"
#include "cnf/csv.hpp"
#include "cnf/demos.hpp"
#include "cnf/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kResidual = 2;
constexpr int kSingular = 3;
constexpr int kConfig = 4;

int run(const std::string& demo, const std::string& config, const std::string& seed, const std::string& out) {
  cnf::RunConfig cfg = cnf::RunConfig::load(config);
  if (!seed.empty()) cfg.set("run", "seed", seed);
  const std::string dir = out.empty() ? "out/" + demo : out;
  const cnf::DemoResult r = cnf::run_demo(cfg, dir, demo);
  for (const auto& [k, v] : r.metrics) std::cout << k << " = " << cnf::format_real(v) << "\n";
  for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained neural fields: hard linear-operator constraints by collocation"};
  app.require_subcommand(1);

  std::string config, seed, out;
  std::string chosen;
  for (const auto& name : cnf::demo_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " demo");
    sub->add_option("--config", config, "run config file")->required();
    sub->add_option("--seed", seed, "override [run] seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "output directory (default out/<demo>)");
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI::App* check = app.add_subcommand("check", "run the finite-difference and oracle self-checks");
  check->callback([&chosen] { chosen = "check"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (chosen == "check") return cnf::report_checks(cnf::run_checks(), std::cout) ? kOk : kFailure;
    return run(chosen, config, seed, out);
  } catch (const cnf::ConfigError& e) {
    std::cerr << "config error";
    if (e.line() > 0) std::cerr << " (line " << e.line() << ")";
    std::cerr << ": " << e.what() << "\n";
    return kConfig;
  } catch (const cnf::BadConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const cnf::ResidualViolation& e) {
    std::cerr << "constraint residual violation: " << e.what() << "\n";
    return kResidual;
  } catch (const cnf::SingularMatrix& e) {
    std::cerr << "singular system: " << e.what() << "\n";
    return kSingular;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
