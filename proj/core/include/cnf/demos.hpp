#pragma once

#include "cnf/config.hpp"
#include "cnf/geometry.hpp"
#include "cnf/train.hpp"

#include <map>
#include <string>
#include <vector>

namespace cnf {

// Every run_* function validates its config against the matching schema
// (ConfigError on unknown keys or bad values), is deterministic for a fixed
// config, and writes its files into `out_dir` unless it is empty. Training
// demos check the constraint residual bound at every iteration and throw
// ResidualViolation if it fails.

/// Names accepted by run_demo.
const std::vector<std::string>& demo_names();
/// Allowed sections and keys for a demo. Throws BadConfig for unknown demos.
const ConfigSchema& demo_schema(const std::string& demo);

/// Summary numbers of a run, written as <demo>_metrics.csv.
using Metrics = std::map<std::string, double>;

struct DemoResult {
  Metrics metrics;
  std::vector<std::string> files;
};

/// Runs the demo named by [run] demo (or `demo` when given).
DemoResult run_demo(const RunConfig& cfg, const std::string& out_dir, const std::string& demo = "");

/// Travel time ∫₀¹ ‖p'(s)‖·n(p_y(s)) ds of a 1D → 2D field by the composite
/// trapezoid rule over `samples` nodes, with n(y) = max(n0 + slope·y, n_min).
class TravelTimeLoss : public FieldObjective {
 public:
  TravelTimeLoss(int samples, double n0, double slope, double n_min = 0.05);
  std::string name() const override { return "travel_time"; }
  LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const override;
  double index(double y) const;

 private:
  int samples_;
  double n0_, slope_, n_min_;
};

struct FermatResult {
  TrainTrace trace;
  double initial_time = 0.0;
  double final_time = 0.0;
  double chord_time = 0.0;  ///< travel time along the straight segment
  double max_endpoint_residual = 0.0;  ///< over the initial solve and every iteration
  std::vector<Eigen::Vector2d> initial_path;
  std::vector<Eigen::Vector2d> final_path;
  double target_norm = 0.0;
  std::vector<std::string> files;
};
FermatResult run_fermat(const RunConfig& cfg, const std::string& out_dir);

struct AdvectionResult {
  TrainTrace trace;
  double initial_rmse = 0.0, initial_nrmse = 0.0;
  double rmse = 0.0, nrmse = 0.0;
  double max_relative_residual = 0.0;  ///< residual / (‖G‖∞ + 1), over every solve
  double target_norm = 0.0;
  int constraints = 0;
  std::vector<std::string> files;
};
AdvectionResult run_advection(const RunConfig& cfg, const std::string& out_dir);

struct TransferRow {
  double shift = 0.0;
  double rmse = 0.0;
  double nrmse = 0.0;
};
struct TransferResult {
  std::vector<TransferRow> rows;
  std::vector<std::string> files;
};
TransferResult run_transfer(const RunConfig& cfg, const std::string& out_dir);

struct ShapeResult {
  TrainTrace pretrain;
  TrainTrace trace;
  double normal_error_init = 0.0;
  double normal_error_final = 0.0;
  double value_error_final = 0.0;  ///< max |Φ(x_i)| over the points
  double eikonal_init = 0.0;
  double eikonal_final = 0.0;
  double target_norm = 0.0;
  std::vector<Polyline> contour;
  std::vector<std::string> files;
};
ShapeResult run_shape2d(const RunConfig& cfg, const std::string& out_dir);

struct ReconResult {
  int points = 0;
  double sigma = 0.0;
  std::vector<Polyline> contour;
  double max_radial_deviation = 0.0;  ///< NaN unless the cloud is a built-in circle
  std::size_t empty_queries = 0;
  std::size_t patch_solves = 0;
  std::vector<std::string> files;
};
ReconResult run_recon_sparse(const RunConfig& cfg, const std::string& out_dir);

struct AblationResult {
  std::vector<std::string> families;
  /// κ̃ before each update, per family; +inf after a singular system.
  std::vector<std::vector<double>> conds;
  std::vector<std::string> files;
};
AblationResult run_cond_ablation(const RunConfig& cfg, const std::string& out_dir);

}  // namespace cnf
