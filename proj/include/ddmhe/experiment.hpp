#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddmhe/baseline.hpp"
#include "ddmhe/euoss.hpp"
#include "ddmhe/mhe.hpp"
#include "ddmhe/plant.hpp"

namespace ddmhe {

struct ExperimentConfig {
  std::string plant = "linear";  // "linear" or "nonlinear"
  FourTankParams tank_params = four_tank_default_params();

  int N = 100;  // offline samples
  int T = 100;  // online steps
  int L = 7;
  double rho = 0.95;
  double P_scale = 500.0;
  std::vector<double> R_scales = {500.0};

  NoiseSpec offline_input;
  NoiseSpec offline_state_noise;
  NoiseSpec offline_output_noise;
  NoiseSpec online_output_noise;

  double eps_x_bound = 0.0;
  double eps_y_bound = 0.0;
  double c_alpha = 2000.0;
  double c_sigma_x = 600.0;

  // online excitation u_i(t) = offset + amp * sin(2 pi t / period)
  double online_u_offset = 10.0;
  double online_u_amp = 5.0;
  double online_u_period = 50.0;

  Eigen::VectorXd x0_offline;  // offline data collection start, zeros by default
  Eigen::VectorXd x0_true;
  Eigen::VectorXd x0_prior;

  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> modes = {"dd-nominal"};
  std::string out_dir = "out";

  void validate() const;
};

/// Parses the JSON document; unknown keys are rejected with field-level errors.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

/// One estimator run: truth, estimates and per-step diagnostics.
struct RunSeries {
  std::string estimator;
  double R_scale = 0.0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd x_true;  // n x (T+1)
  Eigen::MatrixXd x_hat;   // n x (T+1)
  std::vector<double> err_norm;
  std::vector<double> bound;  // empty when constants were not computable
  std::vector<double> cost;
  std::vector<std::string> status;
  std::vector<double> solve_ms;

  int length() const { return static_cast<int>(err_norm.size()); }
};

/// Deterministic offline data collection for a given base seed.
DataSet make_offline_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

/// Deterministic online truth + measurements for a given base seed.
SimRecord make_online_record(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs one estimator variant over one seed. mode is one of
/// "dd-nominal", "dd-robust", "model-based".
RunSeries run_estimator(const ExperimentConfig& cfg, const std::string& mode,
                        double R_scale, std::uint64_t seed);

/// Root mean square of the estimation error of one state over [start, end).
double rmse(const RunSeries& series, int state_index, int window_start, int window_end);

void emit_csv(const RunSeries& series, const std::string& path);

struct PlotSeries {
  std::string label;
  std::vector<double> values;
};

/// Self-contained static SVG line plot.
void emit_svg_lineplot(const std::vector<PlotSeries>& series, const std::string& title,
                       const std::string& path);

struct AggregateRow {
  std::string estimator;
  double R_scale = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> rmse_per_state;
  double mean_solve_ms = 0.0;
};

AggregateRow aggregate_run(const RunSeries& series);
void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);

/// Full pipeline: every mode x R setting x seed, CSV + SVG artifacts under
/// cfg.out_dir, aggregate table last. Returns the aggregate rows.
std::vector<AggregateRow> run_benchmark(const ExperimentConfig& cfg);

}  // namespace ddmhe
