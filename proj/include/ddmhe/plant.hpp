#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "ddmhe/trajectory.hpp"

namespace ddmhe {

struct StateSpaceModel {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::MatrixXd C;  // p x n
  Eigen::MatrixXd D;  // p x m

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }

  void validate() const;
};

/// The linearized four-tank benchmark plant.
StateSpaceModel four_tank_linear();

struct NoiseSpec {
  enum class Kind { none, uniform, gaussian, truncated_gaussian };

  Kind kind = Kind::none;
  double a = 0.0, b = 0.0;          // uniform(a, b)
  double mean = 0.0, stddev = 0.0;  // gaussian / truncated_gaussian
  double bound = 0.0;               // truncation half-width
  std::uint64_t seed = 0;

  static NoiseSpec none_spec();
  static NoiseSpec uniform_spec(double a, double b, std::uint64_t seed);
  static NoiseSpec gaussian_spec(double mean, double stddev, std::uint64_t seed);
  static NoiseSpec truncated_gaussian_spec(double mean, double stddev, double bound,
                                           std::uint64_t seed);

  /// Declared worst-case magnitude of a single component (inf for plain gaussian).
  double amplitude_bound() const;

  void validate() const;
};

/// count i.i.d. dim-dimensional draws, one per column. Truncation is realized
/// by rejection resampling, never by clipping.
Eigen::MatrixXd sample_noise(const NoiseSpec& spec, int count, int dim);

struct SimRecord {
  Trajectory u;
  Trajectory x;
  Trajectory y_clean;
  Trajectory y_measured;
  Trajectory v;  // realized measurement noise, y_measured = y_clean + v
};

/// Exact linear recursion x(t+1) = A x(t) + B u(t); measurement noise is added
/// to outputs only. The state trajectory has one more sample than the input.
SimRecord simulate_lti(const StateSpaceModel& model, const Eigen::VectorXd& x0,
                       const Trajectory& u_seq, const NoiseSpec& noise);

struct FourTankParams {
  double a1, a2, a3, a4;  // outlet areas
  double A1, A2, A3, A4;  // tank cross sections
  double gamma1, gamma2;  // valve splits in (0, 1)
  double g;               // gravitational constant
  double dt;              // integration step

  void validate() const;
};

/// Representative parameter set (not from any published benchmark table).
FourTankParams four_tank_default_params();

/// One fixed-step RK4 step of the square-root tank dynamics. Negative
/// intermediate levels are clamped to zero before the square root.
Eigen::VectorXd four_tank_nonlinear_step(const FourTankParams& params,
                                         const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u);

struct DataSet {
  Trajectory u_d;        // length N
  Trajectory x_d_noisy;  // length N
  Trajectory y_d_noisy;  // length N - 1
  std::optional<Trajectory> x_d_true;
  std::optional<Trajectory> y_d_true;
  double eps_x_bound = 0.0;
  double eps_y_bound = 0.0;
  std::uint64_t seed = 0;

  int N() const { return u_d.length(); }
  int n() const { return x_d_noisy.dim(); }
  int m() const { return u_d.dim(); }
  int p() const { return y_d_noisy.dim(); }
};

using PlantVariant = std::variant<StateSpaceModel, FourTankParams>;

/// Simulate N steps under inputs drawn from input_spec, record clean and noisy
/// states/outputs plus the declared noise amplitude bounds.
DataSet collect_offline_data(const PlantVariant& plant, const NoiseSpec& input_spec, int N,
                             const NoiseSpec& state_noise, const NoiseSpec& output_noise,
                             const Eigen::VectorXd& x0 = Eigen::VectorXd());

/// Nonlinear four-tank simulation with the (x1, x2) output map.
SimRecord simulate_four_tank_nonlinear(const FourTankParams& params,
                                       const Eigen::VectorXd& x0, const Trajectory& u_seq,
                                       const NoiseSpec& noise);

/// CSV layout: header, then one row per step with t, u_1..m, x_1..n, y_1..p.
/// A sidecar "<path>.meta" carries N, dims, eps bounds and the seed.
void write_dataset_csv(const DataSet& ds, const std::string& path);
DataSet read_dataset_csv(const std::string& path);

}  // namespace ddmhe
