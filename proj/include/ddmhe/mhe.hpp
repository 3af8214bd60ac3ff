#pragma once

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "ddmhe/euoss.hpp"
#include "ddmhe/plant.hpp"
#include "ddmhe/solver.hpp"

namespace ddmhe {

struct EstimatorConfig {
  int L = 1;
  double rho = 0.95;
  Eigen::MatrixXd P_weight;  // n x n PD prior weight
  Eigen::MatrixXd R_weight;  // p x p PD stage weight
  Eigen::VectorXd state_lower;  // -inf allowed
  Eigen::VectorXd state_upper;  // +inf allowed

  enum class Mode { nominal, robust };
  Mode mode = Mode::nominal;

  double c_alpha = 0.0;
  double c_sigma_x = 0.0;
  double eps_x_bound = 0.0;
  double eps_y_bound = 0.0;

  SolverSettings solver;

  void validate(int n, int p) const;
};

/// Hankel matrices of the offline data at every window depth 1..L, all depths
/// share column count N - d. Immutable once built, shareable across estimators.
struct HankelBlocks {
  struct DepthBlocks {
    HankelMatrix Hu;  // depth d of u over [0, N-2]
    HankelMatrix Hy;  // depth d of y over [0, N-2]
    HankelMatrix Hx;  // depth d+1 of x over [0, N-1]
  };

  int L = 0;
  int N = 0;
  int n = 0, m = 0, p = 0;
  std::vector<DepthBlocks> by_depth;

  const DepthBlocks& depth(int d) const;

  static HankelBlocks build(const DataSet& dataset, int L);
};

/// Window bookkeeping for the prediction-form loop: at time t the buffers hold
/// u and y up to t-1 only, and the prior at time t is the estimate made at
/// time t - min(t, L).
struct EstimatorState {
  int t = 0;
  std::deque<Eigen::VectorXd> window_u;
  std::deque<Eigen::VectorXd> window_y;
  std::map<int, Eigen::VectorXd> estimate_history;
  Eigen::VectorXd prior0;

  explicit EstimatorState(Eigen::VectorXd prior) : prior0(std::move(prior)) {}
};

struct MheSolution {
  std::vector<Eigen::VectorXd> x_hat_seq;    // window + 1 states
  std::vector<Eigen::VectorXd> sigma_y_hat;  // window output slacks
  std::vector<Eigen::VectorXd> sigma_x_hat;  // robust only, window + 1 states
  Eigen::VectorXd alpha_hat;
  double cost = 0.0;
  SolveResult solver_report;
};

QuadraticProgram build_nominal_problem(const HankelBlocks& blocks,
                                       const EstimatorState& state,
                                       const EstimatorConfig& cfg);

QuadraticProgram build_fie_problem(const HankelBlocks& blocks, const EstimatorState& state,
                                   const EstimatorConfig& cfg);

QuadraticProgram build_robust_problem(const HankelBlocks& blocks,
                                      const EstimatorState& state,
                                      const EstimatorConfig& cfg);

struct StepResult {
  Eigen::VectorXd x_hat;
  double cost = 0.0;
  SolveStatus status = SolveStatus::optimal;
  double solve_ms = 0.0;
  bool degraded = false;  // solver failed, previous estimate reused
  std::optional<MheSolution> solution;
};

/// Produces x_hat(t) from the current windows, records it, then absorbs the
/// sample (new_u, new_y) observed at time t for use at t + 1.
StepResult estimator_step(EstimatorState& state, const HankelBlocks& blocks,
                          const EstimatorConfig& cfg,
                          const std::optional<Eigen::VectorXd>& new_u,
                          const std::optional<Eigen::VectorXd>& new_y);

struct ValidationReport {
  struct Check {
    std::string name;
    bool passed = false;
    bool skipped = false;
    std::string message;
  };
  std::vector<Check> checks;
  bool all_passed() const;
};

/// Assumption checks: input excitation order L + n + 1, eta <= rho, eigenvalue
/// floors on P and R, robust regularizer lower bounds, horizon length.
/// Pass constants = nullptr to skip the constant-dependent checks.
ValidationReport validate_config(const EstimatorConfig& cfg, const HankelBlocks& blocks,
                                 const EUossConstants* constants, const DataSet& dataset);

}  // namespace ddmhe
