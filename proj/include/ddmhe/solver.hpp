#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

namespace ddmhe {

/// Convex QP: minimize 0.5 z'Hz + f'z subject to A_eq z = b_eq and
/// lb <= A_in z <= ub (entries of lb/ub may be +-inf).
struct QuadraticProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  int dim() const { return static_cast<int>(H.rows()); }
  int num_eq() const { return static_cast<int>(A_eq.rows()); }
  int num_in() const { return static_cast<int>(A_in.rows()); }

  void validate() const;
};

struct SolverSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  int max_iter = 20000;
  double step_parameter = 0.1;  // ADMM penalty on inequality rows
  bool polish = true;
};

enum class SolveStatus { optimal, max_iter, infeasible, unbounded };

std::string to_string(SolveStatus s);

struct SolveResult {
  Eigen::VectorXd z;
  SolveStatus status = SolveStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

/// Operator-splitting QP solve with optional active-set polish.
SolveResult solve_qp(const QuadraticProgram& qp, const SolverSettings& settings = {});

/// Plain-text dump of a QP for offline inspection.
void dump_qp(const QuadraticProgram& qp, std::ostream& out);

/// Solves A_cl' P A_cl - P + Q = 0 for Schur A_cl and Q > 0.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& A_cl, const Eigen::MatrixXd& Q);

struct ObserverGain {
  Eigen::MatrixXd L;  // n x p, spectral_radius(A + L C) < 1
  Eigen::MatrixXd P;  // Lyapunov certificate for A + L C
};

/// Observer-gain synthesis through the block LMI
/// [[P, A'P + C'W'], [PA + WC, P]] >= eps I, L = P^{-1} W, realized with
/// alternating projections onto the PSD cone and the affine structure set.
/// Throws if no certified gain is found (detectability of (A, C) violated).
ObserverGain solve_observer_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                 int max_iter = 20000, double lmi_eps = 1e-6);

/// |M|_P for square M (P-weighted operator norm) or max |Mw|_P / |w| for
/// rectangular M. P must be symmetric positive definite.
double weighted_operator_norm(const Eigen::MatrixXd& M, const Eigen::MatrixXd& P);

double spectral_radius(const Eigen::MatrixXd& A);

/// Spectral norm of the Moore-Penrose right inverse, 1 / sigma_min for a
/// full-row-rank matrix.
double pinv_norm(const Eigen::MatrixXd& M);

}  // namespace ddmhe
