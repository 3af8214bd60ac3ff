#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace ddmhe {

/// A finite multivariate signal: one column per time step.
class Trajectory {
 public:
  /// samples: dim x N, N >= 1.
  explicit Trajectory(Eigen::MatrixXd samples);

  int dim() const { return static_cast<int>(samples_.rows()); }
  int length() const { return static_cast<int>(samples_.cols()); }
  const Eigen::MatrixXd& samples() const { return samples_; }

  Eigen::VectorXd at(int t) const;

  /// Contiguous sub-trajectory [start, start+len).
  Trajectory segment(int start, int len) const;

  /// Stacked window [x(start); ...; x(start+len-1)].
  Eigen::VectorXd stacked(int start, int len) const;

 private:
  Eigen::MatrixXd samples_;
};

/// Block-Hankel lift of a trajectory. Immutable after construction.
struct HankelMatrix {
  int depth = 0;      // L
  int block_dim = 0;  // source trajectory dim
  Eigen::MatrixXd data;  // (block_dim * depth) x (N - L + 1)

  int rows() const { return static_cast<int>(data.rows()); }
  int cols() const { return static_cast<int>(data.cols()); }

  /// Row block i (size block_dim), i in [0, depth).
  Eigen::MatrixXd block_rows(int i) const;
};

struct RankReport {
  int matrix_rows = 0;
  int matrix_cols = 0;
  int numerical_rank = 0;
  std::vector<double> singular_values;  // descending
  double tolerance = 0.0;
  bool full_row_rank = false;
};

HankelMatrix build_hankel(const Trajectory& traj, int depth);

/// Rank report for an arbitrary matrix. tol < 0 selects the default
/// max(rows, cols) * sigma_max * 1e-12.
RankReport numerical_rank(const Eigen::MatrixXd& m, double tol = -1.0);

/// Def.-style persistency of excitation check: full_row_rank iff
/// rank(H_L(u)) == dim * L.
RankReport is_persistently_exciting(const Trajectory& u, int depth, double tol = -1.0);

/// Rank of [H_1(x_[0,N-L]); H_L(u_[0,N-1])] (rows = n + m*L).
RankReport check_state_input_rank(const Trajectory& x, const Trajectory& u, int depth,
                                  double tol = -1.0);

/// Minimum-norm least-squares solve of (stacked blocks) * alpha = target.
/// Returns (alpha, Euclidean norm of the misfit).
std::pair<Eigen::VectorXd, double> span_residual(const std::vector<HankelMatrix>& stack,
                                                 const Eigen::VectorXd& target);

}  // namespace ddmhe
