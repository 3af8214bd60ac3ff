#include "ddmhe/trajectory.hpp"

#include <stdexcept>

namespace ddmhe {

Trajectory::Trajectory(Eigen::MatrixXd samples) : samples_(std::move(samples)) {
  if (samples_.rows() < 1 || samples_.cols() < 1) {
    throw std::invalid_argument("Trajectory: needs dim >= 1 and length >= 1");
  }
}

Eigen::VectorXd Trajectory::at(int t) const {
  if (t < 0 || t >= length()) {
    throw std::out_of_range("Trajectory::at: index out of range");
  }
  return samples_.col(t);
}

Trajectory Trajectory::segment(int start, int len) const {
  if (start < 0 || len < 1 || start + len > length()) {
    throw std::out_of_range("Trajectory::segment: range out of bounds");
  }
  return Trajectory(samples_.middleCols(start, len));
}

Eigen::VectorXd Trajectory::stacked(int start, int len) const {
  if (start < 0 || len < 1 || start + len > length()) {
    throw std::out_of_range("Trajectory::stacked: range out of bounds");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim()) * len);
  for (int k = 0; k < len; ++k) {
    out.segment(static_cast<Eigen::Index>(k) * dim(), dim()) = samples_.col(start + k);
  }
  return out;
}

HankelMatrix build_hankel(const Trajectory& traj, int depth) {
  const int N = traj.length();
  const int d = traj.dim();
  if (depth < 1 || depth > N) {
    throw std::invalid_argument("build_hankel: depth must satisfy 1 <= L <= N");
  }
  const int cols = N - depth + 1;
  HankelMatrix h;
  h.depth = depth;
  h.block_dim = d;
  h.data.resize(static_cast<Eigen::Index>(d) * depth, cols);
  for (int j = 0; j < cols; ++j) {
    h.data.col(j) = traj.stacked(j, depth);
  }
  return h;
}

Eigen::MatrixXd HankelMatrix::block_rows(int i) const {
  if (i < 0 || i >= depth) {
    throw std::out_of_range("HankelMatrix::block_rows: index out of range");
  }
  return data.middleRows(static_cast<Eigen::Index>(i) * block_dim, block_dim);
}

RankReport numerical_rank(const Eigen::MatrixXd& m, double tol) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& sv = svd.singularValues();
  RankReport r;
  r.matrix_rows = static_cast<int>(m.rows());
  r.matrix_cols = static_cast<int>(m.cols());
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  r.tolerance = tol >= 0.0
                    ? tol
                    : static_cast<double>(std::max(m.rows(), m.cols())) * smax * 1e-12;
  r.singular_values.assign(sv.data(), sv.data() + sv.size());
  r.numerical_rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > r.tolerance) ++r.numerical_rank;
  }
  r.full_row_rank = (r.numerical_rank == r.matrix_rows);
  return r;
}

RankReport is_persistently_exciting(const Trajectory& u, int depth, double tol) {
  return numerical_rank(build_hankel(u, depth).data, tol);
}

RankReport check_state_input_rank(const Trajectory& x, const Trajectory& u, int depth,
                                  double tol) {
  if (x.length() != u.length()) {
    throw std::invalid_argument("check_state_input_rank: trajectory lengths differ");
  }
  const int N = x.length();
  if (depth < 1 || depth > N) {
    throw std::invalid_argument("check_state_input_rank: depth must satisfy 1 <= L <= N");
  }
  const HankelMatrix hu = build_hankel(u, depth);
  const HankelMatrix hx = build_hankel(x.segment(0, N - depth + 1), 1);
  Eigen::MatrixXd stacked(hx.rows() + hu.rows(), hu.cols());
  stacked.topRows(hx.rows()) = hx.data;
  stacked.bottomRows(hu.rows()) = hu.data;
  return numerical_rank(stacked, tol);
}

std::pair<Eigen::VectorXd, double> span_residual(const std::vector<HankelMatrix>& stack,
                                                 const Eigen::VectorXd& target) {
  if (stack.empty()) {
    throw std::invalid_argument("span_residual: empty stack");
  }
  const int cols = stack.front().cols();
  Eigen::Index rows = 0;
  for (const auto& h : stack) {
    if (h.cols() != cols) {
      throw std::invalid_argument("span_residual: blocks have differing column counts");
    }
    rows += h.rows();
  }
  if (target.size() != rows) {
    throw std::invalid_argument("span_residual: target height does not match stack");
  }
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index at = 0;
  for (const auto& h : stack) {
    m.middleRows(at, h.rows()) = h.data;
    at += h.rows();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  svd.setThreshold(smax > 0.0 ? 1e-12 * static_cast<double>(std::max(m.rows(), m.cols()))
                              : 0.0);
  Eigen::VectorXd alpha = svd.solve(target);
  const double residual = (m * alpha - target).norm();
  return {alpha, residual};
}

}  // namespace ddmhe
