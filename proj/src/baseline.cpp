#include "ddmhe/baseline.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ddmhe {

IdentifiedModel identify_lsq(const DataSet& dataset, bool estimate_feedthrough) {
  const int N = dataset.N();
  const int n = dataset.n();
  const int m = dataset.m();
  const int p = dataset.p();
  if (N < 2) throw std::invalid_argument("identify_lsq: dataset too short");

  const Eigen::MatrixXd X0 = dataset.x_d_noisy.samples().leftCols(N - 1);
  const Eigen::MatrixXd X1 = dataset.x_d_noisy.samples().rightCols(N - 1);
  const Eigen::MatrixXd U0 = dataset.u_d.samples().leftCols(N - 1);
  const Eigen::MatrixXd Y0 = dataset.y_d_noisy.samples();

  Eigen::MatrixXd Z(n + m, N - 1);
  Z.topRows(n) = X0;
  Z.bottomRows(m) = U0;
  if (!numerical_rank(Z).full_row_rank) {
    throw std::invalid_argument(
        "identify_lsq: [X0; U0] is rank deficient, the offline input is not exciting "
        "enough");
  }

  IdentifiedModel out;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codZ(Z.transpose());
  const Eigen::MatrixXd AB = codZ.solve(X1.transpose()).transpose();
  out.model.A = AB.leftCols(n);
  out.model.B = AB.rightCols(m);
  if (estimate_feedthrough) {
    const Eigen::MatrixXd CD = codZ.solve(Y0.transpose()).transpose();
    out.model.C = CD.leftCols(n);
    out.model.D = CD.rightCols(m);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codX(X0.transpose());
    out.model.C = codX.solve(Y0.transpose()).transpose();
    out.model.D = Eigen::MatrixXd::Zero(p, m);
  }
  out.residual_state = (X1 - out.model.A * X0 - out.model.B * U0).norm();
  out.residual_output = (Y0 - out.model.C * X0 - out.model.D * U0).norm();
  return out;
}

namespace {

// Variables z = [x_bar(t-d..t); sigma_y(t-d..t-1)], depth d = min(t, L).
QuadraticProgram build_model_window(const IdentifiedModel& im, const EstimatorState& state,
                                    const EstimatorConfig& cfg, int d) {
  const StateSpaceModel& md = im.model;
  const Eigen::Index n = md.n();
  const Eigen::Index m = md.m();
  const Eigen::Index p = md.p();
  if (static_cast<int>(state.window_u.size()) != d ||
      static_cast<int>(state.window_y.size()) != d) {
    throw std::logic_error("build_model_window: window does not hold d samples");
  }
  const Eigen::Index nx = n * (d + 1);
  const Eigen::Index ns = p * d;
  const Eigen::Index dim = nx + ns;

  const int anchor = state.t - d;
  const Eigen::VectorXd prior =
      anchor == 0 ? state.prior0 : state.estimate_history.at(anchor);
  const double w = std::pow(cfg.rho, d);

  QuadraticProgram qp;
  qp.H = Eigen::MatrixXd::Zero(dim, dim);
  qp.f = Eigen::VectorXd::Zero(dim);
  qp.H.topLeftCorner(n, n) = 2.0 * w * cfg.P_weight;
  qp.f.head(n) = -2.0 * w * cfg.P_weight * prior;
  for (int j = 0; j < d; ++j) {
    qp.H.block(nx + p * j, nx + p * j, p, p) = 2.0 * std::pow(cfg.rho, d - j) * cfg.R_weight;
  }

  qp.A_eq = Eigen::MatrixXd::Zero(n * d + p * d, dim);
  qp.b_eq = Eigen::VectorXd::Zero(n * d + p * d);
  for (int k = 0; k < d; ++k) {
    // x_bar(k+1) = A x_bar(k) + B u(k)
    qp.A_eq.block(n * k, n * k, n, n) = -md.A;
    qp.A_eq.block(n * k, n * (k + 1), n, n).setIdentity();
    qp.b_eq.segment(n * k, n) = md.B * state.window_u[static_cast<std::size_t>(k)];
    // sigma_y(k) = y(k) - C x_bar(k) - D u(k)
    qp.A_eq.block(n * d + p * k, n * k, p, n) = md.C;
    qp.A_eq.block(n * d + p * k, nx + p * k, p, p).setIdentity();
    qp.b_eq.segment(n * d + p * k, p) =
        state.window_y[static_cast<std::size_t>(k)] -
        md.D * state.window_u[static_cast<std::size_t>(k)];
  }

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < nx; ++i) {
    const Eigen::Index comp = i % n;
    if (std::isinf(cfg.state_lower(comp)) && std::isinf(cfg.state_upper(comp))) continue;
    keep.push_back(i);
  }
  qp.A_in = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(keep.size()), dim);
  qp.lb.resize(static_cast<Eigen::Index>(keep.size()));
  qp.ub.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    qp.A_in(static_cast<Eigen::Index>(k), keep[k]) = 1.0;
    qp.lb(static_cast<Eigen::Index>(k)) = cfg.state_lower(keep[k] % n);
    qp.ub(static_cast<Eigen::Index>(k)) = cfg.state_upper(keep[k] % n);
  }
  (void)m;
  return qp;
}

}  // namespace

QuadraticProgram build_model_based_mhe(const IdentifiedModel& model,
                                       const EstimatorState& state,
                                       const EstimatorConfig& cfg) {
  if (state.t < 1) throw std::logic_error("build_model_based_mhe: requires t >= 1");
  return build_model_window(model, state, cfg, std::min(state.t, cfg.L));
}

StepResult model_based_step(EstimatorState& state, const IdentifiedModel& model,
                            const EstimatorConfig& cfg,
                            const std::optional<Eigen::VectorXd>& new_u,
                            const std::optional<Eigen::VectorXd>& new_y) {
  StepResult out;
  const int t = state.t;
  const Eigen::Index n = model.model.n();
  if (t == 0) {
    out.x_hat = state.prior0;
  } else {
    const int d = std::min(t, cfg.L);
    const QuadraticProgram qp = build_model_window(model, state, cfg, d);
    const auto started = std::chrono::steady_clock::now();
    SolveResult sr = solve_qp(qp, cfg.solver);
    out.solve_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    out.status = sr.status;
    if (sr.status != SolveStatus::optimal) {
      out.degraded = true;
      out.x_hat = state.estimate_history.at(t - 1);
    } else {
      MheSolution sol;
      const Eigen::Index p = model.model.p();
      for (int k = 0; k <= d; ++k) sol.x_hat_seq.push_back(sr.z.segment(n * k, n));
      for (int k = 0; k < d; ++k) {
        sol.sigma_y_hat.push_back(sr.z.segment(n * (d + 1) + p * k, p));
      }
      const int anchor = t - d;
      const Eigen::VectorXd prior =
          anchor == 0 ? state.prior0 : state.estimate_history.at(anchor);
      const Eigen::VectorXd dprior = sol.x_hat_seq.front() - prior;
      sol.cost = std::pow(cfg.rho, d) * dprior.dot(cfg.P_weight * dprior);
      for (int j = 0; j < d; ++j) {
        sol.cost += std::pow(cfg.rho, d - j) *
                    sol.sigma_y_hat[static_cast<std::size_t>(j)]
                        .dot(cfg.R_weight * sol.sigma_y_hat[static_cast<std::size_t>(j)]);
      }
      sol.solver_report = std::move(sr);
      out.x_hat = sol.x_hat_seq.back();
      out.cost = sol.cost;
      out.solution = std::move(sol);
    }
  }
  state.estimate_history[t] = out.x_hat;
  if (new_u && new_y) {
    state.window_u.push_back(*new_u);
    state.window_y.push_back(*new_y);
    while (static_cast<int>(state.window_u.size()) > cfg.L) state.window_u.pop_front();
    while (static_cast<int>(state.window_y.size()) > cfg.L) state.window_y.pop_front();
  } else if (new_u.has_value() != new_y.has_value()) {
    throw std::invalid_argument("model_based_step: new_u and new_y must come together");
  }
  state.t = t + 1;
  return out;
}

void dump_model(const IdentifiedModel& im, std::ostream& out) {
  out.precision(17);
  auto matrix = [&](const char* name, const Eigen::MatrixXd& M) {
    out << name << " " << M.rows() << " " << M.cols() << "\n";
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) out << M(i, j) << (j + 1 < M.cols() ? " " : "");
      out << "\n";
    }
  };
  matrix("A", im.model.A);
  matrix("B", im.model.B);
  matrix("C", im.model.C);
  matrix("D", im.model.D);
  out << "residual_state " << im.residual_state << "\n";
  out << "residual_output " << im.residual_output << "\n";
}

}  // namespace ddmhe
