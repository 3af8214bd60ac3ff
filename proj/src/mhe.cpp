#include "ddmhe/mhe.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ddmhe {

namespace {

Eigen::VectorXd stack_window(const std::deque<Eigen::VectorXd>& win) {
  if (win.empty()) throw std::logic_error("stack_window: empty window");
  const Eigen::Index dim = win.front().size();
  Eigen::VectorXd out(dim * static_cast<Eigen::Index>(win.size()));
  for (std::size_t j = 0; j < win.size(); ++j) {
    out.segment(dim * static_cast<Eigen::Index>(j), dim) = win[j];
  }
  return out;
}

// Discounted stage weights: window slot j holds time t - d + j, which is the
// k = d - j most recent sample, so its weight is rho^{d-j}.
Eigen::MatrixXd discounted_output_weight(const Eigen::MatrixXd& R, double rho, int d) {
  const Eigen::Index p = R.rows();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p * d, p * d);
  for (int j = 0; j < d; ++j) {
    W.block(p * j, p * j, p, p) = std::pow(rho, d - j) * R;
  }
  return W;
}

void append_box_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& lower,
                     const Eigen::VectorXd& upper, QuadraticProgram& qp,
                     Eigen::Index extra_cols) {
  const Eigen::Index n = lower.size();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::Index comp = i % n;
    if (std::isinf(lower(comp)) && std::isinf(upper(comp))) continue;
    keep.push_back(i);
  }
  qp.A_in.resize(static_cast<Eigen::Index>(keep.size()), rows.cols() + extra_cols);
  qp.lb.resize(static_cast<Eigen::Index>(keep.size()));
  qp.ub.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Eigen::Index i = keep[k];
    qp.A_in.row(static_cast<Eigen::Index>(k)).head(rows.cols()) = rows.row(i);
    if (extra_cols > 0) {
      qp.A_in.row(static_cast<Eigen::Index>(k)).tail(extra_cols).setZero();
      // slack column for this state copy, x_bar = Hx alpha - sigma_x
      qp.A_in(static_cast<Eigen::Index>(k), rows.cols() + i) = -1.0;
    }
    qp.lb(static_cast<Eigen::Index>(k)) = lower(i % n);
    qp.ub(static_cast<Eigen::Index>(k)) = upper(i % n);
  }
}

// Shared condensed construction at window depth d. The prior anchor is the
// estimate made d steps ago and its weight is rho^d, covering both the
// steady-state horizon (d = L) and the startup full-information case (d = t).
QuadraticProgram build_condensed(const HankelBlocks& blocks, const EstimatorState& state,
                                 const EstimatorConfig& cfg, int d, bool robust) {
  if (static_cast<int>(state.window_u.size()) != d ||
      static_cast<int>(state.window_y.size()) != d) {
    throw std::logic_error("build_condensed: window does not hold d samples");
  }
  const auto& bl = blocks.depth(d);
  const Eigen::MatrixXd& Hu = bl.Hu.data;
  const Eigen::MatrixXd& Hy = bl.Hy.data;
  const Eigen::MatrixXd& Hx = bl.Hx.data;
  const Eigen::Index K = Hu.cols();
  const Eigen::Index n = blocks.n;

  const Eigen::VectorXd u_win = stack_window(state.window_u);
  const Eigen::VectorXd y_win = stack_window(state.window_y);
  const int anchor = state.t - d;
  const Eigen::VectorXd prior =
      anchor == 0 ? state.prior0 : state.estimate_history.at(anchor);
  const double w = std::pow(cfg.rho, d);

  const Eigen::MatrixXd Hx0 = Hx.topRows(n);
  const Eigen::MatrixXd Wy = discounted_output_weight(cfg.R_weight, cfg.rho, d);

  QuadraticProgram qp;
  if (!robust) {
    qp.H = 2.0 * (w * Hx0.transpose() * cfg.P_weight * Hx0 +
                  Hy.transpose() * Wy * Hy);
    qp.f = -2.0 * (w * Hx0.transpose() * cfg.P_weight * prior +
                   Hy.transpose() * Wy * y_win);
    qp.A_eq = Hu;
    qp.b_eq = u_win;
    append_box_rows(Hx, cfg.state_lower, cfg.state_upper, qp, 0);
  } else {
    const Eigen::Index nsx = n * (d + 1);
    // M0 maps [alpha; sigma_x] to x_bar(t-d|t) = Hx0 alpha - sigma_x(t-d|t)
    Eigen::MatrixXd M0 = Eigen::MatrixXd::Zero(n, K + nsx);
    M0.leftCols(K) = Hx0;
    M0.block(0, K, n, n) = -Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd HyExt = Eigen::MatrixXd::Zero(Hy.rows(), K + nsx);
    HyExt.leftCols(K) = Hy;

    const double reg_alpha = cfg.c_alpha * (cfg.eps_x_bound + cfg.eps_y_bound);
    qp.H = 2.0 * (w * M0.transpose() * cfg.P_weight * M0 +
                  HyExt.transpose() * Wy * HyExt);
    qp.H.topLeftCorner(K, K) +=
        2.0 * reg_alpha * Eigen::MatrixXd::Identity(K, K);
    qp.H.bottomRightCorner(nsx, nsx) +=
        2.0 * cfg.c_sigma_x * Eigen::MatrixXd::Identity(nsx, nsx);
    qp.f = -2.0 * (w * M0.transpose() * cfg.P_weight * prior +
                   HyExt.transpose() * Wy * y_win);
    qp.A_eq = Eigen::MatrixXd::Zero(Hu.rows(), K + nsx);
    qp.A_eq.leftCols(K) = Hu;
    qp.b_eq = u_win;
    append_box_rows(Hx, cfg.state_lower, cfg.state_upper, qp, nsx);
  }
  return qp;
}

MheSolution extract_solution(const HankelBlocks& blocks, const EstimatorState& state,
                             const EstimatorConfig& cfg, int d, bool robust,
                             SolveResult report) {
  const auto& bl = blocks.depth(d);
  const Eigen::Index n = blocks.n;
  const Eigen::Index p = blocks.p;
  const Eigen::Index K = bl.Hu.cols();

  MheSolution sol;
  sol.alpha_hat = report.z.head(K);
  Eigen::VectorXd x_stack = bl.Hx.data * sol.alpha_hat;
  Eigen::VectorXd sigma_x;
  if (robust) {
    sigma_x = report.z.tail(n * (d + 1));
    x_stack -= sigma_x;
  }
  const Eigen::VectorXd y_win = stack_window(state.window_y);
  const Eigen::VectorXd sigma_y = y_win - bl.Hy.data * sol.alpha_hat;

  for (int k = 0; k <= d; ++k) sol.x_hat_seq.push_back(x_stack.segment(n * k, n));
  for (int k = 0; k < d; ++k) sol.sigma_y_hat.push_back(sigma_y.segment(p * k, p));
  if (robust) {
    for (int k = 0; k <= d; ++k) sol.sigma_x_hat.push_back(sigma_x.segment(n * k, n));
  }

  const int anchor = state.t - d;
  const Eigen::VectorXd prior =
      anchor == 0 ? state.prior0 : state.estimate_history.at(anchor);
  const Eigen::VectorXd dprior = sol.x_hat_seq.front() - prior;
  double cost = std::pow(cfg.rho, d) * dprior.dot(cfg.P_weight * dprior);
  for (int j = 0; j < d; ++j) {
    cost += std::pow(cfg.rho, d - j) *
            sol.sigma_y_hat[static_cast<std::size_t>(j)]
                .dot(cfg.R_weight * sol.sigma_y_hat[static_cast<std::size_t>(j)]);
  }
  if (robust) {
    cost += cfg.c_sigma_x * sigma_x.squaredNorm();
    cost += cfg.c_alpha * (cfg.eps_x_bound + cfg.eps_y_bound) *
            sol.alpha_hat.squaredNorm();
  }
  sol.cost = cost;
  sol.solver_report = std::move(report);
  return sol;
}

}  // namespace

void EstimatorConfig::validate(int n, int p) const {
  if (L < 1) throw std::invalid_argument("EstimatorConfig: L must be >= 1");
  if (rho <= 0.0 || rho >= 1.0) {
    throw std::invalid_argument("EstimatorConfig: rho must be in (0,1)");
  }
  if (P_weight.rows() != n || P_weight.cols() != n) {
    throw std::invalid_argument("EstimatorConfig: P_weight must be n x n");
  }
  if (R_weight.rows() != p || R_weight.cols() != p) {
    throw std::invalid_argument("EstimatorConfig: R_weight must be p x p");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(P_weight).info() != Eigen::Success ||
      Eigen::LLT<Eigen::MatrixXd>(R_weight).info() != Eigen::Success) {
    throw std::invalid_argument("EstimatorConfig: P_weight and R_weight must be PD");
  }
  if (state_lower.size() != n || state_upper.size() != n) {
    throw std::invalid_argument("EstimatorConfig: state bounds must be n-vectors");
  }
  for (int i = 0; i < n; ++i) {
    if (!(state_lower(i) <= state_upper(i))) {
      throw std::invalid_argument("EstimatorConfig: state_lower > state_upper");
    }
  }
  if (mode == Mode::robust) {
    if (c_alpha <= 0.0 || c_sigma_x <= 0.0) {
      throw std::invalid_argument(
          "EstimatorConfig: robust mode needs positive c_alpha and c_sigma_x");
    }
    if (eps_x_bound < 0.0 || eps_y_bound < 0.0) {
      throw std::invalid_argument("EstimatorConfig: eps bounds must be nonnegative");
    }
  }
}

const HankelBlocks::DepthBlocks& HankelBlocks::depth(int d) const {
  if (d < 1 || d > L) throw std::out_of_range("HankelBlocks::depth: 1 <= d <= L");
  return by_depth[static_cast<std::size_t>(d - 1)];
}

HankelBlocks HankelBlocks::build(const DataSet& dataset, int L) {
  const int N = dataset.N();
  if (L < 1 || L >= N) {
    throw std::invalid_argument("HankelBlocks::build: need 1 <= L < N");
  }
  if (dataset.y_d_noisy.length() != N - 1) {
    throw std::invalid_argument("HankelBlocks::build: y trajectory must have N-1 samples");
  }
  HankelBlocks b;
  b.L = L;
  b.N = N;
  b.n = dataset.n();
  b.m = dataset.m();
  b.p = dataset.p();
  const Trajectory u_short = dataset.u_d.segment(0, N - 1);
  for (int d = 1; d <= L; ++d) {
    DepthBlocks db;
    db.Hu = build_hankel(u_short, d);
    db.Hy = build_hankel(dataset.y_d_noisy, d);
    db.Hx = build_hankel(dataset.x_d_noisy, d + 1);
    if (db.Hu.cols() != N - d || db.Hy.cols() != N - d || db.Hx.cols() != N - d) {
      throw std::logic_error("HankelBlocks::build: column count mismatch");
    }
    b.by_depth.push_back(std::move(db));
  }
  return b;
}

QuadraticProgram build_nominal_problem(const HankelBlocks& blocks,
                                       const EstimatorState& state,
                                       const EstimatorConfig& cfg) {
  if (state.t < cfg.L) {
    throw std::logic_error("build_nominal_problem: t < L, use the startup problem");
  }
  return build_condensed(blocks, state, cfg, cfg.L, false);
}

QuadraticProgram build_fie_problem(const HankelBlocks& blocks, const EstimatorState& state,
                                   const EstimatorConfig& cfg) {
  if (state.t < 1 || state.t >= cfg.L) {
    throw std::logic_error("build_fie_problem: requires 1 <= t < L");
  }
  return build_condensed(blocks, state, cfg, state.t, cfg.mode == EstimatorConfig::Mode::robust);
}

QuadraticProgram build_robust_problem(const HankelBlocks& blocks,
                                      const EstimatorState& state,
                                      const EstimatorConfig& cfg) {
  if (state.t < cfg.L) {
    throw std::logic_error("build_robust_problem: t < L, use the startup problem");
  }
  return build_condensed(blocks, state, cfg, cfg.L, true);
}

StepResult estimator_step(EstimatorState& state, const HankelBlocks& blocks,
                          const EstimatorConfig& cfg,
                          const std::optional<Eigen::VectorXd>& new_u,
                          const std::optional<Eigen::VectorXd>& new_y) {
  StepResult out;
  const int t = state.t;
  if (t == 0) {
    out.x_hat = state.prior0;
  } else {
    const int d = std::min(t, cfg.L);
    const bool robust = cfg.mode == EstimatorConfig::Mode::robust;
    const QuadraticProgram qp = build_condensed(blocks, state, cfg, d, robust);
    const auto started = std::chrono::steady_clock::now();
    SolveResult sr = solve_qp(qp, cfg.solver);
    out.solve_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    out.status = sr.status;
    if (sr.status != SolveStatus::optimal) {
      // degraded mode: the estimator must emit at every tick
      out.degraded = true;
      out.x_hat = state.estimate_history.at(t - 1);
    } else {
      MheSolution sol = extract_solution(blocks, state, cfg, d, robust, std::move(sr));
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
    throw std::invalid_argument("estimator_step: new_u and new_y must come together");
  }
  state.t = t + 1;
  return out;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.skipped && !c.passed) return false;
  }
  return true;
}

ValidationReport validate_config(const EstimatorConfig& cfg, const HankelBlocks& blocks,
                                 const EUossConstants* constants, const DataSet& dataset) {
  ValidationReport report;
  auto add = [&](std::string name, bool passed, std::string msg) {
    report.checks.push_back({std::move(name), passed, false, std::move(msg)});
  };
  auto skip = [&](std::string name, std::string msg) {
    report.checks.push_back({std::move(name), false, true, std::move(msg)});
  };

  const int n = blocks.n;
  const int p = blocks.p;
  const int N = blocks.N;
  {
    const int order = cfg.L + n + 1;
    std::ostringstream msg;
    bool ok = false;
    if (order <= dataset.u_d.length()) {
      const RankReport rr = is_persistently_exciting(dataset.u_d, order);
      ok = rr.full_row_rank;
      msg << "input excitation order " << order << ": rank " << rr.numerical_rank << "/"
          << rr.matrix_rows;
    } else {
      msg << "input trajectory shorter than excitation order " << order;
    }
    add("persistency_of_excitation", ok, msg.str());
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esP(cfg.P_weight);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esR(cfg.R_weight);
  const double p1 = esP.eigenvalues().minCoeff();
  const double r1 = esR.eigenvalues().minCoeff();

  if (constants == nullptr) {
    skip("eta_le_rho", "constants unavailable");
    skip("prior_weight_floor", "constants unavailable");
    skip("stage_weight_floor", "constants unavailable");
    skip("horizon_length", "constants unavailable");
    if (cfg.mode == EstimatorConfig::Mode::robust) {
      skip("regularizer_floors", "constants unavailable");
    }
    return report;
  }

  {
    std::ostringstream msg;
    msg << "eta = " << constants->eta << ", rho = " << cfg.rho;
    add("eta_le_rho", constants->eta <= cfg.rho, msg.str());
  }
  {
    std::ostringstream msg;
    msg << "lambda_min(P) = " << p1 << ", p0 = " << constants->p0;
    add("prior_weight_floor", p1 >= constants->p0, msg.str());
  }
  {
    std::ostringstream msg;
    msg << "lambda_min(R) = " << r1 << ", r0 = " << constants->r0;
    add("stage_weight_floor", r1 >= constants->r0, msg.str());
  }
  if (cfg.mode == EstimatorConfig::Mode::robust) {
    const double eta = constants->eta;
    const double c_alpha_min =
        std::max((eta - std::pow(eta, cfg.L + 1)) / (1.0 - eta) * constants->r0 *
                     std::sqrt(static_cast<double>(p)) * (N - 1),
                 2.0 * constants->p0 * std::sqrt(static_cast<double>(n) * N));
    std::ostringstream msg;
    msg << "c_sigma_x = " << cfg.c_sigma_x << " (min " << constants->p0 << "), c_alpha = "
        << cfg.c_alpha << " (min " << c_alpha_min << ")";
    add("regularizer_floors",
        cfg.c_sigma_x >= constants->p0 && cfg.c_alpha >= c_alpha_min, msg.str());
  }
  try {
    const NominalBoundParams b =
        nominal_bound_params(*constants, cfg.P_weight, cfg.R_weight, cfg.rho, cfg.L);
    std::ostringstream msg;
    msg << "L = " << cfg.L << ", L_min = " << b.L_min;
    add("horizon_length", cfg.L >= b.L_min, msg.str());
  } catch (const std::exception& e) {
    add("horizon_length", false, e.what());
  }
  return report;
}

}  // namespace ddmhe
