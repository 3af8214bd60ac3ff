#include "ddmhe/euoss.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ddmhe {

namespace {

double lambda_max_sym(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  return es.eigenvalues().maxCoeff();
}

}  // namespace

EUossConstants estimate_euoss_constants(const DataSet& dataset,
                                        const Eigen::MatrixXd& lyap_Q) {
  const int N = dataset.N();
  const int n = dataset.n();
  const int m = dataset.m();
  const int p = dataset.p();
  if (N < 2) throw std::invalid_argument("estimate_euoss_constants: dataset too short");

  const Eigen::MatrixXd X0 = dataset.x_d_noisy.samples().leftCols(N - 1);
  const Eigen::MatrixXd X1 = dataset.x_d_noisy.samples().rightCols(N - 1);
  const Eigen::MatrixXd U0 = dataset.u_d.samples().leftCols(N - 1);
  const Eigen::MatrixXd Y0 = dataset.y_d_noisy.samples();

  Eigen::MatrixXd XU(n + m, N - 1);
  XU.topRows(n) = X0;
  XU.bottomRows(m) = U0;
  if (!numerical_rank(XU).full_row_rank) {
    throw std::invalid_argument(
        "estimate_euoss_constants: [H_1(x); H_1(u)] is rank deficient, offline data is "
        "not informative enough");
  }
  Eigen::MatrixXd XY(n + p, N - 1);
  XY.topRows(n) = X1;
  XY.bottomRows(p) = Y0;
  if (!numerical_rank(XY).full_row_rank) {
    throw std::invalid_argument(
        "estimate_euoss_constants: [H_1(x shifted); H_1(y)] is rank deficient");
  }

  // [X0; U0] G = [I; 0] gives A = X1 G and C = Y0 G exactly on clean data.
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + m, n);
  rhs.topRows(n).setIdentity();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(XU);
  const Eigen::MatrixXd G = cod.solve(rhs);

  EUossConstants c;
  c.A_hat = X1 * G;
  c.C_hat = Y0 * G;

  const ObserverGain og = solve_observer_gain(c.A_hat, c.C_hat);
  c.gain_L = og.L;
  c.A_L = c.A_hat + c.gain_L * c.C_hat;

  const Eigen::MatrixXd Q =
      lyap_Q.size() == 0 ? Eigen::MatrixXd::Identity(n, n) : lyap_Q;
  c.P_e = solve_discrete_lyapunov(c.A_L, Q);
  c.eta = weighted_operator_norm(c.A_L, c.P_e);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.P_e);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmin <= 0.0) throw std::runtime_error("estimate_euoss_constants: P_e not PD");
  c.p0 = std::max(1.0, std::sqrt(lmax / lmin));
  c.r0 = std::max(1.0, weighted_operator_norm(c.gain_L, c.P_e) * std::sqrt(lmax));
  return c;
}

double c_J(int t, double p0, double r0, double rho) {
  if (t < 0) throw std::invalid_argument("c_J: t must be nonnegative");
  if (rho <= 0.0 || rho >= 1.0) throw std::invalid_argument("c_J: rho must be in (0,1)");
  return p0 * std::pow(rho, t) + r0 * (rho - std::pow(rho, t + 1)) / (1.0 - rho);
}

bool cJ_is_decreasing(double p0, double r0, double rho) {
  if (rho <= 0.0 || rho >= 1.0) {
    throw std::invalid_argument("cJ_is_decreasing: rho must be in (0,1)");
  }
  return rho < p0 / (p0 + r0);
}

namespace {

// Worst-case c_J over the window, t = 0 when decreasing, t = L otherwise.
double c_J_worst(double p0, double r0, double rho, int L) {
  return cJ_is_decreasing(p0, r0, rho) ? c_J(0, p0, r0, rho) : c_J(L, p0, r0, rho);
}

int find_L_min(double p0, double r0, double rho, double p2, double extra) {
  const double lambda = std::sqrt(rho);
  for (int L = 1; L <= 1000000; ++L) {
    const double P0 = p0 + std::sqrt((c_J_worst(p0, r0, rho, L) + extra) * p2);
    if (P0 * std::pow(lambda, L) < 1.0) return L;
  }
  throw std::runtime_error("L_min search did not terminate");
}

}  // namespace

NominalBoundParams nominal_bound_params(const EUossConstants& consts,
                                        const Eigen::MatrixXd& P_weight,
                                        const Eigen::MatrixXd& R_weight, double rho,
                                        int L) {
  if (rho <= 0.0 || rho >= 1.0) {
    throw std::invalid_argument("nominal_bound_params: rho must be in (0,1)");
  }
  if (L < 1) throw std::invalid_argument("nominal_bound_params: L must be >= 1");
  if (consts.eta > rho) {
    throw std::invalid_argument(
        "nominal_bound_params: eta > rho violates the discount-factor assumption");
  }
  NominalBoundParams b;
  b.rho = rho;
  b.lambda = std::sqrt(rho);
  b.p2 = lambda_max_sym(P_weight);
  b.r2 = lambda_max_sym(R_weight);
  b.L = L;
  const double cj = c_J_worst(consts.p0, consts.r0, rho, L);
  b.P0 = consts.p0 + std::sqrt(cj * b.p2);
  b.R0 = consts.r0 + std::sqrt(cj * b.r2);
  b.mu = b.P0 * std::pow(b.lambda, L);
  b.lambda_tilde = std::pow(b.P0, 1.0 / L) * b.lambda;
  b.L_min = find_L_min(consts.p0, consts.r0, rho, b.p2, 0.0);
  return b;
}

double nominal_error_bound(int t, double e0, const Eigen::MatrixXd& v_seq,
                           const NominalBoundParams& params) {
  if (t < 0) throw std::invalid_argument("nominal_error_bound: t must be nonnegative");
  double bound = params.P0 * e0 * std::pow(params.lambda_tilde, t);
  for (int tau = 1; tau <= t; ++tau) {
    const int idx = t - tau;
    if (idx >= v_seq.cols()) continue;
    bound += params.R0 * v_seq.col(idx).norm() * std::pow(params.lambda_tilde, tau);
  }
  return bound;
}

RobustBoundParams robust_bound_params(const EUossConstants& consts, const DataSet& dataset,
                                      const RobustCostWeights& weights, double u_max,
                                      double x_max, int L) {
  const int N = dataset.N();
  const int n = dataset.n();
  const int m = dataset.m();
  const int p = dataset.p();
  if (L < 1 || L >= N) throw std::invalid_argument("robust_bound_params: bad horizon");
  if (u_max <= 0.0 || x_max <= 0.0) {
    throw std::invalid_argument("robust_bound_params: compact-set radii must be positive");
  }
  const double rho = weights.rho;
  const double ex = dataset.eps_x_bound;
  const double ey = dataset.eps_y_bound;
  const double reg = weights.c_sigma_x + weights.c_alpha * (ex + ey);

  RobustBoundParams b;
  b.L = L;
  b.u_max = u_max;
  b.x_max = x_max;
  b.lambda = std::sqrt(rho);

  const HankelMatrix Hu = build_hankel(dataset.u_d.segment(0, N - 1), L);
  Eigen::MatrixXd stacked(Hu.rows() + n, Hu.cols());
  stacked.topRows(Hu.rows()) = Hu.data;
  stacked.bottomRows(n) = dataset.x_d_noisy.samples().leftCols(N - L);
  const double H_ux = pinv_norm(stacked);
  b.alpha_max = H_ux * (L * u_max + x_max);
  b.sigma_x_max = std::sqrt(static_cast<double>(n) * (N - L)) * ex * b.alpha_max;
  b.sigma_eps_y_max = std::sqrt(static_cast<double>(p) * (N - 1)) * ey * b.alpha_max;

  b.c_J_tilde_max = std::max(c_J(L, consts.p0, consts.r0, rho),
                             c_J(0, consts.p0, consts.r0, rho)) +
                    reg;
  const double p2 = lambda_max_sym(weights.P_weight);
  const double r2 = lambda_max_sym(weights.R_weight);
  b.P0_tilde = consts.p0 + std::sqrt(b.c_J_tilde_max * p2);
  b.R0_tilde = consts.r0 + std::sqrt(b.c_J_tilde_max * 2.0 * r2);
  b.mu_tilde = b.P0_tilde * std::pow(b.lambda, L);
  if (b.mu_tilde >= 1.0) {
    const int L_min = find_L_min(consts.p0, consts.r0, rho, p2, reg);
    std::ostringstream msg;
    msg << "robust_bound_params: horizon too short, contraction factor " << b.mu_tilde
        << " >= 1; minimal admissible horizon L_min = " << L_min;
    throw std::runtime_error(msg.str());
  }
  b.c4 = std::sqrt(b.c_J_tilde_max * 2.0 * r2) * b.sigma_eps_y_max;
  b.c5 = std::sqrt(b.c_J_tilde_max * weights.c_alpha * (ex + ey)) * b.alpha_max +
         std::sqrt(b.c_J_tilde_max * weights.c_sigma_x) * b.sigma_x_max;
  b.gamma_value =
      1.0 / (1.0 - b.mu_tilde) *
      (b.c4 * (b.lambda - std::pow(b.lambda, L + 1)) / (1.0 - b.lambda) + b.c5);
  return b;
}

double robust_error_bound(int t, double e0, const Eigen::MatrixXd& v_seq,
                          const RobustBoundParams& params) {
  if (t < 0) throw std::invalid_argument("robust_error_bound: t must be nonnegative");
  const double lam = std::pow(params.mu_tilde, 1.0 / params.L);
  double bound = params.P0_tilde * e0 * std::pow(lam, t) + params.gamma_value;
  for (int tau = 1; tau <= t; ++tau) {
    const int idx = t - tau;
    if (idx >= v_seq.cols()) continue;
    bound += params.R0_tilde * v_seq.col(idx).norm() * std::pow(lam, tau);
  }
  return bound;
}

void propose_compact_radii(const Trajectory& u, const Trajectory& x, double& u_max,
                           double& x_max) {
  double umax = 0.0, xmax = 0.0;
  for (int t = 0; t < u.length(); ++t) umax = std::max(umax, u.at(t).norm());
  for (int t = 0; t < x.length(); ++t) xmax = std::max(xmax, x.at(t).norm());
  u_max = 1.1 * umax;
  x_max = 1.1 * xmax;
}

void write_constants_report(const EUossConstants& c, std::ostream& out) {
  out << "p0=" << c.p0 << "\n"
      << "r0=" << c.r0 << "\n"
      << "eta=" << c.eta << "\n"
      << "spectral_radius_A_L=" << spectral_radius(c.A_L) << "\n";
}

void write_constants_report(const NominalBoundParams& b, std::ostream& out) {
  out << "rho=" << b.rho << "\n"
      << "lambda=" << b.lambda << "\n"
      << "p2=" << b.p2 << "\n"
      << "r2=" << b.r2 << "\n"
      << "P0=" << b.P0 << "\n"
      << "R0=" << b.R0 << "\n"
      << "mu=" << b.mu << "\n"
      << "lambda_tilde=" << b.lambda_tilde << "\n"
      << "L=" << b.L << "\n"
      << "L_min=" << b.L_min << "\n";
}

void write_constants_report(const RobustBoundParams& b, std::ostream& out) {
  out << "c_J_tilde_max=" << b.c_J_tilde_max << "\n"
      << "P0_tilde=" << b.P0_tilde << "\n"
      << "R0_tilde=" << b.R0_tilde << "\n"
      << "mu_tilde=" << b.mu_tilde << "\n"
      << "alpha_max=" << b.alpha_max << "\n"
      << "sigma_x_max=" << b.sigma_x_max << "\n"
      << "sigma_eps_y_max=" << b.sigma_eps_y_max << "\n"
      << "c4=" << b.c4 << "\n"
      << "c5=" << b.c5 << "\n"
      << "gamma=" << b.gamma_value << "\n";
}

void write_constants_csv(const EUossConstants& c, const NominalBoundParams& b,
                         std::ostream& out) {
  out << "p0,r0,eta,rho,lambda,p2,r2,P0,R0,mu,lambda_tilde,L,L_min\n";
  out << c.p0 << ',' << c.r0 << ',' << c.eta << ',' << b.rho << ',' << b.lambda << ','
      << b.p2 << ',' << b.r2 << ',' << b.P0 << ',' << b.R0 << ',' << b.mu << ','
      << b.lambda_tilde << ',' << b.L << ',' << b.L_min << "\n";
}

}  // namespace ddmhe
