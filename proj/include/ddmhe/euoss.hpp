#pragma once

#include <iosfwd>

#include "ddmhe/plant.hpp"
#include "ddmhe/solver.hpp"

namespace ddmhe {

/// Detectability constants of the incremental output-to-state stability bound
/// |x1(t) - x2(t)| <= p0 eta^t |x1(0) - x2(0)| + sum r0 eta^tau |y1 - y2|.
struct EUossConstants {
  double p0 = 1.0;   // >= 1
  double r0 = 1.0;   // >= 1
  double eta = 0.0;  // in (0, 1)
  Eigen::MatrixXd P_e;     // Lyapunov certificate for A_L
  Eigen::MatrixXd gain_L;  // n x p output injection
  Eigen::MatrixXd A_L;     // A_hat + gain_L * C_hat, Schur
  Eigen::MatrixXd A_hat;   // recovered state matrix
  Eigen::MatrixXd C_hat;   // recovered output matrix
};

/// Recovers (A, C) from the offline data by solving [X0; U0] G = [I; 0] with
/// A = X1 G, C = Y0 G, synthesizes an output-injection gain, and extracts
/// (p0, r0, eta) from the Lyapunov certificate of A + L C.
/// Exact for noise-free data; with noisy data the result carries no guarantee.
EUossConstants estimate_euoss_constants(const DataSet& dataset,
                                        const Eigen::MatrixXd& lyap_Q = Eigen::MatrixXd());

/// c_J(t) = p0 rho^t + r0 (rho - rho^{t+1}) / (1 - rho).
double c_J(int t, double p0, double r0, double rho);

/// True iff c_J is strictly decreasing in t, equivalently rho < p0/(p0 + r0).
bool cJ_is_decreasing(double p0, double r0, double rho);

struct NominalBoundParams {
  double rho = 0.0;
  double lambda = 0.0;  // sqrt(rho)
  double p2 = 0.0;      // lambda_max(P_weight)
  double r2 = 0.0;      // lambda_max(R_weight)
  double P0 = 0.0;
  double R0 = 0.0;
  double mu = 0.0;            // P0 lambda^L
  double lambda_tilde = 0.0;  // P0^{1/L} lambda
  int L = 0;
  int L_min = 0;  // smallest horizon with mu < 1
};

/// Constants of the nominal exponential error bound. Throws if eta > rho.
NominalBoundParams nominal_bound_params(const EUossConstants& consts,
                                        const Eigen::MatrixXd& P_weight,
                                        const Eigen::MatrixXd& R_weight, double rho, int L);

/// P0 e0 lambda_tilde^t + sum_{tau=1..t} R0 |v(t-tau)| lambda_tilde^tau.
/// v_seq holds v(0), v(1), ... one per column; columns >= t are ignored.
double nominal_error_bound(int t, double e0, const Eigen::MatrixXd& v_seq,
                           const NominalBoundParams& params);

struct RobustBoundParams {
  double c_J_tilde_max = 0.0;
  double P0_tilde = 0.0;
  double R0_tilde = 0.0;
  double mu_tilde = 0.0;
  double lambda = 0.0;
  double alpha_max = 0.0;
  double sigma_x_max = 0.0;
  double sigma_eps_y_max = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
  double gamma_value = 0.0;  // zero iff both eps bounds are zero
  double u_max = 0.0;
  double x_max = 0.0;
  int L = 0;
};

struct RobustCostWeights {
  Eigen::MatrixXd P_weight;
  Eigen::MatrixXd R_weight;
  double rho = 0.0;
  double c_alpha = 0.0;
  double c_sigma_x = 0.0;
};

/// Constants of the practical (offset) error bound under bounded offline noise.
/// u_max and x_max are the radii of the compact sets the plant evolves in.
/// Throws a horizon-too-short error naming the minimal horizon if
/// P0_tilde lambda^L >= 1.
RobustBoundParams robust_bound_params(const EUossConstants& consts, const DataSet& dataset,
                                      const RobustCostWeights& weights, double u_max,
                                      double x_max, int L);

/// P0~ e0 lam^t + sum R0~ |v(t-tau)| lam^tau + gamma, lam = mu_tilde^{1/L}.
double robust_error_bound(int t, double e0, const Eigen::MatrixXd& v_seq,
                          const RobustBoundParams& params);

/// Proposes compact-set radii from a simulated envelope with a 10% margin.
void propose_compact_radii(const Trajectory& u, const Trajectory& x, double& u_max,
                           double& x_max);

/// Plain-text key=value report.
void write_constants_report(const EUossConstants& consts, std::ostream& out);
void write_constants_report(const NominalBoundParams& params, std::ostream& out);
void write_constants_report(const RobustBoundParams& params, std::ostream& out);

/// Single CSV row (header + values) for experiment logs.
void write_constants_csv(const EUossConstants& consts, const NominalBoundParams& params,
                         std::ostream& out);

}  // namespace ddmhe
