#include "ddmhe/solver.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace ddmhe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

void QuadraticProgram::validate() const {
  const int d = dim();
  if (H.rows() != H.cols()) throw std::invalid_argument("QuadraticProgram: H must be square");
  if (f.size() != d) throw std::invalid_argument("QuadraticProgram: f size");
  const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * hscale) {
    throw std::invalid_argument("QuadraticProgram: H must be symmetric");
  }
  if (A_eq.rows() > 0 && A_eq.cols() != d) throw std::invalid_argument("QuadraticProgram: A_eq");
  if (b_eq.size() != A_eq.rows()) throw std::invalid_argument("QuadraticProgram: b_eq size");
  if (A_in.rows() > 0 && A_in.cols() != d) throw std::invalid_argument("QuadraticProgram: A_in");
  if (lb.size() != A_in.rows() || ub.size() != A_in.rows()) {
    throw std::invalid_argument("QuadraticProgram: lb/ub size");
  }
  for (Eigen::Index i = 0; i < lb.size(); ++i) {
    if (!(lb(i) <= ub(i))) throw std::invalid_argument("QuadraticProgram: lb > ub");
  }
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

void dump_qp(const QuadraticProgram& qp, std::ostream& out) {
  out.precision(17);
  auto matrix = [&](const char* name, const Eigen::MatrixXd& m) {
    out << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << m(i, j) << (j + 1 < m.cols() ? " " : "");
      out << "\n";
    }
  };
  matrix("H", qp.H);
  matrix("f", qp.f);
  matrix("A_eq", qp.A_eq);
  matrix("b_eq", qp.b_eq);
  matrix("A_in", qp.A_in);
  matrix("lb", qp.lb);
  matrix("ub", qp.ub);
}

namespace {

struct Stacked {
  Eigen::MatrixXd A;   // [A_eq; A_in]
  Eigen::VectorXd l;   // [b_eq; lb]
  Eigen::VectorXd u;   // [b_eq; ub]
  Eigen::VectorXd rho; // per-row penalty, larger on equality rows
};

Stacked stack_constraints(const QuadraticProgram& qp, double rho0) {
  const int me = qp.num_eq();
  const int mi = qp.num_in();
  Stacked s;
  s.A.resize(me + mi, qp.dim());
  s.l.resize(me + mi);
  s.u.resize(me + mi);
  s.rho.resize(me + mi);
  if (me > 0) {
    s.A.topRows(me) = qp.A_eq;
    s.l.head(me) = qp.b_eq;
    s.u.head(me) = qp.b_eq;
    s.rho.head(me).setConstant(1e3 * rho0);
  }
  if (mi > 0) {
    s.A.bottomRows(mi) = qp.A_in;
    s.l.tail(mi) = qp.lb;
    s.u.tail(mi) = qp.ub;
    s.rho.tail(mi).setConstant(rho0);
  }
  return s;
}

// Certificate of primal infeasibility from the dual update direction.
bool primal_infeasibility_certificate(const Stacked& s, const Eigen::VectorXd& dy) {
  const double dy_norm = inf_norm(dy);
  if (dy_norm < 1e-12) return false;
  const double eps = 1e-8 * dy_norm;
  if (inf_norm(s.A.transpose() * dy) > eps) return false;
  double support = 0.0;
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (dy(i) > 0.0) {
      if (std::isinf(s.u(i))) return false;
      support += s.u(i) * dy(i);
    } else if (dy(i) < 0.0) {
      if (std::isinf(s.l(i))) return false;
      support += s.l(i) * dy(i);
    }
  }
  return support < -eps;
}

bool dual_infeasibility_certificate(const QuadraticProgram& qp, const Stacked& s,
                                    const Eigen::VectorXd& dx) {
  const double dx_norm = inf_norm(dx);
  if (dx_norm < 1e-12) return false;
  const double eps = 1e-8 * dx_norm;
  if (inf_norm(qp.H * dx) > eps) return false;
  if (qp.f.dot(dx) > -eps) return false;
  const Eigen::VectorXd adx = s.A * dx;
  for (Eigen::Index i = 0; i < adx.size(); ++i) {
    if (adx(i) > eps && !std::isinf(s.u(i))) return false;
    if (adx(i) < -eps && !std::isinf(s.l(i))) return false;
  }
  return true;
}

struct Residuals {
  double prim = 0.0;
  double dual = 0.0;
  double eps_prim = 0.0;
  double eps_dual = 0.0;
  bool converged(void) const { return prim <= eps_prim && dual <= eps_dual; }
};

Residuals residuals(const QuadraticProgram& qp, const Stacked& s, const SolverSettings& st,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& y) {
  Residuals r;
  const Eigen::VectorXd ax = s.A * x;
  const Eigen::VectorXd hx = qp.H * x;
  const Eigen::VectorXd aty = s.A.transpose() * y;
  r.prim = inf_norm(ax - z);
  r.dual = inf_norm(hx + qp.f + aty);
  r.eps_prim = st.eps_abs + st.eps_rel * std::max(inf_norm(ax), inf_norm(z));
  r.eps_dual =
      st.eps_abs + st.eps_rel * std::max({inf_norm(hx), inf_norm(aty), inf_norm(qp.f)});
  return r;
}

double objective_of(const QuadraticProgram& qp, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(qp.H * z) + qp.f.dot(z);
}

// Equality-constrained polish on the active set detected from (z, y).
bool polish(const QuadraticProgram& qp, const Stacked& s, const SolverSettings& st,
            Eigen::VectorXd& x, Eigen::VectorXd& z, Eigen::VectorXd& y) {
  const int me = qp.num_eq();
  std::vector<Eigen::Index> active;
  std::vector<double> value;
  for (Eigen::Index i = me; i < s.A.rows(); ++i) {
    const double tol = 1e-7 * (1.0 + std::abs(z(i)));
    if (!std::isinf(s.l(i)) && (y(i) < -1e-12 || z(i) - s.l(i) <= tol)) {
      active.push_back(i);
      value.push_back(s.l(i));
    } else if (!std::isinf(s.u(i)) && (y(i) > 1e-12 || s.u(i) - z(i) <= tol)) {
      active.push_back(i);
      value.push_back(s.u(i));
    }
  }
  const Eigen::Index d = qp.dim();
  const Eigen::Index g = me + static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(d + g, d + g);
  Eigen::VectorXd rhs(d + g);
  kkt.topLeftCorner(d, d) = qp.H;
  rhs.head(d) = -qp.f;
  if (me > 0) {
    kkt.block(d, 0, me, d) = qp.A_eq;
    kkt.block(0, d, d, me) = qp.A_eq.transpose();
    rhs.segment(d, me) = qp.b_eq;
  }
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Eigen::Index r = d + me + static_cast<Eigen::Index>(k);
    kkt.row(r).head(d) = s.A.row(active[k]);
    kkt.col(r).head(d) = s.A.row(active[k]).transpose();
    rhs(r) = value[k];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
  const Eigen::VectorXd sol = cod.solve(rhs);
  if (!sol.allFinite()) return false;

  Eigen::VectorXd xp = sol.head(d);
  Eigen::VectorXd yp = Eigen::VectorXd::Zero(s.A.rows());
  if (me > 0) yp.head(me) = -sol.segment(d, me);
  for (std::size_t k = 0; k < active.size(); ++k) {
    yp(active[k]) = -sol(d + me + static_cast<Eigen::Index>(k));
  }
  Eigen::VectorXd zp = s.A * xp;
  const Residuals before = residuals(qp, s, st, x, z, y);
  // primal feasibility of the polished point against all bounds
  double viol = 0.0;
  for (Eigen::Index i = 0; i < zp.size(); ++i) {
    if (!std::isinf(s.l(i))) viol = std::max(viol, s.l(i) - zp(i));
    if (!std::isinf(s.u(i))) viol = std::max(viol, zp(i) - s.u(i));
  }
  Eigen::VectorXd zfeas = zp.cwiseMin(s.u).cwiseMax(s.l);
  const Residuals after = residuals(qp, s, st, xp, zfeas, yp);
  if (viol > before.eps_prim || std::max(after.prim, after.dual) >
                                    std::max({before.prim, before.dual, st.eps_abs})) {
    return false;
  }
  x = xp;
  z = zfeas;
  y = yp;
  return true;
}

}  // namespace

SolveResult solve_qp(const QuadraticProgram& qp, const SolverSettings& settings) {
  qp.validate();
  if (settings.max_iter < 1 || settings.eps_abs <= 0.0 || settings.eps_rel <= 0.0 ||
      settings.step_parameter <= 0.0) {
    throw std::invalid_argument("solve_qp: invalid settings");
  }
  const int d = qp.dim();
  SolveResult res;
  res.z = Eigen::VectorXd::Zero(d);

  if (qp.num_eq() == 0 && qp.num_in() == 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
    if (llt.info() == Eigen::Success) {
      res.z = llt.solve(-qp.f);
    } else {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(qp.H);
      res.z = cod.solve(-qp.f);
      if ((qp.H * res.z + qp.f).norm() > 1e-8 * (1.0 + qp.f.norm())) {
        res.status = SolveStatus::unbounded;
        return res;
      }
    }
    res.status = SolveStatus::optimal;
    res.objective = objective_of(qp, res.z);
    res.dual_residual = (qp.H * res.z + qp.f).cwiseAbs().maxCoeff();
    return res;
  }

  const Stacked s = stack_constraints(qp, settings.step_parameter);
  const double sigma = 1e-6;
  const double alpha = 1.6;  // over-relaxation

  Eigen::MatrixXd K = qp.H + sigma * Eigen::MatrixXd::Identity(d, d) +
                      s.A.transpose() * s.rho.asDiagonal() * s.A;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_qp: KKT factorization failed (H not PSD?)");
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(s.A.rows());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(s.A.rows());
  z = z.cwiseMax(s.l.unaryExpr([](double v) { return std::isinf(v) ? -1e20 : v; }))
          .cwiseMin(s.u.unaryExpr([](double v) { return std::isinf(v) ? 1e20 : v; }));

  Residuals r;
  int iter = 0;
  for (; iter < settings.max_iter; ++iter) {
    const Eigen::VectorXd rhs =
        sigma * x - qp.f + s.A.transpose() * (s.rho.asDiagonal() * z - y);
    const Eigen::VectorXd x_tilde = llt.solve(rhs);
    const Eigen::VectorXd z_tilde = s.A * x_tilde;

    const Eigen::VectorXd x_next = alpha * x_tilde + (1.0 - alpha) * x;
    const Eigen::VectorXd z_relaxed = alpha * z_tilde + (1.0 - alpha) * z;
    const Eigen::VectorXd z_unproj = z_relaxed + s.rho.cwiseInverse().cwiseProduct(y);
    Eigen::VectorXd z_next = z_unproj.cwiseMax(s.l).cwiseMin(s.u);
    const Eigen::VectorXd y_next = y + s.rho.cwiseProduct(z_relaxed - z_next);

    const Eigen::VectorXd dy = y_next - y;
    const Eigen::VectorXd dx = x_next - x;
    x = x_next;
    z = z_next;
    y = y_next;

    if (iter % 25 == 0 || iter + 1 == settings.max_iter) {
      r = residuals(qp, s, settings, x, z, y);
      if (r.converged()) break;
      if (primal_infeasibility_certificate(s, dy)) {
        res.z = x;
        res.status = SolveStatus::infeasible;
        res.iterations = iter + 1;
        res.primal_residual = r.prim;
        res.dual_residual = r.dual;
        return res;
      }
      if (dual_infeasibility_certificate(qp, s, dx)) {
        res.z = x;
        res.status = SolveStatus::unbounded;
        res.iterations = iter + 1;
        return res;
      }
    }
  }

  if (settings.polish) polish(qp, s, settings, x, z, y);
  r = residuals(qp, s, settings, x, z, y);

  res.z = x;
  res.iterations = iter;
  res.primal_residual = r.prim;
  res.dual_residual = r.dual;
  res.objective = objective_of(qp, x);
  res.status = r.converged() ? SolveStatus::optimal : SolveStatus::max_iter;
  return res;
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& A_cl,
                                        const Eigen::MatrixXd& Q) {
  const Eigen::Index n = A_cl.rows();
  if (A_cl.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw std::invalid_argument("solve_discrete_lyapunov: dimension mismatch");
  }
  if (spectral_radius(A_cl) >= 1.0) {
    throw std::invalid_argument("solve_discrete_lyapunov: A_cl is not Schur stable");
  }
  // vec(A' P A) = (A' x A') vec(P); solve (I - A' x A') vec(P) = vec(Q)
  Eigen::MatrixXd kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = A_cl.transpose()(i, j) * A_cl.transpose();
    }
  }
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n) - kron;
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
  const Eigen::VectorXd pvec = lhs.partialPivLu().solve(q);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(pvec.data(), n, n);
  return 0.5 * (P + P.transpose());
}

double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("spectral_radius: non-square input");
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

double pinv_norm(const Eigen::MatrixXd& M) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& sv = svd.singularValues();
  const Eigen::Index r = std::min(M.rows(), M.cols());
  const double smin = sv(r - 1);
  if (smin <= 0.0) throw std::invalid_argument("pinv_norm: rank-deficient matrix");
  return 1.0 / smin;
}

double weighted_operator_norm(const Eigen::MatrixXd& M, const Eigen::MatrixXd& P) {
  if (P.rows() != P.cols() || P.rows() != M.rows()) {
    throw std::invalid_argument("weighted_operator_norm: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("weighted_operator_norm: P must be positive definite");
  }
  const Eigen::MatrixXd MtPM = M.transpose() * P * M;
  if (M.rows() == M.cols()) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(MtPM, P);
    return std::sqrt(std::max(0.0, ges.eigenvalues().maxCoeff()));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(MtPM);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

namespace {

// Least-squares projection onto the affine set of structured LMI blocks
// [[P, A'P + C'W'], [PA + WC, P]] over symmetric P and free W.
class LmiStructure {
 public:
  LmiStructure(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C)
      : n_(A.rows()), p_(C.rows()), A_(A), C_(C) {
    const Eigen::Index nsym = n_ * (n_ + 1) / 2;
    const Eigen::Index nw = n_ * p_;
    Eigen::MatrixXd G(4 * n_ * n_, nsym + nw);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = i; j < n_; ++j, ++col) {
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_, n_);
        P(i, j) = P(j, i) = 1.0;
        G.col(col) = vec(assemble(P, Eigen::MatrixXd::Zero(n_, p_)));
      }
    }
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = 0; j < p_; ++j, ++col) {
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n_, p_);
        W(i, j) = 1.0;
        G.col(col) = vec(assemble(Eigen::MatrixXd::Zero(n_, n_), W));
      }
    }
    qr_.compute(G);
    G_ = std::move(G);
  }

  Eigen::MatrixXd assemble(const Eigen::MatrixXd& P, const Eigen::MatrixXd& W) const {
    Eigen::MatrixXd M(2 * n_, 2 * n_);
    M.topLeftCorner(n_, n_) = P;
    M.bottomRightCorner(n_, n_) = P;
    M.bottomLeftCorner(n_, n_) = P * A_ + W * C_;
    M.topRightCorner(n_, n_) = M.bottomLeftCorner(n_, n_).transpose();
    return M;
  }

  void project(const Eigen::MatrixXd& target, Eigen::MatrixXd& P, Eigen::MatrixXd& W) const {
    const Eigen::VectorXd theta = qr_.solve(vec(target));
    P.setZero(n_, n_);
    W.setZero(n_, p_);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = i; j < n_; ++j, ++at) P(i, j) = P(j, i) = theta(at);
    }
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = 0; j < p_; ++j, ++at) W(i, j) = theta(at);
    }
  }

 private:
  static Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  }

  Eigen::Index n_, p_;
  Eigen::MatrixXd A_, C_;
  Eigen::MatrixXd G_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

Eigen::MatrixXd psd_clamp(const Eigen::MatrixXd& M, double floor) {
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

ObserverGain solve_observer_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                 int max_iter, double lmi_eps) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || C.cols() != n) {
    throw std::invalid_argument("solve_observer_gain: dimension mismatch");
  }
  const double margin = 1e-9;
  if (spectral_radius(A) < 1.0 - margin) {
    // zero gain already passes the spectral-radius verifier
    return ObserverGain{Eigen::MatrixXd::Zero(n, C.rows()),
                        solve_discrete_lyapunov(A, Eigen::MatrixXd::Identity(n, n))};
  }

  const LmiStructure structure(A, C);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, C.rows());
  Eigen::MatrixXd M = structure.assemble(P, W);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::MatrixXd clamped = psd_clamp(M, lmi_eps);
    structure.project(clamped, P, W);
    M = structure.assemble(P, W);

    Eigen::LLT<Eigen::MatrixXd> pd(P - 0.5 * lmi_eps * Eigen::MatrixXd::Identity(n, n));
    if (pd.info() != Eigen::Success) continue;
    const Eigen::MatrixXd L = P.llt().solve(W);
    const Eigen::MatrixXd Acl = A + L * C;
    if (spectral_radius(Acl) < 1.0 - margin) {
      // refresh the certificate so that |A + LC|_P < 1 holds exactly
      return ObserverGain{
          L, solve_discrete_lyapunov(Acl, Eigen::MatrixXd::Identity(n, n))};
    }
  }
  throw std::runtime_error(
      "solve_observer_gain: LMI synthesis failed; pair (A, C) appears undetectable "
      "(Assumption: detectability)");
}

}  // namespace ddmhe
