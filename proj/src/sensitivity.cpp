#include "gridburden/sensitivity.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace gridburden {

namespace {

// Derivative of the KKT operator with respect to theta = (alpha, beta, d).
// From the operator stack k(z; theta):
//   stationarity row j:  d/d alpha_j { 2 alpha_j g_j } = 2 g_j
//                        d/d beta_j  { beta_j }        = 1
//   equality block:      d/d d_i { -(F d; 1'd) }       = -[F e_i; 1]
// The complementarity rows carry no direct theta dependence.
Eigen::MatrixXd kkt_theta_derivative(const QpForm& qp, const OpfSolution& sol) {
  const int n = qp.num_vars();
  const int mi = qp.num_ineq();
  const int me = qp.num_eq();
  const int k = qp.num_gens;
  const int n_bus = qp.num_buses;

  Eigen::MatrixXd dkdtheta = Eigen::MatrixXd::Zero(n + mi + me, 2 * k + n_bus);
  for (int j = 0; j < k; ++j) {
    dkdtheta(j, j) = 2.0 * sol.g(j);  // alpha columns
    dkdtheta(j, k + j) = 1.0;         // beta columns
  }
  for (int i = 0; i < n_bus; ++i) {
    dkdtheta.block(n + mi, 2 * k + i, me - 1, 1) = -qp.ptdf.col(i);
    dkdtheta(n + mi + me - 1, 2 * k + i) = -1.0;
  }
  return dkdtheta;
}

}  // namespace

KktJacobian kkt_jacobian(const QpForm& qp, const OpfSolution& sol, double kkt_tol) {
  if (sol.kkt_residual > kkt_tol) {
    throw Error(ErrorKind::NotConverged,
                "KKT residual " + std::to_string(sol.kkt_residual) +
                    " exceeds tolerance; refusing to differentiate");
  }
  const int n = qp.num_vars();
  const int mi = qp.num_ineq();
  const int me = qp.num_eq();

  const Eigen::VectorXd x = sol.x();

  KktJacobian jac;
  jac.num_vars = n;
  jac.num_ineq = mi;
  jac.num_eq = me;
  jac.matrix = Eigen::MatrixXd::Zero(n + mi + me, n + mi + me);
  jac.matrix.topLeftCorner(n, n) = 2.0 * qp.Q;
  jac.matrix.block(0, n, n, mi) = qp.G.transpose();
  jac.matrix.block(0, n + mi, n, me) = qp.A.transpose();
  jac.matrix.block(n, 0, mi, n) = sol.mu.asDiagonal() * qp.G;
  jac.matrix.block(n, n, mi, mi) = (qp.G * x - qp.h).asDiagonal();
  jac.matrix.block(n + mi, 0, me, n) = qp.A;

  // rcond() is only meaningful on a full-rank factorization; an exactly
  // singular matrix (zero comp-slack row) must come back as rank-deficient.
  Eigen::FullPivLU<Eigen::MatrixXd> rank_check(jac.matrix);
  if (rank_check.rank() < jac.matrix.rows()) {
    jac.condition_estimate = std::numeric_limits<double>::infinity();
    return jac;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.matrix);
  const double rcond = lu.rcond();
  jac.condition_estimate =
      (rcond > 0.0 && std::isfinite(rcond)) ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  return jac;
}

RegularityDiagnostics check_regularity(const KktJacobian& jac, const QpForm& qp,
                                       const OpfSolution& sol, double gap_tol) {
  RegularityDiagnostics diag;
  diag.condition_estimate = jac.condition_estimate;

  const Eigen::VectorXd slack = qp.h - qp.G * sol.x();
  diag.min_complementarity_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < qp.num_ineq(); ++i) {
    const double gap = std::max(sol.mu(i), std::abs(slack(i)));
    if (gap <= gap_tol) diag.degenerate_constraints.push_back(i);
    diag.min_complementarity_gap = std::min(diag.min_complementarity_gap, gap);
  }
  diag.is_strictly_complementary = diag.min_complementarity_gap > gap_tol;

  // Prop.-1 hypothesis: the Jacobian must be comfortably invertible.
  const double cond_limit = 1.0 / std::sqrt(std::numeric_limits<double>::epsilon());
  diag.jacobian_singular =
      !std::isfinite(jac.condition_estimate) || jac.condition_estimate > cond_limit;
  return diag;
}

SolutionJacobian solution_jacobian(const KktJacobian& jac, const QpForm& qp,
                                   const OpfSolution& sol) {
  const int n = jac.num_vars;
  const int mi = jac.num_ineq;
  const int me = jac.num_eq;
  const int k = qp.num_gens;
  const int m = qp.num_lines;
  const int n_bus = qp.num_buses;

  const RegularityDiagnostics diag = check_regularity(jac, qp, sol);
  auto degenerate_note = [&diag]() {
    std::string note;
    for (int i : diag.degenerate_constraints) {
      note += (note.empty() ? "" : ", ") + std::to_string(i);
    }
    return note.empty() ? std::string("none flagged")
                        : "degenerate inequality rows: " + note;
  };
  if (diag.jacobian_singular) {
    throw Error(ErrorKind::SingularJacobian,
                "KKT Jacobian is singular (condition estimate " +
                    std::to_string(jac.condition_estimate) + "); " + degenerate_note());
  }

  const Eigen::MatrixXd dkdtheta = kkt_theta_derivative(qp, sol);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.matrix);
  const Eigen::MatrixXd solution = lu.solve(-dkdtheta);

  const double residual =
      (jac.matrix * solution + dkdtheta).lpNorm<Eigen::Infinity>();
  if (!(residual <= 1e-8)) {
    throw Error(ErrorKind::SingularJacobian,
                "implicit-function solve residual " + std::to_string(residual) +
                    " exceeds 1e-8; " + degenerate_note());
  }

  SolutionJacobian out;
  out.ift_residual = residual;
  auto rows = [&](int offset, int count) { return solution.middleRows(offset, count); };
  out.dg_dalpha = rows(0, k).leftCols(k);
  out.dg_dbeta = rows(0, k).middleCols(k, k);
  out.dg_dd = rows(0, k).rightCols(n_bus);
  out.dp_dalpha = rows(k, m).leftCols(k);
  out.dp_dbeta = rows(k, m).middleCols(k, k);
  out.dp_dd = rows(k, m).rightCols(n_bus);
  out.dmu_dalpha = rows(n, mi).leftCols(k);
  out.dmu_dbeta = rows(n, mi).middleCols(k, k);
  out.dmu_dd = rows(n, mi).rightCols(n_bus);
  out.dnu_dalpha = rows(n + mi, me).leftCols(k);
  out.dnu_dbeta = rows(n + mi, me).middleCols(k, k);
  out.dnu_dd = rows(n + mi, me).rightCols(n_bus);
  return out;
}

FdJacobian fd_oracle(const Network& network, const Theta& theta, double h,
                     const SolverOptions& options) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidStep, "finite-difference step must be > 0");

  const QpForm base_qp = assemble(network, theta, options.tau);
  const OpfSolution base = solve(base_qp, options);

  const int k = static_cast<int>(theta.alpha.size());
  const int n_bus = static_cast<int>(theta.d.size());
  const int n = base_qp.num_vars();
  const int mi = base_qp.num_ineq();
  const int me = base_qp.num_eq();

  FdJacobian out;
  out.alpha_changed.assign(k, false);
  out.beta_changed.assign(k, false);
  out.d_changed.assign(n_bus, false);

  Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(n + mi + me, 2 * k + n_bus);

  auto solve_at = [&](const Theta& t) {
    const QpForm qp = assemble(network, t, options.tau);
    return solve(qp, options);
  };

  auto column = [&](const Theta& plus, const Theta& minus, double step, bool& changed) {
    const OpfSolution up = solve_at(plus);
    const OpfSolution dn = solve_at(minus);
    changed = up.active_set != base.active_set || dn.active_set != base.active_set;
    Eigen::VectorXd dz(n + mi + me);
    dz << (up.x() - dn.x()), (up.mu - dn.mu), (up.nu - dn.nu);
    return (dz / (2.0 * step)).eval();
  };

  for (int j = 0; j < k; ++j) {
    const double step = h * std::max(1.0, std::abs(theta.alpha(j)));
    Theta up = theta, dn = theta;
    up.alpha(j) += step;
    dn.alpha(j) = std::max(0.0, dn.alpha(j) - step);  // one-sided at the boundary
    const double actual = (up.alpha(j) - dn.alpha(j)) / 2.0;
    bool changed = false;
    columns.col(j) = column(up, dn, actual, changed);
    out.alpha_changed[j] = changed;
  }
  for (int j = 0; j < k; ++j) {
    const double step = h * std::max(1.0, std::abs(theta.beta(j)));
    Theta up = theta, dn = theta;
    up.beta(j) += step;
    dn.beta(j) -= step;
    bool changed = false;
    columns.col(k + j) = column(up, dn, step, changed);
    out.beta_changed[j] = changed;
  }
  for (int i = 0; i < n_bus; ++i) {
    const double step = h * std::max(1.0, std::abs(theta.d(i)));
    Theta up = theta, dn = theta;
    up.d(i) += step;
    dn.d(i) = std::max(0.0, dn.d(i) - step);
    const double actual = (up.d(i) - dn.d(i)) / 2.0;
    bool changed = false;
    columns.col(2 * k + i) = column(up, dn, actual, changed);
    out.d_changed[i] = changed;
  }

  auto rows = [&](int offset, int count) { return columns.middleRows(offset, count); };
  const int m = base_qp.num_lines;
  out.jac.dg_dalpha = rows(0, k).leftCols(k);
  out.jac.dg_dbeta = rows(0, k).middleCols(k, k);
  out.jac.dg_dd = rows(0, k).rightCols(n_bus);
  out.jac.dp_dalpha = rows(k, m).leftCols(k);
  out.jac.dp_dbeta = rows(k, m).middleCols(k, k);
  out.jac.dp_dd = rows(k, m).rightCols(n_bus);
  out.jac.dmu_dalpha = rows(n, mi).leftCols(k);
  out.jac.dmu_dbeta = rows(n, mi).middleCols(k, k);
  out.jac.dmu_dd = rows(n, mi).rightCols(n_bus);
  out.jac.dnu_dalpha = rows(n + mi, me).leftCols(k);
  out.jac.dnu_dbeta = rows(n + mi, me).middleCols(k, k);
  out.jac.dnu_dd = rows(n + mi, me).rightCols(n_bus);
  return out;
}

}  // namespace gridburden
