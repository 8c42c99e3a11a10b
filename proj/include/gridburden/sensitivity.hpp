#pragma once

#include <vector>

#include <Eigen/Core>

#include "gridburden/dcopf.hpp"

namespace gridburden {

// Jacobian of the KKT operator with respect to z = (x, mu, nu), evaluated at
// a converged solution:
//
//   dk/dz = [ 2Q            G'              A' ]
//           [ diag(mu) G    diag(Gx - h)    0  ]
//           [ A             0               0  ]
//
// Square of size (K+M) + (2K+2M) + (M+1).
struct KktJacobian {
  Eigen::MatrixXd matrix;
  double condition_estimate = 0.0;  // 1-norm estimate, 1/rcond of the LU factorization
  int num_vars = 0;
  int num_ineq = 0;
  int num_eq = 0;
};

struct RegularityDiagnostics {
  // min over inequalities of max(mu_i, |slack_i|): zero means some constraint
  // is binding with a zero multiplier.
  double min_complementarity_gap = 0.0;
  bool is_strictly_complementary = false;
  bool jacobian_singular = false;
  double condition_estimate = 0.0;
  std::vector<int> degenerate_constraints;  // rows failing the gap test
};

// Solution map derivative dz/dtheta, theta = (alpha, beta, d), obtained from
// the implicit function theorem: dk/dz * dz/dtheta = -dk/dtheta.
struct SolutionJacobian {
  Eigen::MatrixXd dg_dalpha, dg_dbeta, dg_dd;     // K x K, K x K, K x N
  Eigen::MatrixXd dp_dalpha, dp_dbeta, dp_dd;     // M x ...
  Eigen::MatrixXd dmu_dalpha, dmu_dbeta, dmu_dd;  // (2K+2M) x ...
  Eigen::MatrixXd dnu_dalpha, dnu_dbeta, dnu_dd;  // (M+1) x ...
  double ift_residual = 0.0;  // ||dk/dz * X + dk/dtheta||_inf of the linear solve
};

// Assembles dk/dz at the solution. Throws NotConverged when the solution's
// KKT residual exceeds kkt_tol.
KktJacobian kkt_jacobian(const QpForm& qp, const OpfSolution& sol, double kkt_tol = 1e-8);

// Strict-complementarity and invertibility diagnostics. Never throws; the
// caller decides whether to proceed.
RegularityDiagnostics check_regularity(const KktJacobian& jac, const QpForm& qp,
                                       const OpfSolution& sol, double gap_tol = 1e-6);

// Solves for all parameter sensitivities. Throws SingularJacobian when the
// factorization fails or the linear-solve residual is not at the 1e-8 level;
// the message cites the degenerate constraint indices when there are any.
SolutionJacobian solution_jacobian(const KktJacobian& jac, const QpForm& qp,
                                   const OpfSolution& sol);

// Central-difference verification of the analytic sensitivities: two extra
// solves per parameter at theta +- h_i e_i with h_i = h * max(1, |theta_i|).
// Columns whose perturbed solves change the active set are flagged and must
// be excluded from comparisons (the solution map is not differentiable
// across an active-set change).
struct FdJacobian {
  SolutionJacobian jac;
  std::vector<bool> alpha_changed, beta_changed, d_changed;
};

FdJacobian fd_oracle(const Network& network, const Theta& theta, double h,
                     const SolverOptions& options = {});

}  // namespace gridburden
