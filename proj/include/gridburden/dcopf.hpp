#pragma once

#include <vector>

#include <Eigen/Core>

#include "gridburden/network.hpp"

namespace gridburden {

// Problem parameters the OPF solution map is differentiated against:
// demands d (per bus, MWh), quadratic and linear generator cost coefficients.
struct Theta {
  Eigen::VectorXd d;      // length N, >= 0
  Eigen::VectorXd alpha;  // length K, >= 0
  Eigen::VectorXd beta;   // length K
};

// Standard-form QP over x = [g; p]:
//
//   minimize    x' Q x + w' x
//   subject to  G x <= h
//               A x  = y
//
// with the blocks
//
//   A = [ F*B   -I_M ]      G = [ -I_K  0 ]      Q = [ diag(alpha)  0       ]
//       [ 1'B    0'  ]          [  I_K  0 ]          [ 0            tau*I_M ]
//                               [  0  -I_M ]
//   y = [ F*d  ]               [  0   I_M ]      w = [ beta ]
//       [ 1'd  ]           h = [ 0; g_max; p_lim; p_lim ]       [ 0 ]
//
// Note the objective carries no 1/2: x' Q x reproduces sum_i alpha_i g_i^2
// exactly, so the cost Hessian is 2Q and stationarity reads
// 2Qx + w + G'mu + A'nu = 0 (for one bus: 2*alpha*g + beta + nu = 0).
struct QpForm {
  Eigen::MatrixXd Q;  // (K+M) x (K+M)
  Eigen::VectorXd w;  // K+M
  Eigen::MatrixXd A;  // (M+1) x (K+M), full row rank (checked at assembly)
  Eigen::VectorXd y;  // M+1
  Eigen::MatrixXd G;  // (2K+2M) x (K+M)
  Eigen::VectorXd h;  // 2K+2M
  double tau = 0.0;

  int num_buses = 0;  // N
  int num_gens = 0;   // K
  int num_lines = 0;  // M

  // Cached at assembly so every downstream consumer (LMPs, sensitivities)
  // sees the same PTDF and generator incidence the constraints were built from.
  Eigen::MatrixXd ptdf;           // M x N
  Eigen::MatrixXd gen_incidence;  // N x K

  int num_vars() const { return num_gens + num_lines; }           // K+M
  int num_eq() const { return num_lines + 1; }                    // M+1
  int num_ineq() const { return 2 * (num_gens + num_lines); }     // 2K+2M

  double objective(const Eigen::VectorXd& x) const;
};

struct SolverOptions {
  double kkt_tol = 1e-8;  // max allowed ||k(z*)||_inf on a successful solve
  double act_tol = 1e-7;  // |slack| below this marks a constraint active
  int max_iter = 200;     // interior-point iteration cap
  double tau = 1e-6;      // flow-block regularization used by assemble()
};

// Primal-dual optimum of the QP. Inequality rows are ordered
// [g lower (K); g upper (K); p lower (M); p upper (M)]; nu holds the M flow
// duals followed by the power-balance dual.
struct OpfSolution {
  Eigen::VectorXd g;    // K
  Eigen::VectorXd p;    // M
  Eigen::VectorXd mu;   // 2K+2M, >= 0
  Eigen::VectorXd nu;   // M+1
  std::vector<int> active_set;  // inequality rows with |slack| < act_tol, ascending
  double kkt_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool refined = false;  // active-set polish succeeded
  std::vector<std::string> warnings;

  Eigen::VectorXd x() const;  // [g; p]
};

// Builds the standard-form QP for the network at the given parameters.
// tau > 0 regularizes the flow block. Throws DimensionMismatch on size
// errors, RankDeficientEquality if A loses full row rank.
QpForm assemble(const Network& network, const Theta& theta, double tau);

// Solves the QP to primal-dual optimality: Mehrotra-style interior point
// followed by an active-set refinement pass that re-solves the
// equality-constrained KKT system on the binding rows to sharpen duals and
// restore exact complementarity. Throws Infeasible / MaxIterations.
OpfSolution solve(const QpForm& qp, const SolverOptions& options = {});

// KKT operator stack: [ 2Qx + w + G'mu + A'nu; mu .* (Gx - h); Ax - y ].
Eigen::VectorXd kkt_vector(const QpForm& qp, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& mu, const Eigen::VectorXd& nu);

// Infinity norm of kkt_vector.
double kkt_residual(const QpForm& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                    const Eigen::VectorXd& nu);

}  // namespace gridburden
