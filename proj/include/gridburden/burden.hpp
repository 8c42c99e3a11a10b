#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridburden/case_io.hpp"
#include "gridburden/pricing.hpp"
#include "gridburden/sensitivity.hpp"

namespace gridburden {

// Static energy burden b = diag(d ./ s) pi: the fraction of each node's
// income spent on electricity over the accounting period. When household
// counts are supplied the per-household average (nodal burden divided by the
// household count) is emitted alongside; zero-household nodes get NaN there.
struct BurdenVector {
  Eigen::VectorXd b;
  std::optional<Eigen::VectorXd> per_household;
  std::vector<std::string> warnings;  // values outside the nominal (0, 1] range
};

BurdenVector static_burden(const Eigen::VectorXd& demand, const Eigen::VectorXd& income,
                           const Eigen::VectorXd& pi,
                           const std::optional<Eigen::VectorXd>& households = std::nullopt);

// Locational marginal burden under Model 0:
//
//   db/dd = -diag(d ./ s) [F' 1] dnu/dd + diag(pi(nu) ./ s)
//
// with pi(nu) = lambda + omega (the operating-cost term is demand independent
// and enters only the price level). The gradient of the total burden is
// grad B = -d' diag(s)^-1 [F' 1] dnu/dd + pi' diag(s)^-1, which equals the
// column sums of db/dd; LMB-to-others is the off-diagonal column sum.
struct LmbResult {
  Eigen::MatrixXd lmb;        // N x N, entry (i, j) = db_i / dd_j, 1/MWh
  Eigen::VectorXd gradient;   // length N
  Eigen::VectorXd to_others;  // length N
  RegularityDiagnostics diagnostics;
};

LmbResult lmb_matrix(const Network& network, const Theta& theta, const Eigen::VectorXd& income,
                     const OpfSolution& solution, const SolutionJacobian& sensitivity,
                     const QpForm& qp, const RetailConfig& config,
                     const RegularityDiagnostics& diagnostics);

// End-to-end central-difference check of the LMB matrix: re-solves the OPF at
// d +- h e_j and differences the burden vector. Columns whose perturbed
// solves change the active set are flagged and excluded from the deviation
// statistics.
struct LmbFdCheck {
  Eigen::MatrixXd analytic;
  Eigen::MatrixXd fd;
  std::vector<bool> column_flagged;
  double max_abs_deviation = 0.0;
  double max_rel_deviation = 0.0;  // relative to max(|analytic|, floor)
};

LmbFdCheck lmb_fd_check(const Network& network, const Theta& theta,
                        const Eigen::VectorXd& income, const RetailConfig& config, double h,
                        const SolverOptions& options = {});

// Plot-ready tables keyed by external bus id: income, households, demand,
// LMP, retail price, static burden, LMB diagonal and LMB-to-others, plus the
// full LMB matrix and total-burden gradient.
Report burden_report(const Network& network, const Theta& theta, const IncomeTable& income,
                     const Eigen::VectorXd& lmp, const RetailPrices& prices,
                     const BurdenVector& burden, const LmbResult& lmb);

}  // namespace gridburden
