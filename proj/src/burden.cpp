#include "gridburden/burden.hpp"

#include <cmath>
#include <limits>

namespace gridburden {

BurdenVector static_burden(const Eigen::VectorXd& demand, const Eigen::VectorXd& income,
                           const Eigen::VectorXd& pi,
                           const std::optional<Eigen::VectorXd>& households) {
  const Eigen::Index n = demand.size();
  if (income.size() != n || pi.size() != n || (households && households->size() != n)) {
    throw Error(ErrorKind::DimensionMismatch, "static_burden: input lengths differ");
  }

  BurdenVector out;
  out.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (demand(i) > 0.0 && !(income(i) > 0.0)) {
      throw Error(ErrorKind::NonPositiveIncome,
                  "bus position " + std::to_string(i) + " has demand but income " +
                      format_double(income(i)));
    }
    out.b(i) = income(i) > 0.0 ? demand(i) * pi(i) / income(i) : 0.0;
    if (out.b(i) > 1.0 || (demand(i) > 0.0 && out.b(i) <= 0.0)) {
      out.warnings.push_back("burden " + format_double(out.b(i)) + " at bus position " +
                             std::to_string(i) + " is outside the nominal (0, 1] range");
    }
  }
  if (households) {
    Eigen::VectorXd avg(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      avg(i) = (*households)(i) > 0.0 ? out.b(i) / (*households)(i)
                                      : std::numeric_limits<double>::quiet_NaN();
    }
    out.per_household = avg;
  }
  return out;
}

LmbResult lmb_matrix(const Network& network, const Theta& theta, const Eigen::VectorXd& income,
                     const OpfSolution& solution, const SolutionJacobian& sensitivity,
                     const QpForm& qp, const RetailConfig& config,
                     const RegularityDiagnostics& diagnostics) {
  const int n = network.bus_count();
  if (theta.d.size() != n || income.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "lmb_matrix: demand/income length != bus count");
  }
  if (config.model != 0) {
    throw Error(ErrorKind::ModelMismatch,
                "the LMB matrix is defined under Model 0 retail pricing");
  }
  for (const Bus& bus : network.buses) {
    if (config.phi_for(bus.id) != 0.0) {
      throw Error(ErrorKind::ModelMismatch,
                  "the LMB matrix assumes a not-for-profit utility (zero profit matrix)");
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!(income(i) > 0.0)) {
      throw Error(ErrorKind::NonPositiveIncome,
                  "bus " + std::to_string(network.buses[i].id) + " needs income > 0");
    }
  }
  if (diagnostics.jacobian_singular) {
    throw Error(ErrorKind::SingularJacobian,
                "KKT Jacobian is singular; the LMB matrix is not well-defined here");
  }

  const Eigen::VectorXd lambda = lmps(solution.nu, qp.ptdf);
  Eigen::VectorXd pi = lambda;
  for (int i = 0; i < n; ++i) pi(i) += config.omega_for(network.buses[i].id);

  const Eigen::MatrixXd price_map = lmp_map(qp.ptdf);            // [F' 1]
  const Eigen::VectorXd d_over_s = theta.d.cwiseQuotient(income);

  LmbResult out;
  out.diagnostics = diagnostics;
  out.lmb = -(d_over_s.asDiagonal() * (price_map * sensitivity.dnu_dd));
  out.lmb += Eigen::MatrixXd(pi.cwiseQuotient(income).asDiagonal());

  out.gradient = (-(theta.d.cwiseQuotient(income).transpose() *
                    (price_map * sensitivity.dnu_dd)) +
                  pi.cwiseQuotient(income).transpose())
                     .transpose();

  out.to_others.resize(n);
  for (int j = 0; j < n; ++j) out.to_others(j) = out.lmb.col(j).sum() - out.lmb(j, j);
  return out;
}

LmbFdCheck lmb_fd_check(const Network& network, const Theta& theta,
                        const Eigen::VectorXd& income, const RetailConfig& config, double h,
                        const SolverOptions& options) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidStep, "finite-difference step must be > 0");
  const int n = network.bus_count();

  const QpForm qp = assemble(network, theta, options.tau);
  const OpfSolution base = solve(qp, options);
  const KktJacobian jac = kkt_jacobian(qp, base, options.kkt_tol);
  const RegularityDiagnostics diag = check_regularity(jac, qp, base);
  const SolutionJacobian sens = solution_jacobian(jac, qp, base);

  LmbFdCheck out;
  out.analytic = lmb_matrix(network, theta, income, base, sens, qp, config, diag).lmb;
  out.fd.resize(n, n);
  out.column_flagged.assign(n, false);

  std::vector<int> bus_ids;
  for (const Bus& bus : network.buses) bus_ids.push_back(bus.id);

  auto burden_at = [&](const Theta& t) {
    const QpForm qp_t = assemble(network, t, options.tau);
    const OpfSolution sol = solve(qp_t, options);
    const Eigen::VectorXd lambda = lmps(sol.nu, qp_t.ptdf);
    const RetailPrices prices = retail_model0(lambda, config, t.d, bus_ids);
    return std::pair<Eigen::VectorXd, std::vector<int>>(
        static_burden(t.d, income, prices.pi.col(0)).b, sol.active_set);
  };

  for (int j = 0; j < n; ++j) {
    const double step = h * std::max(1.0, std::abs(theta.d(j)));
    Theta up = theta, dn = theta;
    up.d(j) += step;
    dn.d(j) = std::max(0.0, dn.d(j) - step);
    const double actual = (up.d(j) - dn.d(j)) / 2.0;
    const auto [b_up, set_up] = burden_at(up);
    const auto [b_dn, set_dn] = burden_at(dn);
    out.fd.col(j) = (b_up - b_dn) / (2.0 * actual);
    out.column_flagged[j] = set_up != base.active_set || set_dn != base.active_set;
  }

  const double scale = std::max(out.analytic.cwiseAbs().maxCoeff(), 1e-12);
  for (int j = 0; j < n; ++j) {
    if (out.column_flagged[j]) continue;
    for (int i = 0; i < n; ++i) {
      const double dev = std::abs(out.analytic(i, j) - out.fd(i, j));
      out.max_abs_deviation = std::max(out.max_abs_deviation, dev);
      out.max_rel_deviation = std::max(out.max_rel_deviation, dev / scale);
    }
  }
  return out;
}

Report burden_report(const Network& network, const Theta& theta, const IncomeTable& income,
                     const Eigen::VectorXd& lmp, const RetailPrices& prices,
                     const BurdenVector& burden, const LmbResult& lmb) {
  const int n = network.bus_count();
  Report report;

  Table summary;
  summary.columns = {"bus_id",      "income",       "households", "demand_mwh",
                     "lmp",         "retail_price", "burden",     "burden_per_household",
                     "lmb_diagonal", "lmb_to_others"};
  for (int i = 0; i < n; ++i) {
    const int bus_id = network.buses[i].id;
    const IncomeRecord* rec = income.find(bus_id);
    std::vector<Cell> row;
    row.emplace_back(static_cast<std::int64_t>(bus_id));
    row.emplace_back(rec ? rec->income : 0.0);
    row.emplace_back(static_cast<std::int64_t>(rec ? rec->households : 0));
    row.emplace_back(theta.d(i));
    row.emplace_back(lmp(i));
    row.emplace_back(prices.pi(i, 0));
    row.emplace_back(burden.b(i));
    if (burden.per_household && std::isfinite((*burden.per_household)(i))) {
      row.emplace_back((*burden.per_household)(i));
    } else {
      row.emplace_back(std::string());
    }
    row.emplace_back(lmb.lmb(i, i));
    row.emplace_back(lmb.to_others(i));
    summary.rows.push_back(std::move(row));
  }
  report.tables.emplace_back("burden", std::move(summary));

  Table matrix;
  matrix.columns = {"bus_i", "bus_j", "dbi_ddj"};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      matrix.rows.push_back({static_cast<std::int64_t>(network.buses[i].id),
                             static_cast<std::int64_t>(network.buses[j].id), lmb.lmb(i, j)});
    }
  }
  report.tables.emplace_back("lmb_matrix", std::move(matrix));

  Table gradient;
  gradient.columns = {"bus_id", "dB_dd"};
  for (int i = 0; i < n; ++i) {
    gradient.rows.push_back(
        {static_cast<std::int64_t>(network.buses[i].id), lmb.gradient(i)});
  }
  report.tables.emplace_back("gradient", std::move(gradient));

  Table diag;
  diag.columns = {"key", "value"};
  diag.rows.push_back({std::string("min_complementarity_gap"),
                       format_double(lmb.diagnostics.min_complementarity_gap)});
  diag.rows.push_back({std::string("is_strictly_complementary"),
                       std::string(lmb.diagnostics.is_strictly_complementary ? "true" : "false")});
  diag.rows.push_back({std::string("jacobian_singular"),
                       std::string(lmb.diagnostics.jacobian_singular ? "true" : "false")});
  diag.rows.push_back({std::string("condition_estimate"),
                       format_double(lmb.diagnostics.condition_estimate)});
  report.tables.emplace_back("diagnostics", std::move(diag));

  return report;
}

}  // namespace gridburden
