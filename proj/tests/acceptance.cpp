// Acceptance suite: one check per shipped guarantee, one PASS/FAIL line each.
// Run through ctest or directly; exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridburden/burden.hpp"
#include "gridburden/case_io.hpp"
#include "gridburden/pricing.hpp"
#include "gridburden/sensitivity.hpp"
#include "support/oracles.hpp"

using namespace gridburden;

namespace {

const std::string kData = GRIDBURDEN_DATA_DIR;

std::string slurp(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Pipeline {
  QpForm qp;
  OpfSolution sol;
  KktJacobian jac;
  RegularityDiagnostics diag;
};

Pipeline run_pipeline(const Network& net, const Theta& theta, double tau = 1e-6) {
  Pipeline out;
  out.qp = assemble(net, theta, tau);
  out.sol = solve(out.qp);
  out.jac = kkt_jacobian(out.qp, out.sol);
  out.diag = check_regularity(out.jac, out.qp, out.sol);
  return out;
}

// Criterion 1: the hand-solved one-bus fixture. alpha = 0.5, beta = 10,
// gmax = 100, d = 10, s = 1000, omega = 0 gives LMP 20 $/MWh,
// dlambda/dd = 1.0 and an LMB of 0.03 per MWh, each within 1e-6.
bool criterion_one_bus(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();

  const PreparedCase prepared =
      prepare_case(parse_case(slurp(kData + "/cases/one_bus.json"), CaseFormat::NativeJson));
  Theta theta;
  theta.d = prepared.demand;
  theta.alpha = Eigen::VectorXd::Constant(1, prepared.network.generators[0].alpha);
  theta.beta = Eigen::VectorXd::Constant(1, prepared.network.generators[0].beta);

  const Pipeline pipe = run_pipeline(prepared.network, theta);
  const SolutionJacobian sens = solution_jacobian(pipe.jac, pipe.qp, pipe.sol);
  const Eigen::VectorXd lambda = lmps(pipe.sol.nu, pipe.qp.ptdf);
  const double dlambda_dd = -sens.dnu_dd(0, 0);

  const IncomeTable income = parse_income(slurp(kData + "/income/one_bus.csv"));
  const Eigen::VectorXd s = income_vector(prepared.network, income);
  RetailConfig config;
  const LmbResult lmb =
      lmb_matrix(prepared.network, theta, s, pipe.sol, sens, pipe.qp, config, pipe.diag);

  const double elapsed = seconds_since(start);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "lmp=%.9f dlambda/dd=%.9f lmb=%.9f t=%.3fs", lambda(0),
                dlambda_dd, lmb.lmb(0, 0), elapsed);
  detail = buf;
  return std::abs(lambda(0) - 20.0) <= 1e-6 && std::abs(dlambda_dd - 1.0) <= 1e-6 &&
         std::abs(lmb.lmb(0, 0) - 0.03) <= 1e-6 && elapsed < 1.0;
}

// Criterion 2: on >= 50 random connected networks (N in 2..5, M <= 7) with
// strictly complementary solutions, the analytic LMB matrix matches the
// central-difference oracle to 1e-4 relative per entry, ActiveSetChanged
// columns excluded; the whole batch finishes inside 60 s.
bool criterion_lmb_oracle(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(20240312);
  std::uniform_real_distribution<double> income_dist(300.0, 2000.0);

  int accepted = 0;
  int attempts = 0;
  double worst_rel = 0.0;
  while (accepted < 50 && attempts < 600) {
    ++attempts;
    const auto rc = test::random_case(rng, 2 + attempts % 4, 7);
    Pipeline pipe;
    try {
      pipe = run_pipeline(rc.network, rc.theta);
    } catch (const Error&) {
      continue;
    }
    if (!pipe.diag.is_strictly_complementary || pipe.diag.jacobian_singular) continue;

    const int n = rc.network.bus_count();
    Eigen::VectorXd income(n);
    for (int i = 0; i < n; ++i) income(i) = income_dist(rng);
    RetailConfig config;
    LmbFdCheck check;
    try {
      check = lmb_fd_check(rc.network, rc.theta, income, config, 1e-4);
    } catch (const Error&) {
      continue;
    }

    bool instance_ok = true;
    for (int j = 0; j < n && instance_ok; ++j) {
      if (check.column_flagged[j]) continue;
      for (int i = 0; i < n; ++i) {
        const double dev = std::abs(check.analytic(i, j) - check.fd(i, j));
        const double allowed = 1e-4 * std::abs(check.analytic(i, j)) + 1e-12;
        if (std::abs(check.analytic(i, j)) > 1e-10) {
          worst_rel = std::max(worst_rel, dev / std::abs(check.analytic(i, j)));
        }
        if (dev > allowed) {
          instance_ok = false;
          break;
        }
      }
    }
    if (!instance_ok) {
      detail = "per-entry deviation beyond 1e-4 relative";
      return false;
    }
    ++accepted;
  }
  const double elapsed = seconds_since(start);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "instances=%d attempts=%d worst_rel=%.2e t=%.1fs", accepted,
                attempts, worst_rel, elapsed);
  detail = buf;
  return accepted >= 50 && elapsed < 60.0;
}

// Criterion 3: the active-set enumeration oracle reproduces the solver's
// objective to 1e-6 relative and its duals to 1e-5 on strictly complementary
// instances with N <= 4.
bool criterion_enumeration(std::string& detail) {
  std::mt19937 rng(4242);
  int compared = 0;
  double worst_obj = 0.0, worst_dual = 0.0;
  for (int trial = 0; trial < 120 && compared < 20; ++trial) {
    const auto rc = test::random_case(rng, 2 + trial % 3, 6);
    Pipeline pipe;
    try {
      pipe = run_pipeline(rc.network, rc.theta);
    } catch (const Error&) {
      continue;
    }
    if (!pipe.diag.is_strictly_complementary) continue;

    const auto oracle = test::enumerate_qp(pipe.qp, pipe.qp.num_gens + 1);
    if (!oracle.found) {
      detail = "oracle found no feasible face";
      return false;
    }
    ++compared;
    const double obj_dev = std::abs(pipe.sol.objective - oracle.objective) /
                           (1.0 + std::abs(oracle.objective));
    const double dual_dev =
        std::max((pipe.sol.nu - oracle.nu).lpNorm<Eigen::Infinity>(),
                 (pipe.sol.mu - oracle.mu).lpNorm<Eigen::Infinity>());
    worst_obj = std::max(worst_obj, obj_dev);
    worst_dual = std::max(worst_dual, dual_dev);
    if (obj_dev > 1e-6 || dual_dev > 1e-5) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "obj_dev=%.2e dual_dev=%.2e", obj_dev, dual_dev);
      detail = buf;
      return false;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "instances=%d worst_obj=%.2e worst_dual=%.2e", compared,
                worst_obj, worst_dual);
  detail = buf;
  return compared >= 20;
}

// Criterion 4: every successful solve satisfies ||k(z*)||_inf <= 1e-8 and
// |1'Bg - 1'd| <= 1e-6 MW.
bool criterion_kkt_residual(std::string& detail) {
  std::mt19937 rng(777);
  int solved = 0;
  double worst_residual = 0.0, worst_balance = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto rc = test::random_case(rng, 2 + trial % 5, 7);
    QpForm qp;
    OpfSolution sol;
    try {
      qp = assemble(rc.network, rc.theta, 1e-6);
      sol = solve(qp);
    } catch (const Error&) {
      continue;
    }
    ++solved;
    worst_residual = std::max(worst_residual, sol.kkt_residual);
    worst_residual =
        std::max(worst_residual, kkt_residual(qp, sol.x(), sol.mu, sol.nu));
    worst_balance = std::max(
        worst_balance, std::abs((qp.gen_incidence * sol.g).sum() - rc.theta.d.sum()));
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "solves=%d worst_kkt=%.2e worst_balance=%.2e", solved,
                worst_residual, worst_balance);
  detail = buf;
  return solved >= 40 && worst_residual <= 1e-8 && worst_balance <= 1e-6;
}

// Criterion 5: algebraic identities. Gradient vs column sums to 1e-12, LMP
// map linearity to machine rounding, uncongested LMP spread <= 1e-6 $/MWh,
// income homogeneity to 1e-12.
bool criterion_identities(std::string& detail) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);

  // LMP map linearity.
  double worst_linearity = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto rc = test::random_case(rng, 3 + trial % 3, 6);
    const Eigen::MatrixXd f = ptdf(rc.network);
    const int me = rc.network.line_count() + 1;
    Eigen::VectorXd nu1(me), nu2(me);
    for (int i = 0; i < me; ++i) {
      nu1(i) = coef(rng);
      nu2(i) = coef(rng);
    }
    const double a = coef(rng), b = coef(rng);
    const double dev = (lmps(a * nu1 + b * nu2, f) - (a * lmps(nu1, f) + b * lmps(nu2, f)))
                           .lpNorm<Eigen::Infinity>();
    worst_linearity = std::max(worst_linearity, dev);
  }
  if (worst_linearity > 1e-12) {
    detail = "LMP map linearity broke: " + format_double(worst_linearity);
    return false;
  }

  // Uncongested uniformity at tiny tau (the flow regularizer perturbs the
  // flow duals by O(tau * |p|), so the spread bound needs tau << 1e-6 / p).
  double worst_spread = 0.0;
  int uniform_checked = 0;
  for (int trial = 0; trial < 40 && uniform_checked < 10; ++trial) {
    const auto rc = test::random_case(rng, 2 + trial % 4, 6, /*allow_congestion=*/false);
    Pipeline pipe;
    try {
      pipe = run_pipeline(rc.network, rc.theta, 1e-10);
    } catch (const Error&) {
      continue;
    }
    bool flow_active = false;
    for (int idx : pipe.sol.active_set) {
      if (idx >= 2 * pipe.qp.num_gens) flow_active = true;
    }
    if (flow_active) continue;
    ++uniform_checked;
    const Eigen::VectorXd lambda = lmps(pipe.sol.nu, pipe.qp.ptdf);
    worst_spread = std::max(worst_spread, lambda.maxCoeff() - lambda.minCoeff());
  }
  if (uniform_checked < 5 || worst_spread > 1e-6) {
    detail = "uncongested spread " + format_double(worst_spread) + " over " +
             std::to_string(uniform_checked) + " cases";
    return false;
  }

  // Gradient identity and income homogeneity on the island case.
  const PreparedCase prepared =
      prepare_case(parse_case(slurp(kData + "/cases/island12.json"), CaseFormat::NativeJson));
  Theta theta;
  theta.d = prepared.demand;
  const int k = prepared.network.generator_count();
  theta.alpha.resize(k);
  theta.beta.resize(k);
  for (int j = 0; j < k; ++j) {
    theta.alpha(j) = prepared.network.generators[j].alpha;
    theta.beta(j) = prepared.network.generators[j].beta;
  }
  const Pipeline pipe = run_pipeline(prepared.network, theta);
  const SolutionJacobian sens = solution_jacobian(pipe.jac, pipe.qp, pipe.sol);
  const IncomeTable income = parse_income(slurp(kData + "/income/island12.csv"));
  const Eigen::VectorXd s = income_vector(prepared.network, income);
  RetailConfig config;
  const LmbResult lmb =
      lmb_matrix(prepared.network, theta, s, pipe.sol, sens, pipe.qp, config, pipe.diag);

  const Eigen::VectorXd column_sums = lmb.lmb.colwise().sum().transpose();
  const double gradient_dev = (lmb.gradient - column_sums).lpNorm<Eigen::Infinity>();
  if (gradient_dev > 1e-12) {
    detail = "gradient identity deviation " + format_double(gradient_dev);
    return false;
  }

  const double c = 2.75;
  const LmbResult scaled = lmb_matrix(prepared.network, theta, (c * s).eval(), pipe.sol, sens,
                                      pipe.qp, config, pipe.diag);
  const double homogeneity_dev = (scaled.lmb * c - lmb.lmb).lpNorm<Eigen::Infinity>() +
                                 (scaled.gradient * c - lmb.gradient).lpNorm<Eigen::Infinity>() +
                                 (scaled.to_others * c - lmb.to_others).lpNorm<Eigen::Infinity>();
  const BurdenVector burden = static_burden(theta.d, s, lmps(pipe.sol.nu, pipe.qp.ptdf));
  const BurdenVector burden_scaled =
      static_burden(theta.d, (c * s).eval(), lmps(pipe.sol.nu, pipe.qp.ptdf));
  const double burden_dev = (burden_scaled.b * c - burden.b).lpNorm<Eigen::Infinity>();
  if (homogeneity_dev > 1e-12 || burden_dev > 1e-12) {
    detail = "homogeneity deviation " + format_double(homogeneity_dev + burden_dev);
    return false;
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "linearity<=%.1e spread<=%.1e gradient<=%.1e homogeneity<=%.1e",
                worst_linearity, worst_spread, gradient_dev, homogeneity_dev + burden_dev);
  detail = buf;
  return true;
}

// Criterion 6: the engineered degenerate fixture (a binding bound with a zero
// multiplier) is reported as non-strictly-complementary, and the sensitivity
// path either refuses with SingularJacobian or returns a warned result whose
// IFT residual stays at the 1e-8 level.
bool criterion_degeneracy(std::string& detail) {
  const PreparedCase prepared = prepare_case(
      parse_case(slurp(kData + "/cases/degenerate_two_bus.json"), CaseFormat::NativeJson));
  Theta theta;
  theta.d = prepared.demand;
  theta.alpha.resize(2);
  theta.beta.resize(2);
  for (int j = 0; j < 2; ++j) {
    theta.alpha(j) = prepared.network.generators[j].alpha;
    theta.beta(j) = prepared.network.generators[j].beta;
  }
  const Pipeline pipe = run_pipeline(prepared.network, theta);
  if (pipe.diag.is_strictly_complementary) {
    detail = "fixture unexpectedly strictly complementary";
    return false;
  }
  try {
    const SolutionJacobian sens = solution_jacobian(pipe.jac, pipe.qp, pipe.sol);
    if (sens.ift_residual <= 1e-8) {
      detail = "warned result with ift_residual " + format_double(sens.ift_residual);
      return true;
    }
    detail = "sensitivities returned with residual " + format_double(sens.ift_residual);
    return false;
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::SingularJacobian) {
      detail = "refused with SingularJacobian";
      return true;
    }
    detail = std::string("unexpected error: ") + err.what();
    return false;
  }
}

// Criterion 7: on the bundled synthetic island case with incomes assigned
// inversely to demand density, the Fig.-4-style table shows a negative
// Spearman rank correlation between the LMB diagonal and income.
bool criterion_island_shape(std::string& detail) {
  const PreparedCase prepared =
      prepare_case(parse_case(slurp(kData + "/cases/island12.json"), CaseFormat::NativeJson));
  Theta theta;
  theta.d = prepared.demand;
  const int k = prepared.network.generator_count();
  theta.alpha.resize(k);
  theta.beta.resize(k);
  for (int j = 0; j < k; ++j) {
    theta.alpha(j) = prepared.network.generators[j].alpha;
    theta.beta(j) = prepared.network.generators[j].beta;
  }
  const Pipeline pipe = run_pipeline(prepared.network, theta);
  if (!pipe.diag.is_strictly_complementary) {
    detail = "island case is degenerate; tune the fixture";
    return false;
  }
  const SolutionJacobian sens = solution_jacobian(pipe.jac, pipe.qp, pipe.sol);
  const IncomeTable income = parse_income(slurp(kData + "/income/island12.csv"));
  const Eigen::VectorXd s = income_vector(prepared.network, income);
  RetailConfig config;
  const LmbResult lmb =
      lmb_matrix(prepared.network, theta, s, pipe.sol, sens, pipe.qp, config, pipe.diag);

  std::vector<double> diag_entries, incomes;
  for (int i = 0; i < prepared.network.bus_count(); ++i) {
    diag_entries.push_back(lmb.lmb(i, i));
    incomes.push_back(s(i));
  }
  const double rho = test::spearman(diag_entries, incomes);
  detail = "spearman(lmb_diag, income) = " + format_double(rho);
  return rho < 0.0;
}

// Criterion 8: native-json round-trips are lossless at 12 significant digits
// and serialization is byte-stable.
bool criterion_round_trip(std::string& detail) {
  for (const char* name : {"one_bus", "island12", "degenerate_two_bus"}) {
    const std::string text = slurp(kData + "/cases/" + name + ".json");
    const CaseBundle bundle = parse_case(text, CaseFormat::NativeJson);
    const std::string once = write_case_json(bundle);
    const CaseBundle reparsed = parse_case(once, CaseFormat::NativeJson);
    if (write_case_json(reparsed) != once) {
      detail = std::string("case ") + name + " is not a serialization fixed point";
      return false;
    }
    for (int i = 0; i < bundle.network.bus_count(); ++i) {
      if (reparsed.network.buses[i].id != bundle.network.buses[i].id ||
          reparsed.demand(i) != bundle.demand(i)) {
        detail = std::string("case ") + name + " lost bus data";
        return false;
      }
    }
    for (int i = 0; i < bundle.network.line_count(); ++i) {
      const double before = bundle.network.lines[i].susceptance;
      const double after = reparsed.network.lines[i].susceptance;
      if (std::abs(after - before) > 1e-11 * std::abs(before)) {
        detail = std::string("case ") + name + " susceptance drifted";
        return false;
      }
    }
  }

  // Report round-trip at 12 significant digits.
  Report report;
  report.metadata.emplace_back("case_hash", "feed");
  Table table;
  table.columns = {"bus_id", "value"};
  table.rows.push_back({std::int64_t{1}, 1.0 / 3.0});
  table.rows.push_back({std::int64_t{2}, 123456.789012345});
  report.tables.emplace_back("values", table);
  const std::string once = write_report(report, ReportFormat::Json).at("report.json");
  const Report reparsed = parse_report_json(once);
  if (write_report(reparsed, ReportFormat::Json).at("report.json") != once) {
    detail = "report serialization is not a fixed point";
    return false;
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double before = std::get<double>(table.rows[r][1]);
    const double after = std::get<double>(reparsed.find_table("values")->rows[r][1]);
    if (std::abs(after - before) > 1e-11 * std::abs(before)) {
      detail = "report values drifted beyond 12 significant digits";
      return false;
    }
  }
  detail = "case and report round-trips stable";
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "one-bus closed form (lmp 20, dlambda/dd 1, lmb 0.03)", criterion_one_bus},
      {2, "lmb matrix vs central-difference oracle, 50 random networks", criterion_lmb_oracle},
      {3, "qp optimality vs active-set enumeration oracle", criterion_enumeration},
      {4, "kkt residual and power balance on every solve", criterion_kkt_residual},
      {5, "identity suite (gradient, linearity, uniformity, homogeneity)", criterion_identities},
      {6, "degeneracy handling (binding constraint, zero multiplier)", criterion_degeneracy},
      {7, "island case: negative spearman(lmb diagonal, income)", criterion_island_shape},
      {8, "round-trip and determinism", criterion_round_trip},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& err) {
      detail = err.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion.id << ": "
              << criterion.name << (detail.empty() ? "" : " — " + detail) << "\n";
    failures += ok ? 0 : 1;
  }
  return failures;
}
