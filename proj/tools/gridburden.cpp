// gridburden: solve a DC OPF, recover LMPs from the duals, differentiate the
// solution map through the KKT system and report the locational marginal
// burden of demand on per-node energy burden.
//
// Exit codes: 0 success, 1 runtime/tolerance failure, 2 infeasible program,
// 3 unreadable or malformed input, 4 singular KKT Jacobian (diagnostics are
// still written).

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gridburden/burden.hpp"
#include "gridburden/case_io.hpp"
#include "gridburden/dcopf.hpp"
#include "gridburden/pricing.hpp"
#include "gridburden/pricing_config.hpp"
#include "gridburden/sensitivity.hpp"

namespace fs = std::filesystem;
using namespace gridburden;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitBadInput = 3;
constexpr int kExitSingular = 4;

void log_warn(const std::string& message) { std::cerr << "[warn] " << message << "\n"; }
void log_error(const std::string& message) { std::cerr << "[error] " << message << "\n"; }

int exit_code_for(const Error& err) {
  switch (err.kind()) {
    case ErrorKind::Infeasible:
      return kExitInfeasible;
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
    case ErrorKind::UnsupportedCostModel:
    case ErrorKind::NonPositiveIncome:
    case ErrorKind::InvalidNetwork:
    case ErrorKind::DisconnectedNetwork:
    case ErrorKind::ConflictingColocatedGenerators:
    case ErrorKind::MissingSeries:
    case ErrorKind::MisalignedSeries:
    case ErrorKind::ZeroDenominator:
    case ErrorKind::ModelMismatch:
      return kExitBadInput;
    case ErrorKind::SingularJacobian:
      return kExitSingular;
    default:
      return kExitFailure;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

struct CommonOptions {
  std::string case_path;
  std::string case_format = "auto";
  std::string income_path;
  std::string pricing_path;
  std::string series_path;
  std::string out_dir = "out";
  std::string format = "csv";
  SolverOptions solver;
  double fd_step = 1e-4;
  double tol = 1e-4;
  bool lmb_per_mw_year = false;
};

void add_solver_flags(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--kkt-tol", opts.solver.kkt_tol, "KKT residual tolerance")
      ->capture_default_str();
  cmd->add_option("--act-tol", opts.solver.act_tol, "active-set slack tolerance")
      ->capture_default_str();
  cmd->add_option("--tau", opts.solver.tau, "flow-block regularization")
      ->capture_default_str();
  cmd->add_option("--max-iter", opts.solver.max_iter, "interior-point iteration cap")
      ->capture_default_str();
}

void add_case_flags(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--case", opts.case_path, "case file")->required();
  cmd->add_option("--case-format", opts.case_format, "matpower | json | auto")
      ->check(CLI::IsMember({"matpower", "json", "auto"}))
      ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--format", opts.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

CaseFormat detect_format(const CommonOptions& opts) {
  if (opts.case_format == "matpower") return CaseFormat::MatpowerSubset;
  if (opts.case_format == "json") return CaseFormat::NativeJson;
  return fs::path(opts.case_path).extension() == ".m" ? CaseFormat::MatpowerSubset
                                                      : CaseFormat::NativeJson;
}

struct LoadedCase {
  PreparedCase prepared;
  Theta theta;
  std::string hash;
  std::vector<int> bus_ids;
};

LoadedCase load_case(const CommonOptions& opts) {
  const std::string text = read_file(opts.case_path);
  LoadedCase loaded;
  loaded.hash = content_hash(text);
  loaded.prepared = prepare_case(parse_case(text, detect_format(opts)));
  for (const std::string& warning : loaded.prepared.warnings) log_warn(warning);

  const Network& network = loaded.prepared.network;
  loaded.theta.d = loaded.prepared.demand;
  loaded.theta.alpha.resize(network.generator_count());
  loaded.theta.beta.resize(network.generator_count());
  for (int j = 0; j < network.generator_count(); ++j) {
    loaded.theta.alpha(j) = network.generators[j].alpha;
    loaded.theta.beta(j) = network.generators[j].beta;
  }
  for (const Bus& bus : network.buses) loaded.bus_ids.push_back(bus.id);
  return loaded;
}

std::string timestamp_string() {
  // Reports must be byte-identical across reruns; wall time is only used when
  // the caller pins it via SOURCE_DATE_EPOCH (reproducible-build convention).
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (epoch == nullptr) return "";
  const std::time_t t = static_cast<std::time_t>(std::atoll(epoch));
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void base_metadata(Report& report, const CommonOptions& opts, const LoadedCase& loaded) {
  report.metadata.emplace_back("tool", "gridburden");
  report.metadata.emplace_back("case_hash", loaded.hash);
  report.metadata.emplace_back("kkt_tol", format_double(opts.solver.kkt_tol));
  report.metadata.emplace_back("act_tol", format_double(opts.solver.act_tol));
  report.metadata.emplace_back("tau", format_double(opts.solver.tau));
  report.metadata.emplace_back("timestamp", timestamp_string());
}

// All tables are rendered in memory first and moved into place with
// temp-file renames, so a failed run never leaves partial outputs.
void emit_report(const Report& report, const CommonOptions& opts) {
  const auto files =
      write_report(report, opts.format == "json" ? ReportFormat::Json : ReportFormat::CsvBundle);
  const fs::path dir(opts.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string());
  for (const auto& [name, bytes] : files) {
    const fs::path target = dir / name;
    const fs::path tmp = dir / (name + ".tmp");
    {
      std::ofstream stream(tmp, std::ios::binary | std::ios::trunc);
      if (!stream) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
      stream << bytes;
    }
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot move " + tmp.string());
  }
}

Table solution_table_dispatch(const Network& network, const OpfSolution& sol) {
  Table table;
  table.columns = {"gen_index", "bus_id", "g_mw", "g_max_mw"};
  for (int j = 0; j < network.generator_count(); ++j) {
    table.rows.push_back({static_cast<std::int64_t>(j),
                          static_cast<std::int64_t>(network.generators[j].bus), sol.g(j),
                          network.generators[j].g_max});
  }
  return table;
}

Table solution_table_flows(const Network& network, const OpfSolution& sol) {
  Table table;
  table.columns = {"line_index", "from_bus", "to_bus", "flow_mw", "limit_mw"};
  for (int k = 0; k < network.line_count(); ++k) {
    table.rows.push_back({static_cast<std::int64_t>(k),
                          static_cast<std::int64_t>(network.lines[k].from_bus),
                          static_cast<std::int64_t>(network.lines[k].to_bus), sol.p(k),
                          network.lines[k].flow_limit});
  }
  return table;
}

Table solution_table_lmp(const std::vector<int>& bus_ids, const Eigen::VectorXd& lambda) {
  Table table;
  table.columns = {"bus_id", "lmp"};
  for (std::size_t i = 0; i < bus_ids.size(); ++i) {
    table.rows.push_back({static_cast<std::int64_t>(bus_ids[i]), lambda(i)});
  }
  return table;
}

Table solution_table_nu(const QpForm& qp, const OpfSolution& sol) {
  Table table;
  table.columns = {"constraint", "nu"};
  for (int k = 0; k < qp.num_lines; ++k) {
    table.rows.push_back({std::string("flow_") + std::to_string(k), sol.nu(k)});
  }
  table.rows.push_back({std::string("balance"), sol.nu(qp.num_lines)});
  return table;
}

Table solution_table_mu(const QpForm& qp, const OpfSolution& sol) {
  auto label = [&](int i) -> std::string {
    const int k = qp.num_gens;
    const int m = qp.num_lines;
    if (i < k) return "g_lower_" + std::to_string(i);
    if (i < 2 * k) return "g_upper_" + std::to_string(i - k);
    if (i < 2 * k + m) return "p_lower_" + std::to_string(i - 2 * k);
    return "p_upper_" + std::to_string(i - 2 * k - m);
  };
  Table table;
  table.columns = {"constraint", "mu", "active"};
  std::vector<bool> active(qp.num_ineq(), false);
  for (int i : sol.active_set) active[i] = true;
  for (int i = 0; i < qp.num_ineq(); ++i) {
    table.rows.push_back({label(i), sol.mu(i),
                          static_cast<std::int64_t>(active[i] ? 1 : 0)});
  }
  return table;
}

RetailConfig load_pricing(const CommonOptions& opts) {
  if (opts.pricing_path.empty()) return RetailConfig{};  // bare Model 0
  RetailConfig config = parse_retail_config(read_file(opts.pricing_path));
  if (!config.series_path.empty() && opts.series_path.empty()) {
    // series paths are resolved relative to the config file
    const fs::path base = fs::path(opts.pricing_path).parent_path();
    config.series_path = (base / config.series_path).string();
  }
  if (!opts.series_path.empty()) config.series_path = opts.series_path;
  return config;
}

int cmd_solve(const CommonOptions& opts) {
  const LoadedCase loaded = load_case(opts);
  const QpForm qp = assemble(loaded.prepared.network, loaded.theta, opts.solver.tau);
  const OpfSolution sol = solve(qp, opts.solver);
  for (const std::string& warning : sol.warnings) log_warn(warning);
  const Eigen::VectorXd lambda = lmps(sol.nu, qp.ptdf);

  Report report;
  base_metadata(report, opts, loaded);
  report.metadata.emplace_back("objective", format_double(sol.objective));
  report.metadata.emplace_back("kkt_residual", format_double(sol.kkt_residual));
  report.metadata.emplace_back("iterations", std::to_string(sol.iterations));
  report.tables.emplace_back("dispatch", solution_table_dispatch(loaded.prepared.network, sol));
  report.tables.emplace_back("flows", solution_table_flows(loaded.prepared.network, sol));
  report.tables.emplace_back("lmp", solution_table_lmp(loaded.bus_ids, lambda));
  report.tables.emplace_back("duals_nu", solution_table_nu(qp, sol));
  report.tables.emplace_back("duals_mu", solution_table_mu(qp, sol));
  emit_report(report, opts);
  std::cout << "solved: objective " << format_double(sol.objective) << ", kkt residual "
            << format_double(sol.kkt_residual) << "\n";
  return 0;
}

int cmd_lmb(const CommonOptions& opts) {
  const LoadedCase loaded = load_case(opts);
  const Network& network = loaded.prepared.network;

  if (opts.income_path.empty()) {
    throw Error(ErrorKind::IoError, "--income is required for lmb");
  }
  const std::string income_text = read_file(opts.income_path);
  const IncomeTable income = parse_income(income_text);
  const RetailConfig pricing = load_pricing(opts);
  if (pricing.model != 0) {
    throw Error(ErrorKind::ModelMismatch, "lmb requires a Model 0 pricing config");
  }

  const QpForm qp = assemble(network, loaded.theta, opts.solver.tau);
  const OpfSolution sol = solve(qp, opts.solver);
  for (const std::string& warning : sol.warnings) log_warn(warning);
  const Eigen::VectorXd lambda = lmps(sol.nu, qp.ptdf);
  const RetailPrices prices = retail_model0(lambda, pricing, loaded.theta.d, loaded.bus_ids);
  for (const std::string& warning : prices.warnings) log_warn(warning);

  const KktJacobian jac = kkt_jacobian(qp, sol, opts.solver.kkt_tol);
  const RegularityDiagnostics diag = check_regularity(jac, qp, sol);
  if (!diag.is_strictly_complementary) {
    log_warn("solution is not strictly complementary (min gap " +
             format_double(diag.min_complementarity_gap) + ")");
  }

  Report report;
  base_metadata(report, opts, loaded);
  report.metadata.emplace_back("income_hash", content_hash(income_text));
  report.metadata.emplace_back("income_period", income.period);

  std::optional<SolutionJacobian> sens;
  try {
    sens = solution_jacobian(jac, qp, sol);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::SingularJacobian) throw;
    // Prop.-1 hypothesis failed: withhold the LMB matrix, still report why.
    Table diag_table;
    diag_table.columns = {"key", "value"};
    diag_table.rows.push_back({std::string("min_complementarity_gap"),
                               format_double(diag.min_complementarity_gap)});
    diag_table.rows.push_back({std::string("is_strictly_complementary"),
                               std::string(diag.is_strictly_complementary ? "true" : "false")});
    diag_table.rows.push_back({std::string("jacobian_singular"), std::string("true")});
    diag_table.rows.push_back(
        {std::string("condition_estimate"), format_double(diag.condition_estimate)});
    diag_table.rows.push_back({std::string("error"), std::string(err.what())});
    report.tables.emplace_back("diagnostics", std::move(diag_table));
    emit_report(report, opts);
    log_error(err.what());
    return kExitSingular;
  }

  Eigen::VectorXd s = income_vector(network, income);
  LmbResult lmb =
      lmb_matrix(network, loaded.theta, s, sol, *sens, qp, pricing, diag);
  if (opts.lmb_per_mw_year) {
    // 1 MW sustained over a year is 8760 MWh; only meaningful for annual incomes.
    if (income.period == "annual") {
      lmb.lmb *= 8760.0;
      lmb.gradient *= 8760.0;
      lmb.to_others *= 8760.0;
      report.metadata.emplace_back("lmb_units", "burden per MW-year");
    } else {
      log_warn("--lmb-per-mw-year needs an annual income period; keeping per-MWh units");
      report.metadata.emplace_back("lmb_units", "burden per MWh");
    }
  } else {
    report.metadata.emplace_back("lmb_units", "burden per MWh");
  }

  const BurdenVector burden =
      static_burden(loaded.theta.d, s, prices.pi.col(0), households_vector(network, income));
  for (const std::string& warning : burden.warnings) log_warn(warning);

  Report tables = burden_report(network, loaded.theta, income, lambda, prices, burden, lmb);
  for (auto& [name, table] : tables.tables) report.tables.emplace_back(name, std::move(table));
  emit_report(report, opts);
  std::cout << "lmb: " << network.bus_count() << " buses, min complementarity gap "
            << format_double(diag.min_complementarity_gap) << "\n";
  return 0;
}

int cmd_check(const CommonOptions& opts) {
  const LoadedCase loaded = load_case(opts);
  const Network& network = loaded.prepared.network;

  const QpForm qp = assemble(network, loaded.theta, opts.solver.tau);
  const OpfSolution sol = solve(qp, opts.solver);
  const KktJacobian jac = kkt_jacobian(qp, sol, opts.solver.kkt_tol);
  const SolutionJacobian sens = solution_jacobian(jac, qp, sol);

  const FdJacobian fd = fd_oracle(network, loaded.theta, opts.fd_step, opts.solver);
  double nu_dev = 0.0;
  int flagged = 0;
  for (int i = 0; i < static_cast<int>(fd.d_changed.size()); ++i) {
    if (fd.d_changed[i]) {
      ++flagged;
      continue;
    }
    nu_dev = std::max(nu_dev,
                      (sens.dnu_dd.col(i) - fd.jac.dnu_dd.col(i)).lpNorm<Eigen::Infinity>());
  }
  const double nu_scale = std::max(1.0, sens.dnu_dd.lpNorm<Eigen::Infinity>());
  const double nu_rel = nu_dev / nu_scale;
  std::cout << "dnu_dd: max_abs_dev=" << format_double(nu_dev)
            << " rel_dev=" << format_double(nu_rel) << " flagged_columns=" << flagged << "\n";

  bool lmb_ok = true;
  if (!opts.income_path.empty()) {
    const IncomeTable income = parse_income(read_file(opts.income_path));
    const RetailConfig pricing = load_pricing(opts);
    const Eigen::VectorXd s = income_vector(network, income);
    const LmbFdCheck check =
        lmb_fd_check(network, loaded.theta, s, pricing, opts.fd_step, opts.solver);
    int lmb_flagged = 0;
    for (bool f : check.column_flagged) lmb_flagged += f ? 1 : 0;
    std::cout << "lmb: max_abs_dev=" << format_double(check.max_abs_deviation)
              << " rel_dev=" << format_double(check.max_rel_deviation)
              << " flagged_columns=" << lmb_flagged << "\n";
    lmb_ok = check.max_rel_deviation <= opts.tol;
  }

  const bool pass = nu_rel <= opts.tol && lmb_ok;
  std::cout << (pass ? "PASS" : "FAIL") << " (tol=" << format_double(opts.tol) << ")\n";
  return pass ? 0 : kExitFailure;
}

int cmd_price(const CommonOptions& opts) {
  const RetailConfig pricing =
      opts.pricing_path.empty() ? RetailConfig{} : load_pricing(opts);

  Report report;
  Table table;
  if (pricing.model == 0) {
    const LoadedCase loaded = load_case(opts);
    const QpForm qp = assemble(loaded.prepared.network, loaded.theta, opts.solver.tau);
    const OpfSolution sol = solve(qp, opts.solver);
    const Eigen::VectorXd lambda = lmps(sol.nu, qp.ptdf);
    const RetailPrices prices = retail_model0(lambda, pricing, loaded.theta.d, loaded.bus_ids);
    for (const std::string& warning : prices.warnings) log_warn(warning);
    base_metadata(report, opts, loaded);
    report.metadata.emplace_back("model", "0");
    table.columns = {"bus_id", "pi"};
    for (std::size_t i = 0; i < prices.bus_ids.size(); ++i) {
      table.rows.push_back({static_cast<std::int64_t>(prices.bus_ids[i]), prices.pi(i, 0)});
    }
  } else {
    if (pricing.series_path.empty()) {
      throw Error(ErrorKind::MissingSeries,
                  "Models 1 and 2 need a time series ('series' in the pricing config)");
    }
    const TimeSeriesTable series = parse_timeseries(read_file(pricing.series_path));
    const RetailPrices prices =
        pricing.model == 1 ? retail_model1(series, pricing) : retail_model2(series);
    report.metadata.emplace_back("tool", "gridburden");
    report.metadata.emplace_back("model", std::to_string(pricing.model));
    report.metadata.emplace_back("series_hash", content_hash(read_file(pricing.series_path)));
    report.metadata.emplace_back("timestamp", timestamp_string());
    if (pricing.model == 1) {
      table.columns = {"bus_id", "pi"};
      for (std::size_t i = 0; i < prices.bus_ids.size(); ++i) {
        table.rows.push_back({static_cast<std::int64_t>(prices.bus_ids[i]), prices.pi(i, 0)});
      }
    } else {
      table.columns = {"bus_id", "t", "pi"};
      for (std::size_t i = 0; i < prices.bus_ids.size(); ++i) {
        for (std::size_t t = 0; t < prices.timesteps.size(); ++t) {
          table.rows.push_back({static_cast<std::int64_t>(prices.bus_ids[i]),
                                static_cast<std::int64_t>(prices.timesteps[t]),
                                prices.pi(i, t)});
        }
      }
    }
  }
  report.tables.emplace_back("retail_prices", std::move(table));
  emit_report(report, opts);
  std::cout << "priced " << report.tables.back().second.rows.size() << " rows under model "
            << pricing.model << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC OPF solve, LMP sensitivity and locational marginal burden analysis"};
  app.require_subcommand(1);

  CommonOptions opts;

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve the DC OPF and write dual tables");
  add_case_flags(solve_cmd, opts);
  add_output_flags(solve_cmd, opts);
  add_solver_flags(solve_cmd, opts);

  CLI::App* lmb_cmd =
      app.add_subcommand("lmb", "solve, differentiate the duals and report energy burden");
  add_case_flags(lmb_cmd, opts);
  add_output_flags(lmb_cmd, opts);
  add_solver_flags(lmb_cmd, opts);
  lmb_cmd->add_option("--income", opts.income_path, "income CSV")->required();
  lmb_cmd->add_option("--pricing", opts.pricing_path, "pricing config JSON");
  lmb_cmd->add_flag("--lmb-per-mw-year", opts.lmb_per_mw_year,
                    "rescale LMB from per-MWh to per-MW-year (annual income period)");

  CLI::App* check_cmd = app.add_subcommand(
      "check", "verify analytic sensitivities against the finite-difference oracle");
  add_case_flags(check_cmd, opts);
  add_solver_flags(check_cmd, opts);
  check_cmd->add_option("--income", opts.income_path, "income CSV (enables the LMB check)");
  check_cmd->add_option("--pricing", opts.pricing_path, "pricing config JSON");
  check_cmd->add_option("--fd-step", opts.fd_step, "central-difference step")
      ->capture_default_str();
  check_cmd->add_option("--tol", opts.tol, "max allowed relative deviation")
      ->capture_default_str();

  CLI::App* price_cmd = app.add_subcommand("price", "compute retail prices (Models 0/1/2)");
  price_cmd->add_option("--case", opts.case_path, "case file (Model 0)");
  price_cmd->add_option("--case-format", opts.case_format, "matpower | json | auto")
      ->check(CLI::IsMember({"matpower", "json", "auto"}))
      ->capture_default_str();
  add_output_flags(price_cmd, opts);
  add_solver_flags(price_cmd, opts);
  price_cmd->add_option("--pricing", opts.pricing_path, "pricing config JSON");
  price_cmd->add_option("--series", opts.series_path, "time-series CSV (Models 1/2)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) return cmd_solve(opts);
    if (lmb_cmd->parsed()) return cmd_lmb(opts);
    if (check_cmd->parsed()) return cmd_check(opts);
    if (price_cmd->parsed()) return cmd_price(opts);
  } catch (const Error& err) {
    log_error(err.what());
    return exit_code_for(err);
  } catch (const std::exception& err) {
    log_error(err.what());
    return kExitFailure;
  }
  return kExitFailure;
}
