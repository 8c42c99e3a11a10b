#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridburden/errors.hpp"

namespace gridburden {

struct TimeSeriesTable;  // case_io.hpp

// LMP solution map: lambda = -[F' 1] nu, where nu stacks the M flow duals
// followed by the power-balance dual. The balance dual prices every bus
// uniformly; flow duals differentiate buses through F'.
Eigen::MatrixXd lmp_map(const Eigen::MatrixXd& ptdf);  // [F' 1], N x (M+1)
Eigen::VectorXd lmps(const Eigen::VectorXd& nu, const Eigen::MatrixXd& ptdf);

enum class Averaging { PerNode, PerRegion };

// Retail price configuration for Models 0 (wholesale pass-through),
// 1 (utility time/region averages) and 2 (per-node price series).
struct RetailConfig {
  int model = 0;
  double omega_default = 0.0;             // scalar operating cost, $/MWh
  std::map<int, double> omega_by_bus;     // overrides per external bus id
  double phi_default = 0.0;               // diagonal profit rate
  std::map<int, double> phi_by_bus;
  std::vector<std::vector<int>> regions;  // external bus ids, used by Model 1
  Averaging averaging = Averaging::PerNode;
  std::string series_path;                // input series for Models 1/2

  double omega_for(int bus_id) const;
  double phi_for(int bus_id) const;
};

struct RetailPrices {
  int model = 0;
  std::vector<int> bus_ids;       // row labels (external ids)
  std::vector<int> timesteps;     // column labels; single 0 for Models 0/1
  Eigen::MatrixXd pi;             // buses x timesteps, $/MWh
  std::vector<std::string> warnings;
};

// Model 0: pi = lambda + omega + phi .* d.
RetailPrices retail_model0(const Eigen::VectorXd& lmp, const RetailConfig& config,
                           const Eigen::VectorXd& demand, const std::vector<int>& bus_ids);

// Model 1: time-averaged utility rate
//   per node:   pi_k = sum_t (d_k(t) lambda_k(t) + omega_k(t)) / sum_t d_k(t)
//   per region: one rate per utility region, numerator and denominator summed
//               over the region's buses as well as time.
RetailPrices retail_model1(const TimeSeriesTable& series, const RetailConfig& config);

// Model 2: pi_k(t) = lambda_k(t) + omega_k(t), elementwise per timestep.
RetailPrices retail_model2(const TimeSeriesTable& series);

}  // namespace gridburden
