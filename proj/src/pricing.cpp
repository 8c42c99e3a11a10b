#include "gridburden/pricing.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "gridburden/case_io.hpp"
#include "gridburden/pricing_config.hpp"

namespace gridburden {

Eigen::MatrixXd lmp_map(const Eigen::MatrixXd& ptdf) {
  const int m = static_cast<int>(ptdf.rows());
  const int n = static_cast<int>(ptdf.cols());
  Eigen::MatrixXd map(n, m + 1);
  map.leftCols(m) = ptdf.transpose();
  map.col(m).setOnes();
  return map;
}

Eigen::VectorXd lmps(const Eigen::VectorXd& nu, const Eigen::MatrixXd& ptdf) {
  if (nu.size() != ptdf.rows() + 1) {
    throw Error(ErrorKind::DimensionMismatch,
                "dual vector has length " + std::to_string(nu.size()) + ", expected " +
                    std::to_string(ptdf.rows() + 1));
  }
  return -(lmp_map(ptdf) * nu);
}

double RetailConfig::omega_for(int bus_id) const {
  auto it = omega_by_bus.find(bus_id);
  return it == omega_by_bus.end() ? omega_default : it->second;
}

double RetailConfig::phi_for(int bus_id) const {
  auto it = phi_by_bus.find(bus_id);
  return it == phi_by_bus.end() ? phi_default : it->second;
}

RetailPrices retail_model0(const Eigen::VectorXd& lmp, const RetailConfig& config,
                           const Eigen::VectorXd& demand, const std::vector<int>& bus_ids) {
  if (lmp.size() != demand.size() || lmp.size() != static_cast<Eigen::Index>(bus_ids.size())) {
    throw Error(ErrorKind::DimensionMismatch, "retail_model0: lmp/demand/bus sizes differ");
  }
  RetailPrices out;
  out.model = 0;
  out.bus_ids = bus_ids;
  out.timesteps = {0};
  out.pi.resize(lmp.size(), 1);
  for (Eigen::Index i = 0; i < lmp.size(); ++i) {
    out.pi(i, 0) = lmp(i) + config.omega_for(bus_ids[i]) + config.phi_for(bus_ids[i]) * demand(i);
    if (lmp(i) <= 0.0) {
      out.warnings.push_back("bus " + std::to_string(bus_ids[i]) + " has non-positive LMP " +
                             format_double(lmp(i)));
    }
  }
  return out;
}

namespace {

struct NodeAccumulator {
  double cost = 0.0;    // sum_t d(t) lambda(t) + omega(t)
  double demand = 0.0;  // sum_t d(t)
};

// Shared Model-1 ingestion: per-bus time sums of purchase-plus-operating cost
// and of demand, requiring the lmp column.
std::map<int, NodeAccumulator> accumulate(const TimeSeriesTable& series) {
  std::map<int, NodeAccumulator> acc;
  for (const SeriesRecord& rec : series.records) {
    if (!rec.lmp.has_value()) {
      throw Error(ErrorKind::MissingSeries,
                  "bus " + std::to_string(rec.bus_id) + " t=" + std::to_string(rec.timestep) +
                      " has no lmp value");
    }
    NodeAccumulator& a = acc[rec.bus_id];
    a.cost += rec.demand * (*rec.lmp) + rec.omega;
    a.demand += rec.demand;
  }
  return acc;
}

}  // namespace

RetailPrices retail_model1(const TimeSeriesTable& series, const RetailConfig& config) {
  if (series.records.empty()) throw Error(ErrorKind::MissingSeries, "empty time series");
  {
    const std::vector<int> buses = series.bus_ids();
    const std::vector<int> horizon = series.timesteps_for(buses.front());
    for (int bus : buses) {
      if (series.timesteps_for(bus) != horizon) {
        throw Error(ErrorKind::MisalignedSeries,
                    "bus " + std::to_string(bus) + " does not cover the common horizon");
      }
    }
  }
  const std::map<int, NodeAccumulator> acc = accumulate(series);

  RetailPrices out;
  out.model = 1;
  out.timesteps = {0};
  for (const auto& [bus, a] : acc) out.bus_ids.push_back(bus);
  out.pi.resize(out.bus_ids.size(), 1);

  if (config.averaging == Averaging::PerNode) {
    for (std::size_t i = 0; i < out.bus_ids.size(); ++i) {
      const NodeAccumulator& a = acc.at(out.bus_ids[i]);
      if (a.demand <= 0.0) {
        throw Error(ErrorKind::ZeroDenominator,
                    "bus " + std::to_string(out.bus_ids[i]) + " has zero total demand");
      }
      out.pi(i, 0) = a.cost / a.demand;
    }
    return out;
  }

  // Per-region: one uniform rate per utility region; the regions must
  // partition the set of buses present in the series.
  std::set<int> covered;
  for (const auto& region : config.regions) {
    double cost = 0.0, demand = 0.0;
    for (int bus : region) {
      if (!covered.insert(bus).second) {
        throw Error(ErrorKind::InvalidInput,
                    "bus " + std::to_string(bus) + " appears in more than one region");
      }
      auto it = acc.find(bus);
      if (it == acc.end()) {
        throw Error(ErrorKind::MissingSeries,
                    "region bus " + std::to_string(bus) + " has no series records");
      }
      cost += it->second.cost;
      demand += it->second.demand;
    }
    if (demand <= 0.0) throw Error(ErrorKind::ZeroDenominator, "region has zero total demand");
    const double price = cost / demand;
    for (int bus : region) {
      const auto pos = std::lower_bound(out.bus_ids.begin(), out.bus_ids.end(), bus);
      out.pi(pos - out.bus_ids.begin(), 0) = price;
    }
  }
  for (int bus : out.bus_ids) {
    if (!covered.count(bus)) {
      throw Error(ErrorKind::InvalidInput,
                  "bus " + std::to_string(bus) + " is not assigned to any region");
    }
  }
  return out;
}

RetailConfig parse_retail_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "pricing config must be an object");

  RetailConfig config;
  config.model = doc.value("model", 0);
  if (config.model < 0 || config.model > 2) {
    throw Error(ErrorKind::ParseError, "model must be 0, 1 or 2");
  }

  auto read_rates = [](const nlohmann::json& node, const char* key, double& scalar,
                       std::map<int, double>& by_bus) {
    if (node.is_number()) {
      scalar = node.get<double>();
    } else if (node.is_object()) {
      for (const auto& [bus, value] : node.items()) {
        if (!value.is_number()) {
          throw Error(ErrorKind::ParseError, std::string(key) + " entries must be numbers");
        }
        by_bus[std::stoi(bus)] = value.get<double>();
      }
    } else {
      throw Error(ErrorKind::ParseError,
                  std::string(key) + " must be a number or a bus-id map");
    }
    auto check = [&](double v) {
      if (v < 0.0) {
        throw Error(ErrorKind::ParseError, std::string(key) + " entries must be >= 0");
      }
    };
    check(scalar);
    for (const auto& [bus, v] : by_bus) check(v);
  };
  if (doc.contains("omega")) {
    read_rates(doc["omega"], "omega", config.omega_default, config.omega_by_bus);
  }
  if (doc.contains("phi")) {
    read_rates(doc["phi"], "phi", config.phi_default, config.phi_by_bus);
  }

  for (const auto& region : doc.value("regions", nlohmann::json::array())) {
    std::vector<int> buses;
    for (const auto& bus : region) {
      if (!bus.is_number_integer()) {
        throw Error(ErrorKind::ParseError, "regions must contain integer bus ids");
      }
      buses.push_back(bus.get<int>());
    }
    config.regions.push_back(std::move(buses));
  }

  const std::string averaging = doc.value("averaging", "per-node");
  if (averaging == "per-node") {
    config.averaging = Averaging::PerNode;
  } else if (averaging == "per-region") {
    config.averaging = Averaging::PerRegion;
  } else {
    throw Error(ErrorKind::ParseError, "averaging must be 'per-node' or 'per-region'");
  }

  config.series_path = doc.value("series", std::string());
  return config;
}

RetailPrices retail_model2(const TimeSeriesTable& series) {
  if (series.records.empty()) throw Error(ErrorKind::MissingSeries, "empty time series");

  const std::vector<int> buses = series.bus_ids();
  const std::vector<int> steps = series.timesteps_for(buses.front());
  for (int bus : buses) {
    if (series.timesteps_for(bus) != steps) {
      throw Error(ErrorKind::MisalignedSeries,
                  "bus " + std::to_string(bus) + " timesteps differ from bus " +
                      std::to_string(buses.front()));
    }
  }

  RetailPrices out;
  out.model = 2;
  out.bus_ids = buses;
  out.timesteps = steps;
  out.pi.resize(buses.size(), steps.size());

  std::map<std::pair<int, int>, const SeriesRecord*> index;
  for (const SeriesRecord& rec : series.records) index[{rec.bus_id, rec.timestep}] = &rec;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const SeriesRecord* rec = index.at({buses[i], steps[t]});
      if (!rec->lmp.has_value()) {
        throw Error(ErrorKind::MissingSeries,
                    "bus " + std::to_string(buses[i]) + " t=" + std::to_string(steps[t]) +
                        " has no lmp value");
      }
      out.pi(i, t) = *rec->lmp + rec->omega;
    }
  }
  return out;
}

}  // namespace gridburden
