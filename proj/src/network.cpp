#include "gridburden/network.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <Eigen/Dense>

namespace gridburden {

int Network::bus_index(int bus_id) const {
  for (int i = 0; i < bus_count(); ++i) {
    if (buses[i].id == bus_id) return i;
  }
  throw Error(ErrorKind::InvalidNetwork, "unknown bus id " + std::to_string(bus_id));
}

int Network::slack_index() const {
  for (int i = 0; i < bus_count(); ++i) {
    if (buses[i].is_slack) return i;
  }
  throw Error(ErrorKind::InvalidNetwork, "no slack bus marked");
}

namespace {

// Union-find connectivity over bus positions.
bool is_connected(const Network& network) {
  const int n = network.bus_count();
  if (n <= 1) return true;
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Line& line : network.lines) {
    const int a = find(network.bus_index(line.from_bus));
    const int b = find(network.bus_index(line.to_bus));
    if (a != b) parent[a] = b;
  }
  const int root = find(0);
  for (int i = 1; i < n; ++i) {
    if (find(i) != root) return false;
  }
  return true;
}

}  // namespace

void Network::validate() const {
  if (buses.empty()) throw Error(ErrorKind::InvalidNetwork, "network has no buses");
  if (generators.empty()) throw Error(ErrorKind::InvalidNetwork, "network has no generators");

  std::set<int> ids;
  int slack_count = 0;
  for (const Bus& bus : buses) {
    if (!ids.insert(bus.id).second) {
      throw Error(ErrorKind::InvalidNetwork, "duplicate bus id " + std::to_string(bus.id));
    }
    if (bus.is_slack) ++slack_count;
  }
  if (slack_count != 1) {
    throw Error(ErrorKind::InvalidNetwork,
                "expected exactly one slack bus, found " + std::to_string(slack_count));
  }

  for (const Line& line : lines) {
    if (line.from_bus == line.to_bus) {
      throw Error(ErrorKind::InvalidNetwork,
                  "line connects bus " + std::to_string(line.from_bus) + " to itself");
    }
    if (!ids.count(line.from_bus) || !ids.count(line.to_bus)) {
      throw Error(ErrorKind::InvalidNetwork, "line references unknown bus");
    }
    if (!(line.susceptance > 0.0)) {
      throw Error(ErrorKind::InvalidNetwork, "line susceptance must be > 0");
    }
    if (!(line.flow_limit > 0.0)) {
      throw Error(ErrorKind::InvalidNetwork, "line flow limit must be > 0");
    }
  }

  std::set<int> gen_buses;
  for (const Generator& gen : generators) {
    if (!ids.count(gen.bus)) {
      throw Error(ErrorKind::InvalidNetwork,
                  "generator references unknown bus " + std::to_string(gen.bus));
    }
    if (gen.alpha < 0.0) throw Error(ErrorKind::InvalidNetwork, "generator alpha must be >= 0");
    if (!(gen.g_max > 0.0)) throw Error(ErrorKind::InvalidNetwork, "generator g_max must be > 0");
    if (!gen_buses.insert(gen.bus).second) {
      throw Error(ErrorKind::InvalidNetwork,
                  "more than one generator at bus " + std::to_string(gen.bus) +
                      " (run normalize first)");
    }
  }

  if (!is_connected(*this)) {
    throw Error(ErrorKind::DisconnectedNetwork, "network graph is not connected");
  }
}

Network normalize(Network raw) {
  if (raw.buses.empty()) throw Error(ErrorKind::InvalidNetwork, "network has no buses");

  std::sort(raw.buses.begin(), raw.buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < raw.buses.size(); ++i) {
    if (raw.buses[i].id == raw.buses[i - 1].id) {
      throw Error(ErrorKind::InvalidNetwork,
                  "duplicate bus id " + std::to_string(raw.buses[i].id));
    }
  }

  const int slack_count = static_cast<int>(
      std::count_if(raw.buses.begin(), raw.buses.end(), [](const Bus& b) { return b.is_slack; }));
  if (slack_count == 0) {
    raw.buses.front().is_slack = true;  // lowest id: deterministic fallback
  } else if (slack_count > 1) {
    throw Error(ErrorKind::InvalidNetwork, "more than one slack bus marked");
  }

  // Merge co-located generators sharing the same cost coefficients.
  std::map<int, Generator> merged;
  for (const Generator& gen : raw.generators) {
    auto [it, inserted] = merged.emplace(gen.bus, gen);
    if (!inserted) {
      if (it->second.alpha != gen.alpha || it->second.beta != gen.beta) {
        throw Error(ErrorKind::ConflictingColocatedGenerators,
                    "generators at bus " + std::to_string(gen.bus) +
                        " have different cost coefficients");
      }
      it->second.g_max += gen.g_max;
    }
  }
  raw.generators.clear();
  for (const auto& [bus, gen] : merged) raw.generators.push_back(gen);

  return raw;
}

Eigen::MatrixXd line_incidence(const Network& network) {
  const int m = network.line_count();
  const int n = network.bus_count();
  Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(m, n);
  for (int k = 0; k < m; ++k) {
    incidence(k, network.bus_index(network.lines[k].from_bus)) = 1.0;
    incidence(k, network.bus_index(network.lines[k].to_bus)) = -1.0;
  }
  return incidence;
}

Eigen::MatrixXd ptdf(const Network& network) {
  const int n = network.bus_count();
  const int m = network.line_count();
  if (!is_connected(network)) {
    throw Error(ErrorKind::DisconnectedNetwork, "PTDF requires a connected network");
  }
  const int slack = network.slack_index();

  if (m == 0) {
    return Eigen::MatrixXd::Zero(0, n);  // single-bus network
  }

  const Eigen::MatrixXd incidence = line_incidence(network);
  Eigen::VectorXd b(m);
  for (int k = 0; k < m; ++k) b(k) = network.lines[k].susceptance;

  const Eigen::MatrixXd bbus = incidence.transpose() * b.asDiagonal() * incidence;

  // Drop the slack row/column.
  std::vector<int> keep;
  keep.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    if (i != slack) keep.push_back(i);
  }
  Eigen::MatrixXd bbus_red(n - 1, n - 1);
  Eigen::MatrixXd incidence_red(m, n - 1);
  for (int i = 0; i < n - 1; ++i) {
    incidence_red.col(i) = incidence.col(keep[i]);
    for (int j = 0; j < n - 1; ++j) bbus_red(i, j) = bbus(keep[i], keep[j]);
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bbus_red);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14) || !std::isfinite(rcond)) {
    throw Error(ErrorKind::SingularBusMatrix, "reduced bus susceptance matrix is singular");
  }

  // F_red = diag(b) * C_red * inv(Bbus_red); solve on the transpose.
  const Eigen::MatrixXd solved = lu.solve(incidence_red.transpose());  // (n-1) x m
  const Eigen::MatrixXd f_red = b.asDiagonal() * solved.transpose();   // m x (n-1)

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m, n);
  for (int i = 0; i < n - 1; ++i) f.col(keep[i]) = f_red.col(i);
  return f;
}

Eigen::MatrixXd generator_incidence(const Network& network) {
  const int n = network.bus_count();
  const int k = network.generator_count();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, k);
  for (int j = 0; j < k; ++j) {
    b(network.bus_index(network.generators[j].bus), j) = 1.0;
  }
  return b;
}

}  // namespace gridburden
