#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridburden/errors.hpp"

namespace gridburden {

// Transmission network description. Buses keep the external ids found in the
// case file (income tables and reports join on those); all matrix-facing code
// uses the bus *position* in Network::buses, which normalize() makes
// deterministic (ascending id order).
struct Bus {
  int id = 0;            // external id, unique
  std::string name;
  bool is_slack = false;
};

struct Line {
  int from_bus = 0;      // external bus ids; from_bus != to_bus
  int to_bus = 0;
  double susceptance = 0.0;  // MW per radian, > 0
  double flow_limit = 0.0;   // MW, > 0
};

struct Generator {
  int bus = 0;
  double alpha = 0.0;    // $/MW^2 h, >= 0
  double beta = 0.0;     // $/MWh
  double g_max = 0.0;    // MW, > 0
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int line_count() const { return static_cast<int>(lines.size()); }
  int generator_count() const { return static_cast<int>(generators.size()); }

  // Position of the bus with the given external id; throws InvalidNetwork if absent.
  int bus_index(int bus_id) const;
  // Position of the slack bus; throws InvalidNetwork if none is marked.
  int slack_index() const;

  // Structural invariants: unique bus ids, exactly one slack, valid line and
  // generator references, positive susceptances/limits/capacities, at most one
  // generator per bus, connected graph. Throws on violation.
  void validate() const;
};

// Canonicalizes a parsed network:
//  - marks the lowest-id bus as slack when none is marked,
//  - merges co-located generators with identical (alpha, beta) by summing
//    their capacities; co-located generators with different cost coefficients
//    are rejected (ConflictingColocatedGenerators),
//  - sorts buses and generators into ascending id order.
// Idempotent: normalize(normalize(x)) == normalize(x).
Network normalize(Network raw);

// Signed line-bus incidence matrix C (M x N): C(k, from) = +1, C(k, to) = -1.
Eigen::MatrixXd line_incidence(const Network& network);

// Power transfer distribution factor matrix F (M x N). Row k gives the MW
// flow on line k per 1 MW injected at each bus and withdrawn at the slack;
// the slack column is identically zero.
//
// Computed as F = diag(b) * C * inv(Bbus_reduced) with Bbus = C' diag(b) C
// and the slack row/column removed, then re-augmented with a zero column.
Eigen::MatrixXd ptdf(const Network& network);

// Generator-to-bus incidence B (N x K): B(i, j) = 1 iff generator j sits at
// the bus in position i. Every column sums to exactly 1.
Eigen::MatrixXd generator_incidence(const Network& network);

}  // namespace gridburden
