#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gridburden/network.hpp"

namespace gridburden {

enum class CaseFormat { NativeJson, MatpowerSubset };
enum class ReportFormat { CsvBundle, Json };

// A parsed case: the network plus the nodal demand the file carries
// (MATPOWER PD column; optional per-bus demand_mw in the native schema).
struct CaseBundle {
  Network network;
  Eigen::VectorXd demand;  // MW, aligned with network.buses
  double mva_base = 100.0;
  std::vector<std::string> warnings;
};

struct IncomeRecord {
  int bus_id = 0;
  double income = 0.0;        // $ per accounting period, > 0
  std::int64_t households = 0;
};

struct IncomeTable {
  std::vector<IncomeRecord> records;  // ascending bus id
  std::string period = "unspecified";

  const IncomeRecord* find(int bus_id) const;
};

struct SeriesRecord {
  int bus_id = 0;
  int timestep = 0;
  double demand = 0.0;  // MWh over the interval
  double omega = 0.0;   // $ (Model 1) or $/MWh rate (Model 2)
  std::optional<double> lmp;
};

struct TimeSeriesTable {
  std::vector<SeriesRecord> records;  // grouped by bus, timesteps contiguous

  std::vector<int> bus_ids() const;
  std::vector<int> timesteps_for(int bus_id) const;
};

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

// Run output: ordered metadata plus named tables. Serialization is
// deterministic; floats are written with 12 significant digits.
struct Report {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::pair<std::string, Table>> tables;

  Table* find_table(const std::string& name);
  const Table* find_table(const std::string& name) const;
};

CaseBundle parse_case(std::string_view text, CaseFormat format);
std::string write_case_json(const CaseBundle& bundle);

IncomeTable parse_income(std::string_view csv);
std::string write_income_csv(const IncomeTable& table);

TimeSeriesTable parse_timeseries(std::string_view csv);

// csv-bundle: one "<table>.csv" per table plus "manifest.json";
// json: a single "report.json". Returns file name -> bytes.
std::map<std::string, std::string> write_report(const Report& report, ReportFormat format);
Report parse_report_json(std::string_view text);

// "%.12g" rendering shared by every writer.
std::string format_double(double value);
// FNV-1a, for the run metadata's input hashes.
std::string content_hash(std::string_view bytes);

// Normalizes and validates a parsed case, realigning its demand vector with
// the canonical (id-sorted) bus order.
struct PreparedCase {
  Network network;
  Eigen::VectorXd demand;  // MW, canonical bus order
  double mva_base = 100.0;
  std::vector<std::string> warnings;
};
PreparedCase prepare_case(const CaseBundle& bundle);

// Per-bus joins against the canonical bus order; NaN (incomes) or 0
// (households) where the table has no record for a bus.
Eigen::VectorXd income_vector(const Network& network, const IncomeTable& table);
Eigen::VectorXd households_vector(const Network& network, const IncomeTable& table);

}  // namespace gridburden
