#include "gridburden/case_io.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gridburden {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
  return buf;
}

namespace {

[[noreturn]] void parse_fail(int line, int column, const std::string& what) {
  throw Error(ErrorKind::ParseError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

// Snaps a double to its 12-significant-digit decimal value so JSON output is
// stable across write -> parse -> write cycles.
double snap(double value) {
  return std::strtod(format_double(value).c_str(), nullptr);
}

double require_number(const ordered_json& node, const char* key) {
  if (!node.contains(key) || !node[key].is_number()) {
    throw Error(ErrorKind::ParseError, std::string("missing or non-numeric field '") + key + "'");
  }
  return node[key].get<double>();
}

int require_int(const ordered_json& node, const char* key) {
  if (!node.contains(key) || !node[key].is_number_integer()) {
    throw Error(ErrorKind::ParseError, std::string("missing or non-integer field '") + key + "'");
  }
  return node[key].get<int>();
}

CaseBundle parse_case_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "top-level value must be an object");

  CaseBundle bundle;
  bundle.mva_base = doc.contains("mva_base") ? require_number(doc, "mva_base") : 100.0;
  if (!(bundle.mva_base > 0.0)) throw Error(ErrorKind::ParseError, "mva_base must be > 0");

  if (!doc.contains("buses") || !doc["buses"].is_array()) {
    throw Error(ErrorKind::ParseError, "missing 'buses' array");
  }
  std::vector<double> demand;
  for (const auto& node : doc["buses"]) {
    Bus bus;
    bus.id = require_int(node, "id");
    bus.name = node.value("name", std::string());
    bus.is_slack = node.value("slack", false);
    bundle.network.buses.push_back(bus);
    demand.push_back(node.contains("demand_mw") ? require_number(node, "demand_mw") : 0.0);
  }
  for (const auto& node : doc.value("lines", ordered_json::array())) {
    Line line;
    line.from_bus = require_int(node, "from");
    line.to_bus = require_int(node, "to");
    line.susceptance = require_number(node, "susceptance") * bundle.mva_base;  // p.u. -> MW/rad
    line.flow_limit = require_number(node, "limit_mw");
    bundle.network.lines.push_back(line);
  }
  for (const auto& node : doc.value("generators", ordered_json::array())) {
    Generator gen;
    gen.bus = require_int(node, "bus");
    gen.alpha = require_number(node, "alpha");
    gen.beta = require_number(node, "beta");
    gen.g_max = require_number(node, "gmax_mw");
    bundle.network.generators.push_back(gen);
  }

  bundle.demand = Eigen::Map<Eigen::VectorXd>(demand.data(), demand.size());
  return bundle;
}

// --- MATPOWER subset ---------------------------------------------------------

struct MpSection {
  std::vector<std::vector<double>> rows;
  int line = 0;
};

struct MpFile {
  std::map<std::string, MpSection> matrices;
  std::map<std::string, double> scalars;
  std::vector<std::string> warnings;
};

MpFile scan_matpower(std::string_view text) {
  MpFile file;
  int line = 1, column = 1;
  std::size_t i = 0;
  const std::size_t size = text.size();

  auto advance = [&](std::size_t count) {
    for (std::size_t k = 0; k < count && i < size; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
  };
  auto skip_space_and_comments = [&]() {
    while (i < size) {
      if (text[i] == '%') {
        while (i < size && text[i] != '\n') advance(1);
      } else if (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ',') {
        advance(1);
      } else {
        break;
      }
    }
  };

  while (i < size) {
    skip_space_and_comments();
    if (i >= size) break;

    if (text.compare(i, 4, "mpc.") == 0) {
      advance(4);
      std::string name;
      while (i < size &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
        name += text[i];
        advance(1);
      }
      skip_space_and_comments();
      if (i >= size || text[i] != '=') parse_fail(line, column, "expected '=' after mpc." + name);
      advance(1);
      skip_space_and_comments();
      if (i < size && text[i] == '[') {
        advance(1);
        MpSection section;
        section.line = line;
        std::vector<double> row;
        while (true) {
          skip_space_and_comments();
          if (i >= size) parse_fail(line, column, "unterminated matrix mpc." + name);
          if (text[i] == ']') {
            advance(1);
            break;
          }
          if (text[i] == ';' || text[i] == '\n') {
            if (!row.empty()) {
              section.rows.push_back(row);
              row.clear();
            }
            advance(1);
            continue;
          }
          char* end = nullptr;
          const double value = std::strtod(text.data() + i, &end);
          if (end == text.data() + i) {
            parse_fail(line, column, std::string("unexpected character '") + text[i] + "'");
          }
          row.push_back(value);
          advance(end - (text.data() + i));
        }
        if (!row.empty()) section.rows.push_back(row);
        file.matrices[name] = std::move(section);
        skip_space_and_comments();
        if (i < size && text[i] == ';') advance(1);
      } else if (i < size && text[i] == '\'') {
        // quoted string assignment (e.g. mpc.version); skip it
        advance(1);
        while (i < size && text[i] != '\'') advance(1);
        if (i < size) advance(1);
        skip_space_and_comments();
        if (i < size && text[i] == ';') advance(1);
        file.warnings.push_back("ignoring string field mpc." + name);
      } else {
        char* end = nullptr;
        const double value = std::strtod(text.data() + i, &end);
        if (end == text.data() + i) parse_fail(line, column, "expected value for mpc." + name);
        advance(end - (text.data() + i));
        file.scalars[name] = value;
        skip_space_and_comments();
        if (i < size && text[i] == ';') advance(1);
      }
    } else {
      // "function mpc = ..." and anything else outside mpc.* assignments
      while (i < size && text[i] != '\n') advance(1);
    }
  }
  return file;
}

double cell(const std::vector<double>& row, std::size_t index, double fallback) {
  return index < row.size() ? row[index] : fallback;
}

CaseBundle parse_case_matpower(std::string_view text) {
  MpFile file = scan_matpower(text);
  CaseBundle bundle;
  bundle.warnings = std::move(file.warnings);

  auto base_it = file.scalars.find("baseMVA");
  bundle.mva_base = base_it != file.scalars.end() ? base_it->second : 100.0;
  if (!(bundle.mva_base > 0.0)) throw Error(ErrorKind::ParseError, "baseMVA must be > 0");

  for (const auto& [name, section] : file.matrices) {
    if (name != "bus" && name != "branch" && name != "gen" && name != "gencost") {
      bundle.warnings.push_back("ignoring unsupported section mpc." + name);
    }
  }

  auto bus_it = file.matrices.find("bus");
  if (bus_it == file.matrices.end()) {
    throw Error(ErrorKind::ParseError, "missing mpc.bus section");
  }
  std::vector<double> demand;
  for (std::size_t r = 0; r < bus_it->second.rows.size(); ++r) {
    const auto& row = bus_it->second.rows[r];
    if (row.size() < 3) {
      parse_fail(bus_it->second.line, 1,
                 "bus row " + std::to_string(r + 1) + " has fewer than 3 columns");
    }
    Bus bus;
    bus.id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    bus.is_slack = type == 3;
    if (type == 4) {
      bundle.warnings.push_back("bus " + std::to_string(bus.id) + " is marked isolated (type 4)");
    }
    bundle.network.buses.push_back(bus);
    demand.push_back(row[2]);  // PD, MW
  }

  if (auto it = file.matrices.find("branch"); it != file.matrices.end()) {
    for (std::size_t r = 0; r < it->second.rows.size(); ++r) {
      const auto& row = it->second.rows[r];
      if (row.size() < 4) {
        parse_fail(it->second.line, 1,
                   "branch row " + std::to_string(r + 1) + " has fewer than 4 columns");
      }
      if (row.size() >= 11 && cell(row, 10, 1.0) == 0.0) {
        bundle.warnings.push_back("ignoring out-of-service branch row " + std::to_string(r + 1));
        continue;
      }
      Line line;
      line.from_bus = static_cast<int>(row[0]);
      line.to_bus = static_cast<int>(row[1]);
      const double x = row[3];
      if (!(x > 0.0)) {
        parse_fail(it->second.line, 1,
                   "branch row " + std::to_string(r + 1) + " has non-positive reactance");
      }
      line.susceptance = bundle.mva_base / x;  // 1/x p.u. -> MW/rad
      const double rate_a = cell(row, 5, 0.0);
      line.flow_limit = rate_a > 0.0 ? rate_a : 1e6;  // rateA = 0 means unlimited
      if (rate_a <= 0.0) {
        bundle.warnings.push_back("branch row " + std::to_string(r + 1) +
                                  " has rateA = 0; using 1e6 MW");
      }
      bundle.network.lines.push_back(line);
    }
  }

  std::vector<bool> gen_active;
  if (auto it = file.matrices.find("gen"); it != file.matrices.end()) {
    for (std::size_t r = 0; r < it->second.rows.size(); ++r) {
      const auto& row = it->second.rows[r];
      if (row.size() < 9) {
        parse_fail(it->second.line, 1,
                   "gen row " + std::to_string(r + 1) + " has fewer than 9 columns");
      }
      const bool active = cell(row, 7, 1.0) > 0.0;
      gen_active.push_back(active);
      if (!active) {
        bundle.warnings.push_back("ignoring out-of-service gen row " + std::to_string(r + 1));
        continue;
      }
      Generator gen;
      gen.bus = static_cast<int>(row[0]);
      gen.g_max = row[8];  // PMAX, MW
      bundle.network.generators.push_back(gen);
    }
  }

  auto cost_it = file.matrices.find("gencost");
  if (cost_it == file.matrices.end()) {
    throw Error(ErrorKind::ParseError, "missing mpc.gencost section");
  }
  {
    const auto& rows = cost_it->second.rows;
    if (rows.size() == 2 * gen_active.size() && !gen_active.empty()) {
      bundle.warnings.push_back("gencost has reactive-cost rows; using the first " +
                                std::to_string(gen_active.size()));
    } else if (rows.size() != gen_active.size()) {
      parse_fail(cost_it->second.line, 1,
                 "gencost has " + std::to_string(rows.size()) + " rows for " +
                     std::to_string(gen_active.size()) + " generators");
    }
    std::size_t out = 0;
    for (std::size_t r = 0; r < gen_active.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() < 4) {
        parse_fail(cost_it->second.line, 1,
                   "gencost row " + std::to_string(r + 1) + " has fewer than 4 columns");
      }
      const int model = static_cast<int>(row[0]);
      if (model == 1) {
        throw Error(ErrorKind::UnsupportedCostModel,
                    "gencost row " + std::to_string(r + 1) +
                        " uses a piecewise-linear cost model");
      }
      if (model != 2) {
        throw Error(ErrorKind::UnsupportedCostModel,
                    "gencost row " + std::to_string(r + 1) + " has unknown model " +
                        std::to_string(model));
      }
      const int ncost = static_cast<int>(row[3]);
      if (static_cast<int>(row.size()) < 4 + ncost) {
        parse_fail(cost_it->second.line, 1,
                   "gencost row " + std::to_string(r + 1) + " is missing coefficients");
      }
      double alpha = 0.0, beta = 0.0;
      // Coefficients are highest degree first; anything above quadratic must
      // be identically zero.
      for (int c = 0; c < ncost; ++c) {
        const int degree = ncost - 1 - c;
        const double coeff = row[4 + c];
        if (degree > 2 && coeff != 0.0) {
          throw Error(ErrorKind::UnsupportedCostModel,
                      "gencost row " + std::to_string(r + 1) + " has a degree-" +
                          std::to_string(degree) + " term");
        }
        if (degree == 2) alpha = coeff;
        if (degree == 1) beta = coeff;
        // degree 0 (constant offset) does not affect the optimum or the duals
      }
      if (!gen_active[r]) continue;
      bundle.network.generators[out].alpha = alpha;
      bundle.network.generators[out].beta = beta;
      ++out;
    }
  }

  bundle.demand = Eigen::Map<Eigen::VectorXd>(demand.data(), demand.size());
  return bundle;
}

}  // namespace

CaseBundle parse_case(std::string_view text, CaseFormat format) {
  switch (format) {
    case CaseFormat::NativeJson: return parse_case_json(text);
    case CaseFormat::MatpowerSubset: return parse_case_matpower(text);
  }
  throw Error(ErrorKind::InvalidInput, "unknown case format");
}

std::string write_case_json(const CaseBundle& bundle) {
  ordered_json doc;
  doc["mva_base"] = snap(bundle.mva_base);
  doc["buses"] = ordered_json::array();
  for (int i = 0; i < bundle.network.bus_count(); ++i) {
    const Bus& bus = bundle.network.buses[i];
    ordered_json node;
    node["id"] = bus.id;
    node["name"] = bus.name;
    node["slack"] = bus.is_slack;
    node["demand_mw"] = snap(i < bundle.demand.size() ? bundle.demand(i) : 0.0);
    doc["buses"].push_back(node);
  }
  doc["lines"] = ordered_json::array();
  for (const Line& line : bundle.network.lines) {
    ordered_json node;
    node["from"] = line.from_bus;
    node["to"] = line.to_bus;
    node["susceptance"] = snap(line.susceptance / bundle.mva_base);  // MW/rad -> p.u.
    node["limit_mw"] = snap(line.flow_limit);
    doc["lines"].push_back(node);
  }
  doc["generators"] = ordered_json::array();
  for (const Generator& gen : bundle.network.generators) {
    ordered_json node;
    node["bus"] = gen.bus;
    node["alpha"] = snap(gen.alpha);
    node["beta"] = snap(gen.beta);
    node["gmax_mw"] = snap(gen.g_max);
    doc["generators"].push_back(node);
  }
  return doc.dump(2) + "\n";
}

// --- income ------------------------------------------------------------------

const IncomeRecord* IncomeTable::find(int bus_id) const {
  auto it = std::lower_bound(records.begin(), records.end(), bus_id,
                             [](const IncomeRecord& rec, int id) { return rec.bus_id < id; });
  return (it != records.end() && it->bus_id == bus_id) ? &*it : nullptr;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  for (std::string& f : fields) {
    const auto begin = f.find_first_not_of(" \t");
    const auto end = f.find_last_not_of(" \t");
    f = begin == std::string::npos ? std::string() : f.substr(begin, end - begin + 1);
  }
  return fields;
}

double parse_number(const std::string& field, int line, int column) {
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || field.empty()) {
    parse_fail(line, column, "expected a number, got '" + field + "'");
  }
  return value;
}

}  // namespace

IncomeTable parse_income(std::string_view csv) {
  IncomeTable table;
  std::istringstream stream{std::string(csv)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::set<int> seen;

  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      const auto pos = line.find("period:");
      if (pos != std::string::npos) {
        std::string period = line.substr(pos + 7);
        const auto begin = period.find_first_not_of(" \t");
        const auto end = period.find_last_not_of(" \t\r");
        if (begin != std::string::npos) table.period = period.substr(begin, end - begin + 1);
      }
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"bus_id", "income", "households"}) {
        parse_fail(line_no, 1, "expected header 'bus_id,income,households'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) parse_fail(line_no, 1, "expected 3 fields");
    IncomeRecord rec;
    rec.bus_id = static_cast<int>(parse_number(fields[0], line_no, 1));
    rec.income = parse_number(fields[1], line_no, 2);
    const double households = parse_number(fields[2], line_no, 3);
    if (households < 0.0 || households != std::floor(households)) {
      parse_fail(line_no, 3, "households must be a nonnegative integer");
    }
    rec.households = static_cast<std::int64_t>(households);
    if (rec.income <= 0.0) {
      throw Error(ErrorKind::NonPositiveIncome,
                  "bus " + std::to_string(rec.bus_id) + " has income " + format_double(rec.income));
    }
    if (!seen.insert(rec.bus_id).second) {
      parse_fail(line_no, 1, "duplicate bus id " + std::to_string(rec.bus_id));
    }
    table.records.push_back(rec);
  }
  if (!header_seen) throw Error(ErrorKind::ParseError, "missing income header row");
  std::sort(table.records.begin(), table.records.end(),
            [](const IncomeRecord& a, const IncomeRecord& b) { return a.bus_id < b.bus_id; });
  return table;
}

std::string write_income_csv(const IncomeTable& table) {
  std::string out = "# period: " + table.period + "\n";
  out += "bus_id,income,households\n";
  for (const IncomeRecord& rec : table.records) {
    out += std::to_string(rec.bus_id) + "," + format_double(rec.income) + "," +
           std::to_string(rec.households) + "\n";
  }
  return out;
}

// --- time series -------------------------------------------------------------

std::vector<int> TimeSeriesTable::bus_ids() const {
  std::vector<int> ids;
  for (const SeriesRecord& rec : records) {
    if (std::find(ids.begin(), ids.end(), rec.bus_id) == ids.end()) ids.push_back(rec.bus_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<int> TimeSeriesTable::timesteps_for(int bus_id) const {
  std::vector<int> steps;
  for (const SeriesRecord& rec : records) {
    if (rec.bus_id == bus_id) steps.push_back(rec.timestep);
  }
  std::sort(steps.begin(), steps.end());
  return steps;
}

TimeSeriesTable parse_timeseries(std::string_view csv) {
  TimeSeriesTable table;
  std::istringstream stream{std::string(csv)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  bool has_lmp = false;

  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (!header_seen) {
      if (fields == std::vector<std::string>{"bus_id", "t", "demand_mwh", "omega_dollars"}) {
        has_lmp = false;
      } else if (fields ==
                 std::vector<std::string>{"bus_id", "t", "demand_mwh", "omega_dollars", "lmp"}) {
        has_lmp = true;
      } else {
        parse_fail(line_no, 1, "expected header 'bus_id,t,demand_mwh,omega_dollars[,lmp]'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != (has_lmp ? 5u : 4u)) {
      parse_fail(line_no, 1, "wrong number of fields");
    }
    SeriesRecord rec;
    rec.bus_id = static_cast<int>(parse_number(fields[0], line_no, 1));
    rec.timestep = static_cast<int>(parse_number(fields[1], line_no, 2));
    rec.demand = parse_number(fields[2], line_no, 3);
    if (rec.demand < 0.0) parse_fail(line_no, 3, "demand must be >= 0");
    rec.omega = parse_number(fields[3], line_no, 4);
    if (has_lmp && !fields[4].empty()) rec.lmp = parse_number(fields[4], line_no, 5);
    table.records.push_back(rec);
  }
  if (!header_seen) throw Error(ErrorKind::ParseError, "missing time-series header row");

  // Invariant: timesteps contiguous per bus.
  for (int bus : table.bus_ids()) {
    const std::vector<int> steps = table.timesteps_for(bus);
    for (std::size_t i = 1; i < steps.size(); ++i) {
      if (steps[i] != steps[i - 1] + 1) {
        throw Error(ErrorKind::ParseError,
                    "bus " + std::to_string(bus) + " timesteps are not contiguous (" +
                        std::to_string(steps[i - 1]) + " -> " + std::to_string(steps[i]) + ")");
      }
    }
  }
  return table;
}

// --- reports -----------------------------------------------------------------

Table* Report::find_table(const std::string& name) {
  for (auto& [table_name, table] : tables) {
    if (table_name == name) return &table;
  }
  return nullptr;
}

const Table* Report::find_table(const std::string& name) const {
  for (const auto& [table_name, table] : tables) {
    if (table_name == name) return &table;
  }
  return nullptr;
}

namespace {

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell_to_csv(const Cell& cell) {
  if (std::holds_alternative<std::int64_t>(cell)) {
    return std::to_string(std::get<std::int64_t>(cell));
  }
  if (std::holds_alternative<double>(cell)) {
    return format_double(std::get<double>(cell));
  }
  return csv_escape(std::get<std::string>(cell));
}

ordered_json cell_to_json(const Cell& cell) {
  if (std::holds_alternative<std::int64_t>(cell)) return std::get<std::int64_t>(cell);
  if (std::holds_alternative<double>(cell)) return snap(std::get<double>(cell));
  return std::get<std::string>(cell);
}

ordered_json report_to_json(const Report& report) {
  ordered_json doc;
  doc["metadata"] = ordered_json::object();
  for (const auto& [key, value] : report.metadata) doc["metadata"][key] = value;
  doc["tables"] = ordered_json::object();
  for (const auto& [name, table] : report.tables) {
    ordered_json node;
    node["columns"] = table.columns;
    node["rows"] = ordered_json::array();
    for (const auto& row : table.rows) {
      ordered_json json_row = ordered_json::array();
      for (const Cell& cell : row) json_row.push_back(cell_to_json(cell));
      node["rows"].push_back(json_row);
    }
    doc["tables"][name] = node;
  }
  return doc;
}

}  // namespace

std::map<std::string, std::string> write_report(const Report& report, ReportFormat format) {
  std::map<std::string, std::string> files;
  if (format == ReportFormat::Json) {
    files["report.json"] = report_to_json(report).dump(2) + "\n";
    return files;
  }

  ordered_json manifest;
  manifest["metadata"] = ordered_json::object();
  for (const auto& [key, value] : report.metadata) manifest["metadata"][key] = value;
  manifest["tables"] = ordered_json::array();
  for (const auto& [name, table] : report.tables) {
    std::string csv;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      csv += (c ? "," : "") + csv_escape(table.columns[c]);
    }
    csv += '\n';
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) csv += (c ? "," : "") + cell_to_csv(row[c]);
      csv += '\n';
    }
    const std::string file_name = name + ".csv";
    files[file_name] = csv;
    ordered_json entry;
    entry["name"] = name;
    entry["file"] = file_name;
    entry["rows"] = table.rows.size();
    manifest["tables"].push_back(entry);
  }
  files["manifest.json"] = manifest.dump(2) + "\n";
  return files;
}

PreparedCase prepare_case(const CaseBundle& bundle) {
  std::map<int, double> demand_by_id;
  for (int i = 0; i < bundle.network.bus_count(); ++i) {
    const double d = i < bundle.demand.size() ? bundle.demand(i) : 0.0;
    if (!demand_by_id.emplace(bundle.network.buses[i].id, d).second) {
      throw Error(ErrorKind::InvalidNetwork,
                  "duplicate bus id " + std::to_string(bundle.network.buses[i].id));
    }
  }

  PreparedCase prepared;
  prepared.network = normalize(bundle.network);
  prepared.network.validate();
  prepared.mva_base = bundle.mva_base;
  prepared.warnings = bundle.warnings;
  prepared.demand.resize(prepared.network.bus_count());
  for (int i = 0; i < prepared.network.bus_count(); ++i) {
    prepared.demand(i) = demand_by_id.at(prepared.network.buses[i].id);
  }
  return prepared;
}

Eigen::VectorXd income_vector(const Network& network, const IncomeTable& table) {
  Eigen::VectorXd s(network.bus_count());
  for (int i = 0; i < network.bus_count(); ++i) {
    const IncomeRecord* rec = table.find(network.buses[i].id);
    s(i) = rec ? rec->income : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

Eigen::VectorXd households_vector(const Network& network, const IncomeTable& table) {
  Eigen::VectorXd counts(network.bus_count());
  for (int i = 0; i < network.bus_count(); ++i) {
    const IncomeRecord* rec = table.find(network.buses[i].id);
    counts(i) = rec ? static_cast<double>(rec->households) : 0.0;
  }
  return counts;
}

Report parse_report_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  Report report;
  const ordered_json metadata = doc.value("metadata", ordered_json::object());
  for (const auto& [key, value] : metadata.items()) {
    if (!value.is_string()) throw Error(ErrorKind::ParseError, "metadata values must be strings");
    report.metadata.emplace_back(key, value.get<std::string>());
  }
  const ordered_json tables = doc.value("tables", ordered_json::object());
  for (const auto& [name, node] : tables.items()) {
    Table table;
    for (const auto& column : node.value("columns", ordered_json::array())) {
      table.columns.push_back(column.get<std::string>());
    }
    for (const auto& json_row : node.value("rows", ordered_json::array())) {
      std::vector<Cell> row;
      for (const auto& value : json_row) {
        if (value.is_number_integer()) {
          row.emplace_back(value.get<std::int64_t>());
        } else if (value.is_number()) {
          row.emplace_back(value.get<double>());
        } else {
          row.emplace_back(value.get<std::string>());
        }
      }
      table.rows.push_back(std::move(row));
    }
    report.tables.emplace_back(name, std::move(table));
  }
  return report;
}

}  // namespace gridburden
