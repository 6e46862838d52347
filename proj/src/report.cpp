#include "smpnn/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "smpnn/error.hpp"

namespace smpnn {

std::string tool_version() { return "smpnn 0.1.0"; }

std::string format_cell(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  const std::string& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

void ExperimentReport::add_row(std::vector<Cell> row) {
  require(row.size() == columns.size(), ErrorCode::shape_mismatch,
          "report '" + name + "': row has " + std::to_string(row.size()) + " cells, expected " +
              std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

double ExperimentReport::scalar(const std::string& key) const {
  auto it = scalars.find(key);
  require(it != scalars.end(), ErrorCode::invalid_argument,
          "report '" + name + "' has no scalar '" + key + "'");
  return it->second;
}

std::size_t ExperimentReport::column(const std::string& col) const {
  auto it = std::find(columns.begin(), columns.end(), col);
  require(it != columns.end(), ErrorCode::invalid_argument,
          "report '" + name + "' has no column '" + col + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double ExperimentReport::number(std::size_t row, const std::string& col) const {
  const Cell& c = rows.at(row).at(column(col));
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  throw Error(ErrorCode::invalid_argument, "column '" + col + "' is not numeric");
}

void ExperimentReport::write_csv(std::ostream& out) const {
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_cell(row[j]);
    out << '\n';
  }
}

void ExperimentReport::write_scalars_csv(std::ostream& out) const {
  out << "key,value\n";
  for (const auto& [k, v] : scalars) out << k << ',' << format_cell(v) << '\n';
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream s;
  write_csv(s);
  return s.str();
}

}  // namespace smpnn
