#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace smpnn {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Tabular experiment output plus keyed summary scalars. Rows are CSV rows;
/// scalars go to a second `key,value` CSV or into the run manifest.
struct ExperimentReport {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> notes;

  void add_row(std::vector<Cell> row);
  double scalar(const std::string& key) const;
  /// Column index by name; throws when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& col) const;

  void write_csv(std::ostream& out) const;
  void write_scalars_csv(std::ostream& out) const;
  std::string to_csv() const;
};

/// Doubles are printed with %.17g so written reports reload bitwise.
std::string format_cell(const Cell& cell);

std::string tool_version();

}  // namespace smpnn
