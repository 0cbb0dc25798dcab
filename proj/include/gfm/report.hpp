#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gfm {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Column {
  std::string name;
  bool timing = false;  // wall-clock columns are excluded from determinism checks
};

// Tabular experiment output; one row per grid point.
class ExperimentReport {
 public:
  ExperimentReport() = default;
  explicit ExperimentReport(std::vector<Column> columns) : columns_(std::move(columns)) {}

  const std::vector<Column>& columns() const noexcept { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const noexcept { return rows_; }

  // Throws InvalidArgument when the row width does not match the header.
  void add_row(std::vector<Cell> row);

  std::size_t column_index(std::string_view name) const;  // throws InvalidArgument
  double number(std::size_t row, std::string_view column) const;
  const std::string& text(std::size_t row, std::string_view column) const;

  // UTF-8 CSV with a header row; doubles carry 9 significant digits.
  void write_csv(std::ostream& out, bool include_timing = true) const;
  std::string to_csv(bool include_timing = true) const;

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
};

std::string format_double(double v);

}  // namespace gfm
