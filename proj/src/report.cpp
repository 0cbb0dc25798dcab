#include "gfm/report.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "gfm/error.hpp"

namespace gfm {

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  return quote_if_needed(std::get<std::string>(cell));
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void ExperimentReport::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw InvalidArgument("row has " + std::to_string(row.size()) + " cells, header has " +
                          std::to_string(columns_.size()));
  }
  rows_.push_back(std::move(row));
}

std::size_t ExperimentReport::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  throw InvalidArgument("no column named " + std::string(name));
}

double ExperimentReport::number(std::size_t row, std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  throw InvalidArgument("column " + std::string(column) + " is not numeric");
}

const std::string& ExperimentReport::text(std::size_t row, std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  throw InvalidArgument("column " + std::string(column) + " is not text");
}

void ExperimentReport::write_csv(std::ostream& out, bool include_timing) const {
  bool first = true;
  for (const auto& c : columns_) {
    if (c.timing && !include_timing) continue;
    out << (first ? "" : ",") << quote_if_needed(c.name);
    first = false;
  }
  out << '\n';
  for (const auto& row : rows_) {
    first = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (columns_[i].timing && !include_timing) continue;
      out << (first ? "" : ",") << render(row[i]);
      first = false;
    }
    out << '\n';
  }
}

std::string ExperimentReport::to_csv(bool include_timing) const {
  std::ostringstream s;
  write_csv(s, include_timing);
  return s.str();
}

}  // namespace gfm
