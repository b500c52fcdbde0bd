#include "marl/algo/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "marl/errors.hpp"

namespace marl {

void MetricTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw ContractError("MetricTable: row width " + std::to_string(row.size()) +
                        " != column count " + std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

double MetricTable::at(size_t row, const std::string& column) const {
  if (row >= rows.size()) throw ContractError("MetricTable: row out of range");
  for (size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == column) return rows[row][c];
  throw NotFoundError("MetricTable: no column '" + column + "'");
}

std::string MetricTable::to_csv() const {
  std::ostringstream out;
  for (size_t c = 0; c < columns.size(); ++c) {
    if (c) out << ',';
    out << columns[c];
  }
  out << '\n';
  char buf[64];
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

void MetricTable::write_csv(const std::string& path) const {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw ContractError("MetricTable: cannot open '" + path + "' for writing");
  auto text = to_csv();
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

}  // namespace marl
