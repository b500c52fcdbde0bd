#pragma once

#include <string>
#include <vector>

namespace marl {

// Columnar metric log with deterministic CSV serialization: values print via
// %.17g so identical doubles always serialize to identical bytes.
struct MetricTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Throws ContractError when a row width disagrees with the header.
  void add_row(std::vector<double> row);
  double at(size_t row, const std::string& column) const;  // NotFoundError on bad column
  std::string to_csv() const;
  void write_csv(const std::string& path) const;  // ContractError on unwritable path
};

}  // namespace marl
