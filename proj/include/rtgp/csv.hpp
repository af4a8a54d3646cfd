#pragma once

#include <string>
#include <vector>

#include "rtgp/errors.hpp"

namespace rtgp {

// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

}  // namespace rtgp
