#include "rtgp/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rtgp {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw EmptyData("csv: no column named '" + name + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmptyData("csv: cannot open " + path);

  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw EmptyData("csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line);
  if (table.header.empty()) throw EmptyData("csv: header row is empty");

  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw ParseError(row_number, fields.size(),
                       "expected " + std::to_string(table.header.size()) +
                           " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(row_number, c + 1, "not a number: '" + f + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(row_number, c + 1, "non-finite value");
      }
      row[c] = v;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw EmptyData("csv: cannot write " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
}

}  // namespace rtgp
