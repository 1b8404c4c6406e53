#pragma once
// Small CSV helpers.  Numbers are written with %.17g so that reading a file
// back reproduces the exact IEEE doubles that were written.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stablecf::csv {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t dropped_rows = 0;  // rows discarded for non-numeric cells

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Reads a CSV with a header row.  Rows whose width differs from the header
// throw; rows with non-numeric cells are dropped and counted.  Columns whose
// names appear in `skip` (e.g. a date column) are removed before parsing.
inline Table read(const std::string& path,
                  const std::vector<std::string>& skip = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto raw_header = split_line(line);
  std::vector<bool> keep(raw_header.size(), true);
  for (std::size_t i = 0; i < raw_header.size(); ++i)
    for (const auto& s : skip)
      if (raw_header[i] == s) keep[i] = false;
  for (std::size_t i = 0; i < raw_header.size(); ++i)
    if (keep[i]) t.header.push_back(raw_header[i]);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != raw_header.size())
      throw std::runtime_error("ragged CSV row in " + path);
    std::vector<double> row;
    row.reserve(t.header.size());
    bool ok = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!keep[i]) continue;
      try {
        std::size_t pos = 0;
        double v = std::stod(cells[i], &pos);
        while (pos < cells[i].size() &&
               (cells[i][pos] == ' ' || cells[i][pos] == '\t'))
          ++pos;
        if (pos != cells[i].size()) throw std::invalid_argument("trailing");
        row.push_back(v);
      } catch (...) {
        ok = false;
        break;
      }
    }
    if (ok) {
      t.rows.push_back(std::move(row));
    } else {
      ++t.dropped_rows;
    }
  }
  return t;
}

inline void write(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << format_double(row[i]) << (i + 1 < row.size() ? "," : "\n");
  }
  if (!out) throw std::runtime_error("failed writing CSV file: " + path);
}

}  // namespace stablecf::csv
