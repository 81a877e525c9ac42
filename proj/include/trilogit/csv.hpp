#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trilogit/errors.hpp"
#include "trilogit/panel.hpp"

namespace trilogit {

// CSV column roles: which header names hold the ids, the outcome and the
// regressors.
struct ColumnSchema {
  std::string i, j, t, y;
  std::vector<std::string> x;
};

namespace csvdetail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, std::size_t row, int k) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  while (p < e && (*p == ' ' || *p == '\t')) ++p;
  if (ec != std::errc() || p != e) throw NonFiniteRegressor(row, k);
  return v;
}

}  // namespace csvdetail

// Reads a header-first CSV into raw rows according to the schema. The outcome
// must parse as the integer 0 or 1; regressors as decimal floats.
inline std::vector<RawRow> read_csv(std::istream& in, const ColumnSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: missing header row");
  const auto header = csvdetail::split(line);
  auto col = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<int>(c);
    throw DataError("column '" + name + "' not found in header");
  };
  const int ci = col(schema.i), cj = col(schema.j), ct = col(schema.t), cy = col(schema.y);
  std::vector<int> cx;
  for (const auto& name : schema.x) cx.push_back(col(name));

  std::vector<RawRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = csvdetail::split(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(lineno) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    RawRow r;
    r.row = lineno;
    r.i = fields[static_cast<std::size_t>(ci)];
    r.j = fields[static_cast<std::size_t>(cj)];
    r.t = fields[static_cast<std::size_t>(ct)];
    const std::string& ys = fields[static_cast<std::size_t>(cy)];
    if (ys == "0")
      r.y = 0.0;
    else if (ys == "1")
      r.y = 1.0;
    else
      throw NonBinaryOutcome(lineno);
    for (std::size_t k = 0; k < cx.size(); ++k)
      r.x.push_back(csvdetail::parse_double(
          fields[static_cast<std::size_t>(cx[k])], lineno, static_cast<int>(k)));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<RawRow> read_csv_file(const std::string& path,
                                         const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return read_csv(in, schema);
}

}  // namespace trilogit
