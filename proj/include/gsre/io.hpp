#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"

namespace gsre::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool skippable(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

inline double parse_number(std::string_view cell, std::size_t line, std::size_t field) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
    throw InputError("field " + std::to_string(field) + " is not a number: '" + std::string(cell) + "'", line);
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/**
 * Numeric CSV without a header: comma-separated fields, '.' decimal point.
 * Blank lines and lines starting with '#' are skipped. Every data row must
 * have the same number of fields; errors carry the 1-based file line.
 */
inline Eigen::MatrixXd parse_csv_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    std::vector<double> row;
    std::string_view rest(line);
    std::size_t field = 1;
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(detail::parse_number(rest.substr(0, comma), lineno, field++));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw InputError("row has " + std::to_string(row.size()) + " fields, expected " + std::to_string(width), lineno);
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

inline Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return parse_csv_matrix(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

/// A single-column CSV as a vector.
inline Eigen::VectorXd read_csv_vector(const std::string& path) {
  const Eigen::MatrixXd m = read_csv_matrix(path);
  if (m.cols() != 1 && m.rows() > 0)
    throw InputError(path + ": expected one field per row, found " + std::to_string(m.cols()));
  return m.rows() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(m.col(0));
}

inline void write_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_number(m(r, c));
    }
    out << '\n';
  }
}

inline void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = detail::open_out(path);
  write_csv(out, m);
}

/**
 * Edge list, one edge per line as "i j" (commas and tabs also accepted) with 1-based node ids.
 * '#' lines and blank lines are skipped; self-loops are ignored.
 */
inline PredictorGraph parse_edge_list(std::istream& in, Index p) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    for (char& c : line)
      if (c == ',' || c == '\t') c = ' ';
    std::istringstream fields(line);
    std::vector<std::string> tok{std::istream_iterator<std::string>(fields), std::istream_iterator<std::string>()};
    if (tok.size() != 2) throw InputError("edge line needs exactly two node ids", lineno);
    Index ids[2];
    for (int k = 0; k < 2; ++k) {
      long long v = 0;
      const auto [ptr, ec] = std::from_chars(tok[k].data(), tok[k].data() + tok[k].size(), v);
      if (ec != std::errc{} || ptr != tok[k].data() + tok[k].size())
        throw InputError("node id '" + tok[k] + "' is not an integer", lineno);
      if (v < 1 || v > p)
        throw InputError("node id " + tok[k] + " outside 1.." + std::to_string(p), lineno);
      ids[k] = static_cast<Index>(v - 1);
    }
    edges.push_back({ids[0], ids[1]});
  }
  return PredictorGraph::from_edge_list(p, edges);
}

inline PredictorGraph read_edge_list(const std::string& path, Index p) {
  auto in = detail::open_in(path);
  try {
    return parse_edge_list(in, p);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_edge_list(std::ostream& out, const PredictorGraph& g) {
  for (const auto& e : g.edges()) out << (e.a + 1) << ' ' << (e.b + 1) << '\n';
}

inline void write_edge_list(const std::string& path, const PredictorGraph& g) {
  auto out = detail::open_out(path);
  write_edge_list(out, g);
}

inline void write_text(const std::string& path, const std::string& text) {
  auto out = detail::open_out(path);
  out << text;
}

}  // namespace gsre::io
