#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpinfer/core.hpp"

namespace cpinfer {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Shortest representation that reads back to the same double.
inline std::string shortest(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Comma-separated numbers, one row per observation. Blank lines are
/// skipped; a leading '+' and scientific notation are accepted.
inline TimeSeries read_csv(std::istream& in, bool has_header, const std::string& source = "<stream>") {
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::size_t col = 0, start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      std::string_view cell = detail::trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
      ++col;
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw error(errc::parse, source + ": line " + std::to_string(line_no) + ", column " +
                                     std::to_string(col) + ": not a number: '" + std::string(cell) + "'");
      }
      data.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = col;
    } else if (col != cols) {
      throw error(errc::parse, source + ": line " + std::to_string(line_no) + " has " + std::to_string(col) +
                                   " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (in.bad()) throw error(errc::io, source + ": read failure");
  if (rows < 2) {
    throw error(errc::invalid_argument, source + ": need at least 2 data rows, found " + std::to_string(rows));
  }
  return TimeSeries(rows, cols, std::move(data));
}

inline TimeSeries read_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw error(errc::io, "cannot open " + path.string());
  return read_csv(in, has_header, path.string());
}

/// Writes y with shortest round-trip formatting, so read_csv returns an
/// identical series. An empty header writes none.
inline void write_csv(std::ostream& out, const TimeSeries& y, std::span<const std::string> header = {}) {
  if (!header.empty()) {
    detail::check_dim(header.size(), y.dim(), "header");
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (std::size_t t = 0; t < y.length(); ++t) {
    const auto r = y.row(t);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << detail::shortest(r[j]);
    out << '\n';
  }
}

inline void write_csv(const std::filesystem::path& path, const TimeSeries& y,
                      std::span<const std::string> header = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw error(errc::io, "cannot write " + path.string());
  write_csv(out, y, header);
  if (!out) throw error(errc::io, "write failure on " + path.string());
}

}  // namespace cpinfer
