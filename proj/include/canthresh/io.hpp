#pragma once

// CSV input, number formatting and atomic file output.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "canthresh/canonical.hpp"

namespace canthresh::io {

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has no header row
  Matrix values;

  bool has_header() const { return !header.empty(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Comma-separated numeric table. The first row is a header when any of its fields
/// is not a number. Blank lines are skipped.
inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line);
    if (first) {
      width = fields.size();
      std::vector<double> row;
      bool numeric = true;
      for (auto f : fields) {
        double v;
        if (!detail::parse_double(f, v)) {
          numeric = false;
          break;
        }
        row.push_back(v);
      }
      first = false;
      if (!numeric) {
        for (auto f : fields) t.header.emplace_back(f);
        continue;
      }
      rows.push_back(std::move(row));
      continue;
    }
    if (fields.size() != width)
      throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(width);
    for (auto f : fields) {
      double v;
      if (!detail::parse_double(f, v))
        throw ParseError("csv line " + std::to_string(line_no) + ": '" + std::string(f) +
                         "' is not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("csv has no data rows");
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_csv(in);
}

// Shortest text that reads back to the same double (at most 17 significant digits).
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

}  // namespace canthresh::io
