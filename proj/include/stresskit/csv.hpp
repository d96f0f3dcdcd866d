#pragma once

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stresskit/common.hpp"

namespace stresskit {

// All pipeline files are plain comma-separated UTF-8 text with a header row,
// Unix newlines and '.' decimal separators. Fields never contain commas, so
// no quoting layer is needed.

inline void split_csv_line(std::string_view line,
                           std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Streams a CSV file: calls header_fn once, then row_fn per data row with
// 1-based line numbers. Returns false when the file cannot be opened.
// An entirely empty file is treated as zero records.
inline bool for_each_csv_row(
    const std::string& path,
    const std::function<void(const std::vector<std::string_view>&)>& header_fn,
    const std::function<void(std::size_t, const std::vector<std::string_view>&)>&
        row_fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    split_csv_line(line, fields);
    if (!saw_header) {
      saw_header = true;
      header_fn(fields);
    } else {
      row_fn(line_no, fields);
    }
  }
  return true;
}

inline std::optional<double> parse_double_field(std::string_view f) {
  if (f.empty()) return std::nullopt;
  std::string tmp(f);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int_field(std::string_view f) {
  if (f.empty()) return std::nullopt;
  std::string tmp(f);
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(tmp.c_str(), &end, 10);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) return std::nullopt;
  return static_cast<std::int64_t>(v);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

}  // namespace stresskit
