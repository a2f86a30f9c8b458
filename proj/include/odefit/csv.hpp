#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace odefit {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric table with a header row, stored column-major.
struct DataTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  std::ptrdiff_t find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  const std::vector<double>& column(std::string_view name) const {
    const auto i = find(name);
    if (i < 0) throw CsvError("no column named '" + std::string(name) + "'");
    return columns[static_cast<std::size_t>(i)];
  }

  friend bool operator==(const DataTable&, const DataTable&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Parses CSV text (header row, comma separated, '.' decimal separator).
/// Errors name the offending 1-based row and column.
inline DataTable parse_csv(std::string_view text) {
  DataTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_done = false;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (!header_done) {
      if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") fields = detail::split_fields(line.substr(3));
      for (auto f : fields) table.names.emplace_back(f);
      table.columns.resize(table.names.size());
      header_done = true;
      continue;
    }
    if (fields.size() != table.names.size())
      throw CsvError("row " + std::to_string(line_no) + ": expected " + std::to_string(table.names.size()) +
                     " fields, found " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto f = fields[c];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        throw CsvError("non-numeric cell at row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                       " ('" + table.names[c] + "'): '" + std::string(f) + "'");
      table.columns[c].push_back(v);
    }
  }
  if (!header_done) throw CsvError("empty CSV: missing header row");
  return table;
}

inline DataTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

inline std::string to_csv(const DataTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    if (c) out += ',';
    out += table.names[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out += ',';
      out += format_double(table.columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace odefit
