#pragma once

// Locale-independent CSV: shortest round-trip number formatting and a small
// reader keyed by header names.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace rydberg::io {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  if (r.ec != std::errc{}) throw CsvError("number formatting failed");
  return {buf, r.ptr};
}

inline std::string format_number(long long v) { return std::to_string(v); }

inline double parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw CsvError("not a number: '" + std::string(s) + "'");
  return v;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return cells_.size(); }

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw CsvError("row width does not match header");
    cells_.push_back(std::move(row));
  }

  std::string render() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += r[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : cells_) line(r);
    return out;
  }

  bool has(const std::string& col) const {
    for (const auto& h : header_)
      if (h == col) return true;
    return false;
  }

  std::size_t index(const std::string& col) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == col) return i;
    throw CsvError("missing column '" + col + "'");
  }

  const std::string& cell(std::size_t row, const std::string& col) const { return cells_.at(row)[index(col)]; }

  std::vector<double> column(const std::string& col) const {
    const std::size_t k = index(col);
    std::vector<double> out;
    out.reserve(cells_.size());
    for (const auto& r : cells_) out.push_back(parse_number(r[k]));
    return out;
  }

  /// Throws naming every column absent from the header.
  void require(const std::vector<std::string>& cols) const {
    std::string missing;
    for (const auto& c : cols)
      if (!has(c)) missing += (missing.empty() ? "" : ", ") + c;
    if (!missing.empty()) throw CsvError("missing column(s): " + missing);
  }

  static CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
      std::vector<std::string> f;
      std::string cur;
      for (char c : l) {
        if (c == ',') {
          f.push_back(cur);
          cur.clear();
        } else if (c != '\r') {
          cur += c;
        }
      }
      f.push_back(cur);
      return f;
    };
    std::vector<std::string> header;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      header = split(line);
      break;
    }
    if (header.empty()) throw CsvError("empty CSV");
    CsvTable t(header);
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      auto f = split(line);
      if (f.size() != header.size())
        throw CsvError("row " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields, expected " +
                       std::to_string(header.size()));
      t.cells_.push_back(std::move(f));
    }
    return t;
  }

  static CsvTable read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CsvError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

}  // namespace rydberg::io
