#pragma once

// Small CSV writer. Numbers go through std::to_chars (shortest round-trip,
// locale independent) so reruns produce identical bytes.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace tweezerlab {

inline std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string format_number(long long x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[static_cast<std::size_t>(15 - i)] = digits[(h >> (4 * i)) & 0xF];
  return s;
}

class CsvWriter {
 public:
  /// Writes "# scenario_hash=<hash>" (when hash is non-empty) and the column header.
  CsvWriter(std::ostream& out, std::string_view header, std::string_view hash = {}) : out_(out) {
    if (!hash.empty()) out_ << "# scenario_hash=" << hash << '\n';
    out_ << header << '\n';
  }

  void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_number(values[i]);
    }
    out_ << '\n';
  }

  void raw(std::string_view line) { out_ << line << '\n'; }

 private:
  std::ostream& out_;
};

inline std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  return out;
}

}  // namespace tweezerlab
