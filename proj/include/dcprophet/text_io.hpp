#pragma once

// Small helpers shared by the CSV and model-file readers/writers.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace dcprophet::text {

/// Splits on `sep` without any quoting rules.
std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
void append_double(std::string& out, double v);

/// Strict parsers; return false on any trailing garbage.
bool parse_double(std::string_view s, double& out);
bool parse_u64(std::string_view s, std::uint64_t& out);
bool parse_i64(std::string_view s, std::int64_t& out);

/// Reads the next line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

/// 64-bit FNV-1a digest, used for data fingerprints in manifests.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  void update_double(double v);
  void update_u64(std::uint64_t v);
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace dcprophet::text
