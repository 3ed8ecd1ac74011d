#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace geoworld {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text grouped under `[section]` headers. Entry order is
/// preserved so serialisation is stable; lines starting with '#' or ';' are comments.
class KeyValueDoc {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
  };

  static KeyValueDoc parse(std::string_view text);
  std::string serialize() const;

  void set(const std::string& section, const std::string& key, std::string value);
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  /// Like get() but throws ParseError naming `section.key` when absent.
  const std::string& require(const std::string& section, const std::string& key) const;

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

std::string format_double(double v);
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);
std::uint64_t parse_uint(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

/// 64-bit FNV-1a, hex encoded; used as a stable config digest.
std::string fnv1a_hex(std::string_view text);

}  // namespace geoworld
