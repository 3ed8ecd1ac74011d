#include "geoworld/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace geoworld {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  T value{};
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ParseError("invalid value for " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
  KeyValueDoc doc;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("line " + std::to_string(line_no) + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
    doc.set(section, std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return doc;
}

std::string KeyValueDoc::serialize() const {
  std::string out;
  std::string section;
  bool first = true;
  for (const auto& e : entries_) {
    if (first || e.section != section) {
      if (!first) out += '\n';
      if (!e.section.empty()) out += "[" + e.section + "]\n";
      section = e.section;
      first = false;
    }
    out += e.key + " = " + e.value + "\n";
  }
  return out;
}

void KeyValueDoc::set(const std::string& section, const std::string& key, std::string value) {
  for (auto& e : entries_) {
    if (e.section == section && e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  entries_.push_back({section, key, std::move(value)});
}

std::optional<std::string> KeyValueDoc::get(const std::string& section, const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.section == section && e.key == key) return e.value;
  }
  return std::nullopt;
}

const std::string& KeyValueDoc::require(const std::string& section, const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.section == section && e.key == key) return e.value;
  }
  throw ParseError("missing key " + (section.empty() ? key : section + "." + key));
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) { return parse_number<double>(text, what); }
std::int64_t parse_int(std::string_view text, std::string_view what) { return parse_number<std::int64_t>(text, what); }
std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  return parse_number<std::uint64_t>(text, what);
}

bool parse_bool(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ParseError("invalid boolean for " + std::string(what) + ": '" + std::string(text) + "'");
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace geoworld
