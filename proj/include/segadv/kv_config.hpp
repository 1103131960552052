#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace segadv {

// Plain-text `key = value` configuration. '#' starts a comment; blank lines
// are ignored. Values are kept as strings and converted on access.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string require_string(const std::string& key) const;

  // Throws ConfigError naming the first key not in `known`.
  void check_keys(std::initializer_list<std::string_view> known, const std::string& context) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // Canonical `key=value` lines in key order.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

// A file split into `[name]` sections. Keys before the first header land in
// a section with an empty name. Section order is preserved.
struct KvSection {
  std::string name;
  KvConfig config;
};

std::vector<KvSection> parse_sections(std::string_view text);
std::vector<KvSection> load_sections(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace segadv
