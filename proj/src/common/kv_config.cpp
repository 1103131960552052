#include "segadv/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "segadv/error.hpp"

namespace segadv {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) fn(line, lineno);
  }
}

void parse_assignment(std::string_view line, std::size_t lineno, KvConfig& into) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value, got '" + std::string(line) + "'");
  }
  const auto key = trim(line.substr(0, eq));
  if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
  if (into.has(std::string(key))) {
    throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + std::string(key) + "'");
  }
  into.set(std::string(key), std::string(trim(line.substr(eq + 1))));
}

template <typename N>
N parse_number(const std::string& key, const std::string& s) {
  N v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + s + "'");
  return v;
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text) {
  KvConfig cfg;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) { parse_assignment(line, lineno, cfg); });
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) { return parse(read_text_file(path)); }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KvConfig::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing required key '" + key + "'");
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  // Allow simple fractions such as 1/30.
  if (const auto slash = it->second.find('/'); slash != std::string::npos) {
    const double num = parse_number<double>(key, std::string(trim(std::string_view(it->second).substr(0, slash))));
    const double den = parse_number<double>(key, std::string(trim(std::string_view(it->second).substr(slash + 1))));
    if (den == 0.0) throw ConfigError("config key '" + key + "': division by zero");
    return num / den;
  }
  return parse_number<double>(key, it->second);
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::int64_t>(key, it->second);
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + it->second + "'");
}

void KvConfig::check_keys(std::initializer_list<std::string_view> known, const std::string& context) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(context + ": unknown key '" + key + "'");
    }
  }
}

std::string KvConfig::to_string() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) os << key << '=' << value << '\n';
  return os.str();
}

std::vector<KvSection> parse_sections(std::string_view text) {
  std::vector<KvSection> sections(1);
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      }
      sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), {}});
      return;
    }
    parse_assignment(line, lineno, sections.back().config);
  });
  return sections;
}

std::vector<KvSection> load_sections(const std::string& path) { return parse_sections(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace segadv
