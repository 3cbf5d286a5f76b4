#pragma once

// Flat key-value configuration files.
//
//   # comment
//   key = value
//   list_key = 0.001, 0.01, 0.1
//
// Every lookup error names the field and, when the key is present, its line.

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ridge/error.hpp"

namespace ridge {

class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static KeyValueConfig parse(std::istream& is) {
    KeyValueConfig cfg;
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError("empty key", line_no);
      if (cfg.entries_.count(key)) throw ConfigError("duplicate field '" + key + "'", line_no);
      cfg.entries_[key] = Entry{value, line_no};
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  void set(const std::string& key, std::string value) { entries_[key] = Entry{std::move(value), 0}; }

  /// Rejects keys outside `allowed`, reporting the first offender's line.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, entry] : entries_)
      if (!allowed.count(key)) throw ConfigError("unknown field '" + key + "'", entry.line);
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return to_double(key, it->second.value, it->second.line);
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second.value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("field '" + key + "' must be an integer, got '" + s + "'", it->second.line);
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second.value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("field '" + key + "' must be an unsigned 64-bit integer, got '" + s + "'",
                        it->second.line);
    return v;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    std::string_view rest = it->second.value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (item.empty()) throw ConfigError("field '" + key + "' has an empty list item", it->second.line);
      out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_list(key)) out.push_back(to_double(key, item, line_of(key)));
    return out;
  }

  /// Throws a ConfigError naming `key` unless `ok`.
  void require(const std::string& key, bool ok, const std::string& requirement) const {
    if (!ok) throw ConfigError("field '" + key + "' " + requirement, line_of(key));
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  static double to_double(const std::string& key, const std::string& s, int line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
      throw ConfigError("field '" + key + "' must be a finite number, got '" + s + "'", line);
    return v;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace ridge
