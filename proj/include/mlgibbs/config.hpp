#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mlgibbs/common.hpp"

namespace mlgibbs {

// Flat key-value text format: one `key = value` per line, '#' comments,
// values may be space-separated lists. Keys are unique; insertion order is
// preserved so an echoed file reparses byte-identically.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in) {
    KeyValueFile kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string_view sv = trim(line);
      if (sv.empty()) continue;
      const auto eq = sv.find('=');
      if (eq == std::string_view::npos)
        throw ParseError(lineno, "expected 'key = value'");
      const std::string key{trim(sv.substr(0, eq))};
      const std::string value{trim(sv.substr(eq + 1))};
      if (key.empty()) throw ParseError(lineno, "empty key");
      if (kv.index_.count(key)) throw ParseError(lineno, "duplicate key '" + key + "'");
      kv.index_[key] = kv.entries_.size();
      kv.entries_.emplace_back(key, value);
    }
    return kv;
  }

  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse(in);
  }

  bool has(const std::string& key) const { return index_.count(key) != 0; }

  const std::string& get_string(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("missing field '" + key + "'");
    return entries_[it->second].second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::uint64_t get_uint(const std::string& key) const { return to_uint(key, get_string(key)); }
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : tokens(get_string(key))) out.push_back(to_double(key, tok));
    if (out.empty()) throw ConfigError("field '" + key + "' is empty");
    return out;
  }

  std::vector<std::size_t> get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& tok : tokens(get_string(key)))
      out.push_back(static_cast<std::size_t>(to_uint(key, tok)));
    if (out.empty()) throw ConfigError("field '" + key + "' is empty");
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it != index_.end()) {
      entries_[it->second].second = value;
    } else {
      index_[key] = entries_.size();
      entries_.emplace_back(key, value);
    }
  }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  static std::string_view trim(std::string_view sv) {
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t' || sv.front() == '\r'))
      sv.remove_prefix(1);
    while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
      sv.remove_suffix(1);
    return sv;
  }

  static std::vector<std::string> tokens(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream iss(value);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
  }

  static double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
      throw ConfigError("field '" + key + "': '" + text + "' is not a number");
    return v;
  }

  static std::uint64_t to_uint(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
      throw ConfigError("field '" + key + "': '" + text + "' is not a nonnegative integer");
    return v;
  }

  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

// locale-independent shortest round-trip formatting for trace files
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace mlgibbs
