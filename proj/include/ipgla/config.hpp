#pragma once

// Flat key = value configuration files with command-line overrides. Every key read is
// recorded with the value actually used, so the resolved configuration can be written out
// and fed back for an identical rerun. Keys that are never read are an error.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ipgla {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parsed key/value pairs. Later assignments (overrides) replace earlier ones.
class KeyValueConfig {
 public:
  /// Lines are `key = value`; `#` starts a comment; blank lines are ignored. A key may
  /// appear only once per text.
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = detail::trim(std::string_view(t).substr(0, eq));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
      if (!seen.insert(key).second) throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key " + key);
      cfg.values_[key] = detail::trim(std::string_view(t).substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path);
  }

  /// Applies `key=value`.
  void set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override must have the form key=value: " + std::string(assignment));
    const std::string key = detail::trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("override with empty key");
    values_[key] = detail::trim(assignment.substr(eq + 1));
  }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Typed access with defaults and range checks. Call finish() after reading every key.
class ConfigReader {
 public:
  explicit ConfigReader(KeyValueConfig cfg) : cfg_(std::move(cfg)) {}

  double get_double(const std::string& key, double def, double lo = -HUGE_VAL, double hi = HUGE_VAL) {
    const double v = raw(key) ? parse_double(key, *raw(key)) : def;
    if (!(v >= lo && v <= hi))
      throw ConfigError(key + " = " + detail::format_double(v) + " is outside [" + detail::format_double(lo) + ", " +
                        detail::format_double(hi) + "]");
    resolved_[key] = detail::format_double(v);
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t def, std::uint64_t lo = 0,
                        std::uint64_t hi = UINT64_MAX) {
    std::uint64_t v = def;
    if (const auto* s = raw(key)) {
      const auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
      if (ec != std::errc() || p != s->data() + s->size()) throw ConfigError(key + ": not a nonnegative integer: " + *s);
    }
    if (v < lo || v > hi)
      throw ConfigError(key + " = " + std::to_string(v) + " is outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    resolved_[key] = std::to_string(v);
    return v;
  }

  std::size_t get_size(const std::string& key, std::size_t def, std::size_t lo = 0, std::size_t hi = SIZE_MAX) {
    return static_cast<std::size_t>(get_u64(key, def, lo, hi));
  }

  int get_int(const std::string& key, int def, int lo, int hi) {
    return static_cast<int>(get_u64(key, static_cast<std::uint64_t>(def), static_cast<std::uint64_t>(lo),
                                    static_cast<std::uint64_t>(hi)));
  }

  bool get_bool(const std::string& key, bool def) {
    bool v = def;
    if (const auto* s = raw(key)) {
      if (*s == "true" || *s == "1" || *s == "yes") {
        v = true;
      } else if (*s == "false" || *s == "0" || *s == "no") {
        v = false;
      } else {
        throw ConfigError(key + ": expected true or false, got " + *s);
      }
    }
    resolved_[key] = v ? "true" : "false";
    return v;
  }

  std::string get_string(const std::string& key, const std::string& def) {
    const std::string v = raw(key) ? *raw(key) : def;
    resolved_[key] = v;
    return v;
  }

  std::string get_choice(const std::string& key, const std::string& def, const std::vector<std::string>& choices) {
    const std::string v = get_string(key, def);
    for (const auto& c : choices)
      if (c == v) return v;
    std::string all;
    for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
    throw ConfigError(key + ": expected one of {" + all + "}, got " + v);
  }

  /// Comma-separated list of numbers, each in [lo, hi].
  std::vector<double> get_list(const std::string& key, const std::vector<double>& def, double lo = -HUGE_VAL,
                               double hi = HUGE_VAL) {
    std::vector<double> v = def;
    if (const auto* s = raw(key)) {
      v.clear();
      std::stringstream ss(*s);
      std::string item;
      while (std::getline(ss, item, ',')) v.push_back(parse_double(key, detail::trim(item)));
      if (v.empty()) throw ConfigError(key + ": empty list");
    }
    std::string out;
    for (double x : v) {
      if (!(x >= lo && x <= hi)) throw ConfigError(key + ": value " + detail::format_double(x) + " out of range");
      out += (out.empty() ? "" : ",") + detail::format_double(x);
    }
    resolved_[key] = out;
    return v;
  }

  /// Throws if any provided key was never read.
  void finish() const {
    std::string unknown;
    for (const auto& [k, v] : cfg_.values())
      if (!resolved_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty()) throw ConfigError("unknown configuration key(s): " + unknown);
  }

  /// Every key read, with the value used.
  const std::map<std::string, std::string>& resolved() const { return resolved_; }

  std::string resolved_text() const {
    std::string s;
    for (const auto& [k, v] : resolved_) s += k + " = " + v + "\n";
    return s;
  }

 private:
  const std::string* raw(const std::string& key) const {
    const auto it = cfg_.values().find(key);
    return it == cfg_.values().end() ? nullptr : &it->second;
  }

  static double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError(key + ": not a finite number: " + s);
    return v;
  }

  KeyValueConfig cfg_;
  std::map<std::string, std::string> resolved_;
};

}  // namespace ipgla
