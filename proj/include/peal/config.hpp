#pragma once

#include "peal/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace peal {

// Flat key-value file with [section] headers. '#' starts a comment line.
// Keys outside any section belong to "run".
class RunConfig {
 public:
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_string() const;

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::string value);

  // Typed getters. Malformed values throw ParameterError naming section.key.
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  std::uint64_t get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  // Comma-separated; an empty value is rejected as an empty grid.
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<long> get_ints(const std::string& section, const std::string& key,
                             const std::vector<long>& fallback) const;

  // [model] section merged over `base`, then validated.
  HolsteinParams holstein(HolsteinParams base = {}) const;

  bool operator==(const RunConfig& o) const { return sections_ == o.sections_; }

 private:
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections_;
};

}  // namespace peal
