#pragma once

// Line-oriented key=value configuration with dotted keys. A "[section]"
// line prefixes the following keys with "section.". Lines starting with '#'
// or ';' are comments. Later assignments override earlier ones.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "psdml/enhancer.hpp"
#include "psdml/simulator.hpp"

namespace psdml {

class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigMap load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  /// "key=value"
  void set_assignment(const std::string& assignment);
  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws ConfigError naming every key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<double> parse_number_list(const std::string& text);

/// Keys understood by the simulate and bounds subcommands.
const std::set<std::string>& scenario_keys();
/// Keys understood by the enhance subcommand.
const std::set<std::string>& enhancer_keys();

ScenarioConfig scenario_from_config(const ConfigMap& map);
EnhancerConfig enhancer_from_config(const ConfigMap& map);

/// Fully resolved settings, one "key = value" per line, keys sorted.
std::string describe(const ScenarioConfig& c);
std::string describe(const EnhancerConfig& c);

}  // namespace psdml
