#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "microtele/scenarios.hpp"

namespace microtele {

inline constexpr int kConfigSchema = 1;

struct ParsedConfig {
  ScenarioConfig config;
  /// Paths of every key that was filled from the scenario defaults, e.g.
  /// "dt", "force_gains.f_max", "objects[0].fixed".
  std::vector<std::string> defaults;
};

/// Parses a schema-1 JSON scenario document. Throws ConfigurationError for
/// syntax errors (with line and column), unknown or missing keys, wrong types
/// and out-of-range values; messages name the offending key path.
ParsedConfig parse_config(std::string_view text);

/// Canonical document with every key spelled out.
std::string emit_config(const ScenarioConfig& config);

ParsedConfig load_config_file(const std::string& path);

}  // namespace microtele
