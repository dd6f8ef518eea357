#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace scsr {

/// Ordered key/value settings, serialized as flat `key = value` lines.
using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Throws ConfigError naming the line on malformed input or duplicate keys.
ConfigMap parse_config(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

std::string format_config(const ConfigMap& config);

/// Typed lookups that throw ConfigError naming the key on conversion failure.
double config_double(const ConfigMap& config, const std::string& key);
long long config_int(const ConfigMap& config, const std::string& key);
bool config_bool(const ConfigMap& config, const std::string& key);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace scsr
