#include "scsr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "scsr/errors.hpp"

namespace scsr {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const std::string& lookup(const ConfigMap& config, const std::string& key) {
  auto it = config.find(key);
  if (it == config.end()) throw ConfigError(fmt::format("missing config key '{}'", key));
  return it->second;
}

}  // namespace

ConfigMap parse_config(const std::string& text) {
  ConfigMap config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
    if (!config.emplace(key, value).second) throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
  }
  return config;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [key, value] : config) out += fmt::format("{} = {}\n", key, value);
  return out;
}

double config_double(const ConfigMap& config, const std::string& key) {
  const std::string& text = lookup(config, key);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("config key '{}': '{}' is not a number", key, text));
  }
  return value;
}

long long config_int(const ConfigMap& config, const std::string& key) {
  const std::string& text = lookup(config, key);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("config key '{}': '{}' is not an integer", key, text));
  }
  return value;
}

bool config_bool(const ConfigMap& config, const std::string& key) {
  const std::string& text = lookup(config, key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(fmt::format("config key '{}': '{}' is not a boolean", key, text));
}

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

}  // namespace scsr
