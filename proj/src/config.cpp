#include "apfl/config.hpp"

#include <fstream>
#include <sstream>

namespace apfl {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

Config Config::parse(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.values_.count(key))
      throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  touched_[key] = true;
  const auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
  touched_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name_ + ": key '" + key + "': invalid number '" + it->second + "'");
  }
}

int Config::get_int(const std::string& key, int def) const {
  touched_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name_ + ": key '" + key + "': invalid integer '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  touched_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError(name_ + ": key '" + key + "': invalid boolean '" + it->second + "'");
}

void Config::reject_unknown_keys() const {
  for (const auto& [key, value] : values_)
    if (!touched_.count(key))
      throw ConfigError(name_ + ": unknown key '" + key + "'");
}

}  // namespace apfl
