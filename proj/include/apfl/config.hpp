#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace apfl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration with strict unknown-key rejection.
/// Lines starting with `#` are comments; blank lines ignored.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& name = "<string>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  bool get_bool(const std::string& key, bool def) const;

  /// Every key read so far; call after all gets to reject unknown keys.
  void reject_unknown_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> touched_;
  std::string name_;
};

}  // namespace apfl
