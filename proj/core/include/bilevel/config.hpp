#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat dotted-key configuration:
///   key.subkey = value        one per line
///   # comment                 blank lines ignored
/// Values are kept verbatim, so serialize() then parse() round-trips exactly.
/// Unknown keys are rejected at validation time against the per-command key
/// set; there are no environment-variable overrides except the output
/// directory handled by the command line.
class ExperimentConfig {
 public:
  static ExperimentConfig parse_string(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);
  std::string serialize() const;  // sorted keys, canonical "key = value" lines

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  /// Throws ConfigError naming the key when absent.
  std::string require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma-separated
  std::vector<int> get_int_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  const std::map<std::string, std::string>& raw() const { return kv_; }

  /// Rejects keys outside the command's documented set, naming the offender.
  void validate_keys(const std::string& command) const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace bilevel
