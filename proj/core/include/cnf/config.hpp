#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cnf {

/// Allowed keys per section.
using ConfigSchema = std::map<std::string, std::set<std::string>>;

/// Flat run configuration:
///
///   # comment
///   [section]
///   key = value          # trailing comment
///   op = "dt + beta*dx"  # quotes keep '#' and surrounding spaces
///
/// Section and key names use [A-Za-z0-9_.-]. Lists are comma separated.
/// Every error is a ConfigError carrying the 1-based line.
class RunConfig {
 public:
  static RunConfig parse(const std::string& text);
  /// Throws ConfigError (line 0) when the file cannot be read.
  static RunConfig load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
  /// 1-based line of a key, 0 when absent or set programmatically.
  std::size_t line(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  std::uint64_t get_seed(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& section, const std::string& key, const std::vector<int>& fallback) const;

  /// Sets or overrides a value (line 0).
  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Rejects unknown sections and keys, reporting the first offending line.
  void check_schema(const ConfigSchema& schema) const;

  /// Value of [run] demo, or "" when absent.
  std::string demo() const { return get_string("run", "demo", ""); }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* find(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, std::size_t> section_lines_;
};

}  // namespace cnf
