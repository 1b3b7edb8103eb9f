#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace looplab {

// Plain-text run configuration shared by all CLI subcommands:
//
//   # comment
//   order = 2
//   [doublecup]
//   delta = 1.4142135623730951
//
// Keys before the first section header are global; a key inside [name] is
// stored as "name.key". Lookups for a subcommand try "subcommand.key" first.
class RunConfig {
 public:
  static RunConfig parse(std::istream& is);
  static RunConfig parse_text(const std::string& text);
  static RunConfig load(const std::string& path);

  // Canonical text form; parse_text(to_text()) reproduces the config.
  std::string to_text() const;

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  // Value for key, preferring the section of the given subcommand.
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  // Comma-separated list (empty value gives an empty list).
  std::vector<std::string> get_list(const std::string& key, char sep = ',') const;
  std::vector<double> get_doubles(const std::string& key) const;

  std::string subcommand;
  const std::map<std::string, std::string>& values() const { return values_; }
  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.subcommand == b.subcommand && a.values_ == b.values_;
  }

 private:
  std::string resolve(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

// Formats a double with 17 significant digits.
std::string format_double(double x);

}  // namespace looplab
