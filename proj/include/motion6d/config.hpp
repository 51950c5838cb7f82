#pragma once
// Flat key-value configuration with dotted keys ("train.lr = 2e-4").
// Files hold one "key = value" per line; '#' starts a comment.
// Later sources override earlier ones, so CLI overrides are applied last.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace motion6d {

class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config parse(std::istream& is, const std::string& origin = "<stream>");

  /// "key=value"; throws ConfigError on a missing '='.
  void apply_override(const std::string& assignment);
  void merge(const Config& other);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  template <typename T>
  void set(const std::string& key, T value) {
    values_[key] = std::to_string(value);
  }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  std::string require_string(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Writes every key in sorted order; parse(write(c)) == c.
  void write(std::ostream& os) const;
  void write_file(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace motion6d
