#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace metaexo {

/// Plain-text key=value run configuration.
///
/// Sources are applied in order: built-in defaults, config file, environment
/// (METAEXO_<KEY> with the key upper-cased), then explicit set() calls from
/// command-line flags. Unknown keys are rejected. Path-valued keys that are
/// set must point at existing files/directories by the time validate_paths()
/// runs.
class RunConfig {
 public:
  enum class Type { kInt, kDouble, kBool, kString, kPath };

  RunConfig();

  void load_file(const std::filesystem::path& path);
  void apply_env();
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  Type type(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;

  /// Checks that every non-empty path-typed key refers to an existing path.
  void validate_paths() const;

  /// Key/value view in registry order, for echoing into reports.
  std::vector<std::pair<std::string, std::string>> items() const;

 private:
  struct Entry {
    Type type;
    std::string value;
  };
  const Entry& entry(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

}  // namespace metaexo
