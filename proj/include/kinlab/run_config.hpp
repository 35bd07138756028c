#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace kinlab {

/**
 * Sectioned key = value configuration.
 *
 * Keys outside the schema are rejected at parse time.  Typed getters record
 * the resolved value (explicit or default) so every run can echo the
 * configuration it actually used.
 */
class RunConfig
{
 public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  /// Comma- or whitespace-separated reals.
  std::vector<double> get_list(const std::string& section, const std::string& key,
                               const std::vector<double>& fallback) const;

  /// Resolved values of every key read so far plus every key given explicitly.
  nlohmann::json echo() const;

  /// Allowed keys per section.
  static const std::map<std::string, std::vector<std::string>>& schema();

 private:
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;
  void record(const std::string& section, const std::string& key, nlohmann::json value) const;

  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::map<std::string, std::map<std::string, nlohmann::json>> resolved_;
};

}  // namespace kinlab
