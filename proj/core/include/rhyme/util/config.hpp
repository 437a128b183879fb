// Copyright 2026 The Rhyme Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rhyme {

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised configuration key with its default. Keys are dotted
/// (`section.name`); sections are trace, spec, cluster, cost, sim.
const std::vector<ConfigKey>& config_schema();

/// Flat key/value configuration.
///
/// File syntax is one `key = value` per line; `#` starts a comment, blank
/// lines are ignored and later assignments override earlier ones. Keys not
/// in config_schema() are rejected with ConfigError.
class Config {
 public:
  /// All schema keys at their defaults.
  Config();

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(std::string_view key, std::string value);
  /// Applies `key=value` overrides (as given on a command line).
  void apply_overrides(const std::vector<std::string>& assignments);

  [[nodiscard]] const std::string& get(std::string_view key) const;
  [[nodiscard]] std::string get_string(std::string_view key) const { return get(key); }
  [[nodiscard]] double get_double(std::string_view key) const;
  [[nodiscard]] std::int64_t get_int(std::string_view key) const;
  [[nodiscard]] bool get_bool(std::string_view key) const;

  /// Serialises every key (schema order) back into the file syntax.
  [[nodiscard]] std::string dump() const;

  [[nodiscard]] const std::map<std::string, std::string, std::less<>>& values() const {
    return values_;
  }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Usage block listing every key and its default, one per line.
std::string config_help();

}  // namespace rhyme
