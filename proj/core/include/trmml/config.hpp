/*
 * Copyright 2026 The trmml Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TRMML_CONFIG_HPP_
#define TRMML_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trmml {

// Flat UTF-8 "key = value" text. '#' starts a comment; blank lines are
// ignored; later duplicates override earlier ones. Used for run configs,
// dataset manifests and checkpoint manifests.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text,
                              std::string_view source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, bool value);
  void merge(const KeyValueConfig& overrides);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;

  // Accessors throw ConfigParse naming the field on missing/malformed values.
  std::string require(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          std::vector<std::uint64_t> fallback) const;

  // Sorted "key = value" lines; parse(serialize()) round-trips.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

std::string format_double(double v);
std::string hex64(std::uint64_t v);

}  // namespace trmml

#endif  // TRMML_CONFIG_HPP_
