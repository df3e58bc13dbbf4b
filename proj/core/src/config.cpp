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

#include "trmml/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "trmml/error.hpp"

namespace trmml {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw Error(Errc::kConfigParse,
              "field '" + key + "' = '" + value + "' is not " + expected);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text,
                                     std::string_view source) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::kConfigParse, std::string(source) + ":" +
                                          std::to_string(line_no) +
                                          ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw Error(Errc::kConfigParse, std::string(source) + ":" +
                                          std::to_string(line_no) + ": empty key");
    }
    cfg.entries_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Errc::kConfigParse, "cannot read config file " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse(text, path.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}
void KeyValueConfig::set(const std::string& key, double value) {
  entries_[key] = format_double(value);
}
void KeyValueConfig::set(const std::string& key, std::int64_t value) {
  entries_[key] = std::to_string(value);
}
void KeyValueConfig::set(const std::string& key, std::uint64_t value) {
  entries_[key] = std::to_string(value);
}
void KeyValueConfig::set(const std::string& key, bool value) {
  entries_[key] = value ? "true" : "false";
}

void KeyValueConfig::merge(const KeyValueConfig& overrides) {
  for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

std::string KeyValueConfig::require(const std::string& key) const {
  auto v = get(key);
  if (!v || v->empty()) {
    throw Error(Errc::kConfigParse, "missing required field '" + key + "'");
  }
  return *v;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) bad_value(key, *v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, *v, "a number");
  }
}

std::int64_t KeyValueConfig::get_int(const std::string& key,
                                     std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) bad_value(key, *v, "an integer");
  return out;
}

std::size_t KeyValueConfig::get_size(const std::string& key,
                                     std::size_t fallback) const {
  const auto v = get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) bad_value(key, std::to_string(v), "a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(key, *v, "a boolean");
}

std::vector<std::uint64_t> KeyValueConfig::get_u64_list(
    const std::string& key, std::vector<std::uint64_t> fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<std::uint64_t> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size()) {
      bad_value(key, *v, "a comma-separated list of integers");
    }
    out.push_back(x);
  }
  if (out.empty()) bad_value(key, *v, "a non-empty list");
  return out;
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << serialize();
  if (!out) throw Error(Errc::kIoError, "write failed: " + path.string());
}

}  // namespace trmml
