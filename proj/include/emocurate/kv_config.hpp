// Copyright 2026 The emocurate Authors. All Rights Reserved.
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

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace emocurate {

/// One `key = value` line. Lines under a `[section]` header carry that
/// section name; `#` starts a comment line.
struct KvEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<KvEntry> parse_kv_entries(std::string_view text, std::string_view source);

/// Flat key/value configuration. Section entries are addressed as
/// `section.key`. Accessors remember which keys were read so callers can
/// reject typos via `unused_keys()`.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig parse(std::string_view text, std::string_view source = "<config>");
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  void set(const std::string& key, std::string value);
  const std::map<std::string, std::string>& values() const { return values_; }

  std::vector<std::string> unused_keys() const;
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace emocurate
