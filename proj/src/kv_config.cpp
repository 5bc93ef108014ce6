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

#include "emocurate/kv_config.hpp"

#include "emocurate/error.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

std::vector<KvEntry> parse_kv_entries(std::string_view text, std::string_view source) {
  std::vector<KvEntry> out;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(ErrorKind::kParse, "malformed section header", where);
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kParse, "expected 'key = value'", where);
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::kParse, "empty key", where);
    out.push_back(KvEntry{section, std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return out;
}

KvConfig KvConfig::parse(std::string_view text, std::string_view source) {
  KvConfig cfg;
  for (auto& e : parse_kv_entries(text, source)) {
    std::string key = e.section.empty() ? e.key : e.section + "." + e.key;
    if (cfg.values_.count(key)) {
      throw Error(ErrorKind::kConfig, "duplicate key", std::string(source) + ":" + key);
    }
    cfg.values_[key] = e.value;
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::optional<std::string> KvConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_double(*v, key) : fallback;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  return v ? parse_int(*v, key) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  return v ? parse_bool(*v, key) : fallback;
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
  auto v = get(key);
  if (!v || trim(*v).empty()) return {};
  return split(*v, ',');
}

void KvConfig::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

std::vector<std::string> KvConfig::unused_keys() const {
  std::vector<std::string> out;
  for (auto& [k, v] : values_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

std::string KvConfig::to_text() const {
  std::string out;
  for (auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace emocurate
