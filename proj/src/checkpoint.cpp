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

#include "emocurate/checkpoint.hpp"

#include "emocurate/digest.hpp"
#include "emocurate/error.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;

void write_checkpoint_file(const fs::path& path, const nlohmann::json& payload) {
  const std::string line = payload.dump();
  write_file_atomic(path, line + "\nsha256:" + sha256_hex(line) + "\n");
}

nlohmann::json read_checkpoint_file(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kIntegrity, e.what(), path.string());
  }
  const auto nl = text.find('\n');
  if (nl == std::string::npos) throw Error(ErrorKind::kIntegrity, "truncated checkpoint", path.string());
  const std::string line = text.substr(0, nl);
  const std::string rest = text.substr(nl + 1);
  const std::string expect = "sha256:" + sha256_hex(line) + "\n";
  if (rest != expect) throw Error(ErrorKind::kIntegrity, "checkpoint digest mismatch or truncated", path.string());
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kIntegrity, "checkpoint payload is not JSON", path.string());
  return j;
}

CheckpointStore::CheckpointStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path CheckpointStore::path_for(const std::string& name) const { return dir_ / (name + ".ckpt"); }

void CheckpointStore::put(const std::string& name, const nlohmann::json& payload) const {
  write_checkpoint_file(path_for(name), payload);
}

std::optional<nlohmann::json> CheckpointStore::get(const std::string& name) const {
  const auto p = path_for(name);
  if (!fs::exists(p)) return std::nullopt;
  return read_checkpoint_file(p);
}

bool CheckpointStore::has(const std::string& name) const { return fs::exists(path_for(name)); }

std::size_t CheckpointStore::verify_all() const {
  std::size_t n = 0;
  std::vector<fs::path> stale;
  for (const auto& e : fs::recursive_directory_iterator(dir_)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.find(".tmp.") != std::string::npos) {
      stale.push_back(e.path());
    } else if (e.path().extension() == ".ckpt") {
      read_checkpoint_file(e.path());
      ++n;
    }
  }
  for (const auto& p : stale) fs::remove(p);
  return n;
}

}  // namespace emocurate
