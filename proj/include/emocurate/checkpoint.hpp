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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emocurate {

/// Writes `payload` as one JSON line followed by `sha256:<hex of that line>`,
/// atomically.
void write_checkpoint_file(const std::filesystem::path& path, const nlohmann::json& payload);

/// Throws Error(kIntegrity) if the file is truncated, malformed, or its
/// digest does not match.
nlohmann::json read_checkpoint_file(const std::filesystem::path& path);

/// Directory of checkpoint files addressed by relative name (`a/b` maps to
/// `<dir>/a/b.ckpt`).
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void put(const std::string& name, const nlohmann::json& payload) const;
  std::optional<nlohmann::json> get(const std::string& name) const;
  bool has(const std::string& name) const;
  /// Reads every checkpoint file; throws Error(kIntegrity) on the first bad
  /// one. Leftover temporaries from an interrupted write are removed.
  std::size_t verify_all() const;

 private:
  std::filesystem::path path_for(const std::string& name) const;
  std::filesystem::path dir_;
};

}  // namespace emocurate
