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
#include <string>
#include <string_view>
#include <vector>

namespace emocurate {

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep, bool trim_parts = true);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Strict full-string number parsing; throws Error(kParse) naming `what`.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

/// Write to `<path>.tmp.<unique>` then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace emocurate
