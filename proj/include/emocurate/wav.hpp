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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace emocurate {

/// Decoded RIFF/WAVE contents; samples are interleaved and scaled to [-1, 1].
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<double> samples;

  std::size_t frames() const { return channels ? samples.size() / static_cast<std::size_t>(channels) : 0; }
  double duration_s() const { return sample_rate ? static_cast<double>(frames()) / sample_rate : 0.0; }
};

/// 16-bit PCM mono encoding; out-of-range samples are clipped.
std::string encode_wav_pcm16(std::span<const double> mono, int sample_rate);

/// Accepts PCM 16/24/32-bit and IEEE float 32-bit.
WavData decode_wav(std::span<const std::uint8_t> bytes);

WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const double> mono, int sample_rate);

}  // namespace emocurate
