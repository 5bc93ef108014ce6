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
#include <optional>
#include <string>
#include <vector>

#include "emocurate/error.hpp"

namespace emocurate {

/// What the video shows while an utterance plays.
enum class FaceMode {
  kNone,      ///< no face on screen
  kSingle,    ///< one bright face
  kDim,       ///< one face detected with low confidence
  kTwoEqual,  ///< two equally bright faces
};

struct SyntheticUtterance {
  double start = 0;     ///< seconds
  double duration = 3;  ///< seconds
  double f0 = 180;      ///< fundamental of the voiced tone, Hz
  FaceMode face = FaceMode::kSingle;
};

struct SyntheticAssetSpec {
  std::string name;
  double duration = 20;
  int sample_rate = 16000;
  int channels = 1;
  int fps = 10;
  int width = 96;
  int height = 72;
  double voice_amplitude = 0.3;
  double noise_sigma = 0.002;  ///< white noise floor, about -54 dBFS
  double hum_amplitude = 0.02; ///< 50 Hz hum outside the vocal band
  std::uint64_t seed = 1;
  std::vector<SyntheticUtterance> utterances;
};

/// Renders `spec` to a native container at `path`. Utterances are
/// amplitude-modulated harmonic tones; faces are bright squares drifting one
/// pixel per frame. Output is a pure function of `spec`.
void write_synthetic_asset(const std::filesystem::path& path, const SyntheticAssetSpec& spec);

/// Where a pipeline run with default settings and mock adapters takes an
/// utterance: nullopt means annotated.
std::optional<DropReason> expected_fate(const SyntheticUtterance& u);

/// Ten assets covering every vision outcome, short utterances, a stereo
/// 44.1 kHz source, and an asset without speech.
std::vector<SyntheticAssetSpec> standard_corpus_specs();

/// Writes `standard_corpus_specs()` into `dir` and returns the file paths
/// in spec order.
std::vector<std::filesystem::path> write_standard_corpus(const std::filesystem::path& dir);

}  // namespace emocurate
