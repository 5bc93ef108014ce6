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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "emocurate/media.hpp"
#include "emocurate/taxonomy.hpp"

namespace testing {

inline emocurate::AudioBuffer tone(double seconds, double amp = 1.0, double hz = 440.0, int rate = 16000) {
  emocurate::AudioBuffer b;
  b.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  b.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return b;
}

inline emocurate::AudioBuffer silence(double seconds, int rate = 16000) {
  emocurate::AudioBuffer b;
  b.sample_rate = rate;
  b.samples.assign(static_cast<std::size_t>(std::llround(seconds * rate)), 0.0);
  return b;
}

inline emocurate::AudioBuffer concat(std::initializer_list<emocurate::AudioBuffer> parts) {
  emocurate::AudioBuffer out;
  for (const auto& p : parts) {
    out.sample_rate = p.sample_rate;
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
  }
  return out;
}

inline emocurate::AudioBuffer white_noise(std::size_t n, double sigma, std::uint64_t seed, int rate = 16000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  emocurate::AudioBuffer b;
  b.sample_rate = rate;
  b.samples.resize(n);
  for (auto& s : b.samples) s = d(rng);
  return b;
}

/// Random vector with `k` non-zero entries on a 0.05 grid.
inline emocurate::EmotionVector random_vector(std::mt19937_64& rng, int k = 3) {
  emocurate::EmotionVector v;
  std::uniform_int_distribution<std::size_t> cat(0, emocurate::kNumCategories - 1);
  std::uniform_int_distribution<int> step(1, 20);
  for (int i = 0; i < k; ++i) v.set(emocurate::EmotionCategory::at(cat(rng)), step(rng) * 0.05);
  return v;
}

inline std::filesystem::path data_dir() {
  if (const char* d = std::getenv("EMOCURATE_DATA_DIR")) return d;
  return std::filesystem::path(__FILE__).parent_path().parent_path().parent_path() / "data";
}

}  // namespace testing
