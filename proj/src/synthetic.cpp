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

#include "emocurate/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "emocurate/media.hpp"

namespace emocurate {

namespace {

constexpr std::uint8_t kBackground = 16;
constexpr int kFaceSize = 24;

std::uint8_t face_level(FaceMode m) {
  switch (m) {
    case FaceMode::kDim: return 140;
    case FaceMode::kTwoEqual: return 220;
    default: return 230;
  }
}

double voiced(double t, double f0) {
  double s = 0;
  for (int h = 1; h <= 4; ++h) s += std::sin(2.0 * std::numbers::pi * h * f0 * t) / h;
  return s / (1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4);
}

void fill_square(Frame& f, int x0, int y0, std::uint8_t level) {
  for (int y = std::max(0, y0); y < std::min(f.height, y0 + kFaceSize); ++y) {
    for (int x = std::max(0, x0); x < std::min(f.width, x0 + kFaceSize); ++x) {
      f.pixels[static_cast<std::size_t>(y) * f.width + x] = level;
    }
  }
}

}  // namespace

void write_synthetic_asset(const std::filesystem::path& path, const SyntheticAssetSpec& spec) {
  const auto frames_audio = static_cast<std::size_t>(std::llround(spec.duration * spec.sample_rate));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::vector<double> pcm(frames_audio * spec.channels);
  for (std::size_t i = 0; i < frames_audio; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    double v = spec.hum_amplitude * std::sin(2.0 * std::numbers::pi * 50.0 * t);
    for (const auto& u : spec.utterances) {
      const double r = t - u.start;
      if (r < 0 || r >= u.duration) continue;
      const double fade = std::min({1.0, r / 0.01, (u.duration - r) / 0.01});
      const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 3.0 * r);
      v += spec.voice_amplitude * fade * env * voiced(t, u.f0);
    }
    for (int c = 0; c < spec.channels; ++c) pcm[i * spec.channels + c] = v + noise(rng);
  }

  ContainerHeader h;
  h.resolution = {spec.width, spec.height};
  h.fps_num = static_cast<std::uint32_t>(spec.fps);
  h.fps_den = 1;
  h.sample_rate = static_cast<std::uint32_t>(spec.sample_rate);
  h.channels = static_cast<std::uint16_t>(spec.channels);
  const auto n_frames = static_cast<std::size_t>(std::floor(spec.duration * spec.fps));
  write_container(path, h, pcm, n_frames, [&](std::size_t k) {
    Frame f{spec.width, spec.height, std::vector<std::uint8_t>(static_cast<std::size_t>(spec.width) * spec.height, kBackground)};
    const double t = static_cast<double>(k) / spec.fps;
    for (const auto& u : spec.utterances) {
      if (u.face == FaceMode::kNone || t < u.start || t >= u.start + u.duration) continue;
      const int rel = static_cast<int>(std::floor((t - u.start) * spec.fps));
      const int y = (spec.height - kFaceSize) / 2;
      if (u.face == FaceMode::kTwoEqual) {
        fill_square(f, 4, y, face_level(u.face));
        fill_square(f, spec.width - kFaceSize - 4, y, face_level(u.face));
      } else {
        const int drift = std::min(rel, spec.width - kFaceSize - 16);
        fill_square(f, 8 + drift, y, face_level(u.face));
      }
    }
    return f;
  });
}

std::optional<DropReason> expected_fate(const SyntheticUtterance& u) {
  if (u.duration < 2.0) return DropReason::kTooShort;
  switch (u.face) {
    case FaceMode::kNone: return DropReason::kNoFace;
    case FaceMode::kDim: return DropReason::kBelowThreshold;
    case FaceMode::kTwoEqual: return DropReason::kMultiAmbiguous;
    case FaceMode::kSingle: break;
  }
  return std::nullopt;
}

std::vector<SyntheticAssetSpec> standard_corpus_specs() {
  using F = FaceMode;
  struct Row {
    double dur;
    F face;
  };
  const std::vector<std::vector<Row>> table = {
      {{3.0, F::kSingle}, {2.5, F::kSingle}, {3.0, F::kDim}, {4.0, F::kSingle}},
      {{3.0, F::kNone}, {3.5, F::kSingle}, {3.0, F::kTwoEqual}, {2.2, F::kSingle}},
      {{1.5, F::kSingle}, {3.0, F::kSingle}, {3.0, F::kSingle}, {2.5, F::kTwoEqual}},
      {{3.0, F::kSingle}, {2.6, F::kDim}, {3.2, F::kSingle}, {2.8, F::kNone}},
      {{4.0, F::kSingle}, {4.0, F::kSingle}, {1.4, F::kSingle}, {2.4, F::kSingle}},
      {},
      {{3.0, F::kTwoEqual}, {3.0, F::kSingle}, {2.8, F::kSingle}, {3.6, F::kSingle}},
      {{2.1, F::kSingle}, {3.0, F::kNone}, {3.0, F::kDim}, {3.3, F::kSingle}},
      {{3.0, F::kSingle}, {3.0, F::kSingle}, {3.0, F::kSingle}, {1.2, F::kSingle}},
      {{3.0, F::kSingle}, {3.0, F::kTwoEqual}, {3.0, F::kSingle}, {3.0, F::kSingle}, {3.0, F::kSingle}},
  };
  std::vector<SyntheticAssetSpec> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    SyntheticAssetSpec s;
    s.name = "synth" + std::to_string(i);
    s.seed = 1000 + i;
    s.duration = table[i].size() > 4 ? 24.0 : 20.0;
    if (i == 3) {
      s.sample_rate = 44100;
      s.channels = 2;
    }
    if (i == 8) {
      s.fps = 25;
      s.width = 128;
      s.height = 96;
    }
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      SyntheticUtterance u;
      u.start = 1.0 + 4.5 * static_cast<double>(j);
      u.duration = table[i][j].dur;
      u.face = table[i][j].face;
      u.f0 = 140.0 + 20.0 * static_cast<double>((i + j) % 5);
      s.utterances.push_back(u);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::filesystem::path> write_standard_corpus(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& s : standard_corpus_specs()) {
    auto p = dir / (s.name + ".rmc");
    write_synthetic_asset(p, s);
    paths.push_back(p);
  }
  return paths;
}

}  // namespace emocurate
