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

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emocurate/media.hpp"

namespace emocurate {

/// Declared by every model adapter; the orchestrator caps pool width with it.
struct AdapterCaps {
  bool concurrent_safe = true;
  std::size_t max_concurrency = 0;  ///< 0 means unbounded

  std::size_t effective_width(std::size_t requested) const;
};

struct SeparationResult {
  AudioBuffer vocals;
  AudioBuffer accompaniment;
};

/// Music source separation backend.
class SourceSeparator {
 public:
  virtual ~SourceSeparator() = default;
  virtual std::string name() const = 0;
  virtual AdapterCaps caps() const { return {}; }
  /// Throws Error(kConfig) when the backend cannot be reached.
  virtual void check() const {}
  virtual SeparationResult separate(const AudioBuffer& mix) = 0;
};

/// Identity vocals, silent accompaniment.
class MockSeparator final : public SourceSeparator {
 public:
  std::string name() const override { return "mock"; }
  SeparationResult separate(const AudioBuffer& mix) override;
};

/// Reference separator: vocals are the mix through a 4th-order band-pass
/// (two high-pass and two low-pass biquads); accompaniment is the residual.
class BandpassSeparator final : public SourceSeparator {
 public:
  BandpassSeparator(double low_hz = 300.0, double high_hz = 3400.0) : low_hz_(low_hz), high_hz_(high_hz) {}
  std::string name() const override { return "bandpass"; }
  SeparationResult separate(const AudioBuffer& mix) override;

 private:
  double low_hz_;
  double high_hz_;
};

/// Out-of-process backend: `<command> <in.wav> <vocals.wav> <accompaniment.wav>`.
class CommandSeparator final : public SourceSeparator {
 public:
  explicit CommandSeparator(std::string command) : command_(std::move(command)) {}
  std::string name() const override { return "command:" + command_; }
  AdapterCaps caps() const override { return {false, 1}; }
  void check() const override;
  SeparationResult separate(const AudioBuffer& mix) override;

 private:
  std::string command_;
};

/// Runs the adapter and checks its output shape. Adapter failures surface as
/// Error(kStage) carrying `context`.
SeparationResult separate_vocals(const AudioBuffer& audio, SourceSeparator& separator,
                                 const std::string& context = {});

struct VadConfig {
  int frame_ms = 30;
  double energy_threshold_db = -40.0;  ///< dBFS, full scale = 1.0
  int hangover_frames = 1;
  double min_speech_s = 1.0;
  double merge_gap_s = 0.3;

  /// Throws Error(kConfig).
  void validate() const;
};

/// Per-frame RMS level in dBFS; trailing partial frames are included.
/// Digital silence maps to -infinity.
std::vector<double> frame_levels_db(const AudioBuffer& audio, int frame_ms);

/// Energy-threshold speech detection. Frames above threshold are speech;
/// each run is extended by `hangover_frames`, runs separated by less than
/// `merge_gap_s` are merged, and runs shorter than `min_speech_s` dropped.
/// Output spans are sorted, disjoint, and clipped to the buffer.
std::vector<SegmentSpan> vad_segment(const AudioBuffer& audio, const VadConfig& cfg,
                                     const std::string& asset_id = {});

/// 10*log10(P_signal / P_noise) with P the mean squared amplitude.
/// Throws Error(kRange) on length mismatch, Error(kDomain) on silent noise.
double compute_snr(const AudioBuffer& signal, const AudioBuffer& noise);

/// Mean power inside `speech` spans over mean power outside them, in dB.
/// Absent when either side has no samples or the outside is silent.
std::optional<double> speech_to_gap_snr_db(const AudioBuffer& audio, std::span<const SegmentSpan> speech);

struct WordTiming {
  std::string token;
  double start = 0;  ///< absolute seconds in the asset
  double end = 0;
  friend bool operator==(const WordTiming&, const WordTiming&) = default;
};

struct SpeechSegment {
  SegmentSpan span;
  AudioBuffer audio;
  std::string transcript;
  std::vector<WordTiming> words;
  std::optional<double> snr_db;

  std::string segment_id() const;
};

/// `<asset_id>_<start in ms, 8 digits>`; sorts like (asset_id, start).
std::string make_segment_id(const std::string& asset_id, double start_s);

/// Speech recognition backend. Word times are relative to the clip start.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string name() const = 0;
  virtual AdapterCaps caps() const { return {}; }
  virtual void check() const {}
  virtual std::vector<WordTiming> transcribe(const AudioBuffer& clip) = 0;
};

/// Deterministic stand-in: the transcript is drawn from a fixed vocabulary
/// by a SHA-256 chain over the sample bytes, with N = max(1, floor(L / 0.45))
/// tokens for a clip of L seconds; token k spans [k*L/N, (k+1)*L/N).
/// Clips shorter than `min_duration_s` produce no text.
class MockTranscriber final : public Transcriber {
 public:
  explicit MockTranscriber(double min_duration_s = 2.0) : min_duration_s_(min_duration_s) {}
  std::string name() const override { return "mock"; }
  std::vector<WordTiming> transcribe(const AudioBuffer& clip) override;

 private:
  double min_duration_s_;
};

/// Out-of-process backend: `<command> <clip.wav>` prints one
/// `token<TAB>start<TAB>end` line per word.
class CommandTranscriber final : public Transcriber {
 public:
  explicit CommandTranscriber(std::string command) : command_(std::move(command)) {}
  std::string name() const override { return "command:" + command_; }
  AdapterCaps caps() const override { return {false, 1}; }
  void check() const override;
  std::vector<WordTiming> transcribe(const AudioBuffer& clip) override;

 private:
  std::string command_;
};

/// Fills transcript and absolute word timings. Empty text raises
/// StageError(too-short); adapter failures and invalid timings raise
/// StageError(transcription-failed).
SpeechSegment transcribe(SpeechSegment seg, Transcriber& asr);

void to_json(nlohmann::json& j, const WordTiming& w);
void from_json(const nlohmann::json& j, WordTiming& w);

}  // namespace emocurate
