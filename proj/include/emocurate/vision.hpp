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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emocurate/audio.hpp"
#include "emocurate/error.hpp"
#include "emocurate/media.hpp"

namespace emocurate {

/// Axis-aligned box in pixels, (x, y) is the top-left corner.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

struct Detection {
  Box box;
  double confidence = 0;
};

struct FaceBox {
  std::size_t frame_index = 0;  ///< absolute frame index in the asset
  Box box;
  double confidence = 0;
};

struct FaceTrack {
  int track_id = 0;
  std::vector<FaceBox> boxes;
  std::vector<double> speaker_scores;  ///< empty until scored
};

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::string name() const = 0;
  virtual AdapterCaps caps() const { return {}; }
  virtual void check() const {}
  virtual std::vector<Detection> detect(const Frame& frame) = 0;
};

/// Every 4-connected component of pixels >= `on_level` with at least
/// `min_area` pixels is a face; confidence is its mean brightness / 255.
class MockFaceDetector final : public FaceDetector {
 public:
  explicit MockFaceDetector(std::uint8_t on_level = 128, std::size_t min_area = 16)
      : on_level_(on_level), min_area_(min_area) {}
  std::string name() const override { return "mock"; }
  std::vector<Detection> detect(const Frame& frame) override;

 private:
  std::uint8_t on_level_;
  std::size_t min_area_;
};

/// Out-of-process backend: `<command> <frame.pgm>` prints `x y w h confidence`
/// lines.
class CommandFaceDetector final : public FaceDetector {
 public:
  explicit CommandFaceDetector(std::string command) : command_(std::move(command)) {}
  std::string name() const override { return "command:" + command_; }
  AdapterCaps caps() const override { return {false, 1}; }
  void check() const override;
  std::vector<Detection> detect(const Frame& frame) override;

 private:
  std::string command_;
};

/// Runs the detector on every `stride`-th frame, clips boxes to the frame,
/// and keeps detections with confidence >= `min_confidence`.
/// Adapter failures raise StageError(detection-failed).
std::vector<FaceBox> detect_faces(const FrameSequence& frames, FaceDetector& det, double min_confidence = 0.5,
                                  std::size_t stride = 1, const std::string& context = {});

struct TrackingConfig {
  double iou_threshold = 0.5;
  std::size_t max_gap = 10;  ///< frames; a longer gap closes the track
};

/// Greedy per-frame linking. Within a frame, candidate (track, box) pairs are
/// taken in order of decreasing IoU, ties to the lower track_id, then the
/// earlier box. Track ids follow creation order starting at 0.
std::vector<FaceTrack> link_tracks(std::vector<FaceBox> boxes, const TrackingConfig& cfg = {});

/// Per-box active-speaker probabilities in [0, 1].
class ActiveSpeakerScorer {
 public:
  virtual ~ActiveSpeakerScorer() = default;
  virtual std::string name() const = 0;
  virtual AdapterCaps caps() const { return {}; }
  virtual void check() const {}
  virtual std::vector<double> score(const FaceTrack& track, const AudioBuffer& audio) = 0;
};

class ConstantScorer final : public ActiveSpeakerScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  std::string name() const override { return "constant"; }
  std::vector<double> score(const FaceTrack& track, const AudioBuffer&) override {
    return std::vector<double>(track.boxes.size(), value_);
  }

 private:
  double value_;
};

/// Replays a fixed score sequence per track id (cycled to the track length).
class ScriptedScorer final : public ActiveSpeakerScorer {
 public:
  explicit ScriptedScorer(std::map<int, std::vector<double>> scripts) : scripts_(std::move(scripts)) {}
  std::string name() const override { return "scripted"; }
  std::vector<double> score(const FaceTrack& track, const AudioBuffer&) override;

 private:
  std::map<int, std::vector<double>> scripts_;
};

/// Pipeline mock: the score of a box is its detection confidence.
class ConfidenceScorer final : public ActiveSpeakerScorer {
 public:
  std::string name() const override { return "mock"; }
  std::vector<double> score(const FaceTrack& track, const AudioBuffer&) override;
};

enum class SelectionReason { kSelected, kNoFace, kBelowThreshold, kMultiAmbiguous };

const char* to_string(SelectionReason r) noexcept;

struct SpeakerSelection {
  std::optional<int> chosen_track;
  double mean_score = 0;
  SelectionReason reason = SelectionReason::kNoFace;
};

struct SelectionConfig {
  double min_mean = 0.5;
  double ambiguity_margin = 0.05;
};

/// Scores every track (filling `speaker_scores`) and picks the one with the
/// highest mean. Invalid scorer output raises StageError(scoring-failed).
SpeakerSelection select_speaker(std::vector<FaceTrack>& tracks, ActiveSpeakerScorer& scorer,
                                const AudioBuffer& audio, const SelectionConfig& cfg = {},
                                const std::string& context = {});

/// Drop reason for a non-selected outcome.
DropReason drop_reason_for(SelectionReason r);

struct CropEntry {
  std::size_t frame_index = 0;
  std::string file;
  friend bool operator==(const CropEntry&, const CropEntry&) = default;
};

/// Directory of 8-bit PGM crops plus `index.tsv` (frame_index, file).
struct CropBundle {
  std::filesystem::path dir;
  std::vector<CropEntry> entries;
};

/// Writes a crop of every `stride`-th box of `track` taken from `frames`.
CropBundle write_crops(const std::filesystem::path& dir, const FrameSequence& frames, const FaceTrack& track,
                       std::size_t stride = 1);
CropBundle read_crop_index(const std::filesystem::path& dir);

std::string encode_pgm(const Frame& f);
Frame decode_pgm(const std::string& bytes);

}  // namespace emocurate
