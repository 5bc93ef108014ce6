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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emocurate {

/// Every stage downstream of ingest sees 16 kHz mono.
inline constexpr int kCanonicalSampleRate = 16000;

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  /// Non-empty, positive rate, all samples finite. Throws Error(kDomain).
  void validate(const std::string& context = {}) const;
};

struct Resolution {
  int width = 0;
  int height = 0;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct MediaAsset {
  std::string asset_id;  ///< leading 16 hex digits of the SHA-256 of the file bytes
  std::string uri;
  double duration = 0;     ///< seconds
  double frame_rate = 0;   ///< frames per second
  Resolution resolution;
  int sample_rate = 0;     ///< source rate, before canonicalisation
  int channels = 0;

  friend bool operator==(const MediaAsset&, const MediaAsset&) = default;
};

void to_json(nlohmann::json& j, const MediaAsset& a);
void from_json(const nlohmann::json& j, MediaAsset& a);

struct SegmentSpan {
  std::string asset_id;
  double start = 0;
  double end = 0;

  double duration() const { return end - start; }
  friend bool operator==(const SegmentSpan&, const SegmentSpan&) = default;
};

/// Throws Error(kRange) unless 0 <= start < end <= duration and the span is
/// at least `min_duration` long.
void validate_span(const MediaAsset& asset, const SegmentSpan& span, double min_duration = 0.0);

/// 8-bit grayscale image, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Lazily decoded run of consecutive video frames.
class FrameSequence {
 public:
  using Loader = std::function<Frame(std::size_t absolute_index)>;

  FrameSequence() = default;
  FrameSequence(std::size_t first_index, std::size_t count, Loader loader)
      : first_(first_index), count_(count), loader_(std::move(loader)) {}

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t first_index() const { return first_; }
  /// `i` is relative to the start of the sequence.
  Frame frame(std::size_t i) const;

 private:
  std::size_t first_ = 0;
  std::size_t count_ = 0;
  Loader loader_;
};

struct Clip {
  SegmentSpan span;
  AudioBuffer audio;
  FrameSequence frames;
};

struct MediaOptions {
  std::string ffprobe = "ffprobe";
  std::string ffmpeg = "ffmpeg";
};

/// A registered, probed media file with decoded access.
class MediaSource {
 public:
  virtual ~MediaSource() = default;
  virtual const MediaAsset& asset() const = 0;
  /// Whole track at 16 kHz mono; decoded once on first use.
  virtual const AudioBuffer& canonical_audio() const = 0;
  virtual std::size_t frame_count() const = 0;
  virtual Frame decode_frame(std::size_t index) const = 0;
};

/// Probes `uri` and opens it. Native `.rmc` containers are read in-process;
/// anything else goes through ffprobe/ffmpeg subprocesses.
/// Throws Error(kIo) for unreadable or empty files and Error(kMissingStream)
/// when there is no audio stream.
std::shared_ptr<MediaSource> open_media(const std::string& uri, const MediaOptions& opts = {});

/// Probe-only convenience wrapper around open_media().
MediaAsset register_asset(const std::string& uri, const MediaOptions& opts = {});

/// Audio covers sample indices [round(start*sr), round(end*sr)) of the
/// canonical track, so slices over a partition concatenate losslessly.
/// Frames are those whose timestamp k/fps lies in [start, end).
Clip slice_segment(const MediaSource& source, const SegmentSpan& span);

/// Same slicing rule applied to an already decoded canonical buffer.
AudioBuffer slice_audio(const AudioBuffer& audio, double start, double end);

/// Keeps the run's asset manifest; registration is idempotent per uri and
/// appends are serialised.
class MediaRegistry {
 public:
  explicit MediaRegistry(MediaOptions opts = {},
                         std::optional<std::filesystem::path> manifest_path = std::nullopt);

  MediaAsset register_asset(const std::string& uri);
  std::shared_ptr<MediaSource> source(const std::string& asset_id) const;
  std::vector<MediaAsset> assets() const;

 private:
  MediaOptions opts_;
  std::optional<std::filesystem::path> manifest_path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> uri_to_id_;
  std::map<std::string, std::shared_ptr<MediaSource>> sources_;
  std::vector<MediaAsset> order_;
};

/// Header of the native uncompressed container (`.rmc`): little-endian
/// "RMC1" magic, geometry, rates, 16-bit interleaved PCM, then one
/// run-length-encoded grayscale payload per frame. Layout in docs/formats.md.
struct ContainerHeader {
  Resolution resolution;
  std::uint32_t fps_num = 30;
  std::uint32_t fps_den = 1;
  std::uint32_t sample_rate = kCanonicalSampleRate;
  std::uint16_t channels = 1;
};

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     std::span<const double> interleaved_audio, std::size_t frame_count,
                     const std::function<Frame(std::size_t)>& make_frame);

/// Averages channels, then linearly resamples to 16 kHz.
AudioBuffer canonicalize_audio(std::span<const double> interleaved, int channels, int sample_rate);

}  // namespace emocurate
