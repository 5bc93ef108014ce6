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

#include "emocurate/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "emocurate/digest.hpp"
#include "emocurate/error.hpp"
#include "emocurate/process.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;

void AudioBuffer::validate(const std::string& context) const {
  if (samples.empty()) throw Error(ErrorKind::kDomain, "empty audio buffer", context);
  if (sample_rate <= 0) throw Error(ErrorKind::kDomain, "non-positive sample rate", context);
  for (double s : samples) {
    if (!std::isfinite(s)) throw Error(ErrorKind::kDomain, "non-finite audio sample", context);
  }
}

void to_json(nlohmann::json& j, const MediaAsset& a) {
  j = nlohmann::json{{"asset_id", a.asset_id},
                     {"uri", a.uri},
                     {"duration", a.duration},
                     {"frame_rate", a.frame_rate},
                     {"resolution", {a.resolution.width, a.resolution.height}},
                     {"sample_rate", a.sample_rate},
                     {"channels", a.channels}};
}

void from_json(const nlohmann::json& j, MediaAsset& a) {
  a.asset_id = j.at("asset_id").get<std::string>();
  a.uri = j.at("uri").get<std::string>();
  a.duration = j.at("duration").get<double>();
  a.frame_rate = j.at("frame_rate").get<double>();
  a.resolution.width = j.at("resolution").at(0).get<int>();
  a.resolution.height = j.at("resolution").at(1).get<int>();
  a.sample_rate = j.at("sample_rate").get<int>();
  a.channels = j.value("channels", 1);
}

void validate_span(const MediaAsset& asset, const SegmentSpan& span, double min_duration) {
  if (!(span.start >= 0.0) || !(span.start < span.end) || span.end > asset.duration + 1e-9) {
    throw Error(ErrorKind::kRange,
                "span [" + format_double(span.start) + ", " + format_double(span.end) +
                    ") outside asset of " + format_double(asset.duration) + " s",
                asset.asset_id);
  }
  if (span.duration() + 1e-9 < min_duration) {
    throw Error(ErrorKind::kRange,
                "span shorter than minimum " + format_double(min_duration) + " s", asset.asset_id);
  }
}

Frame FrameSequence::frame(std::size_t i) const {
  if (i >= count_) throw Error(ErrorKind::kRange, "frame index out of range");
  return loader_(first_ + i);
}

AudioBuffer canonicalize_audio(std::span<const double> interleaved, int channels, int sample_rate) {
  if (channels <= 0 || sample_rate <= 0) throw Error(ErrorKind::kMissingStream, "no audio stream");
  const std::size_t frames = interleaved.size() / static_cast<std::size_t>(channels);
  std::vector<double> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double s = 0;
    for (int c = 0; c < channels; ++c) s += interleaved[f * channels + c];
    mono[f] = s / channels;
  }
  AudioBuffer out;
  out.sample_rate = kCanonicalSampleRate;
  if (sample_rate == kCanonicalSampleRate) {
    out.samples = std::move(mono);
    return out;
  }
  // Linear interpolation; adequate for the energy-based stages downstream.
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(frames) * kCanonicalSampleRate / sample_rate));
  out.samples.resize(n_out);
  const double step = static_cast<double>(sample_rate) / kCanonicalSampleRate;
  for (std::size_t i = 0; i < n_out; ++i) {
    double pos = i * step;
    auto k = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(k);
    double a = k < frames ? mono[k] : 0.0;
    double b = k + 1 < frames ? mono[k + 1] : a;
    out.samples[i] = a + (b - a) * frac;
  }
  return out;
}

AudioBuffer slice_audio(const AudioBuffer& audio, double start, double end) {
  const double sr = audio.sample_rate;
  auto a = static_cast<std::size_t>(std::max(0LL, std::llround(start * sr)));
  auto b = static_cast<std::size_t>(std::max(0LL, std::llround(end * sr)));
  a = std::min(a, audio.samples.size());
  b = std::min(b, audio.samples.size());
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  if (b > a) out.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(a),
                                audio.samples.begin() + static_cast<std::ptrdiff_t>(b));
  return out;
}

Clip slice_segment(const MediaSource& source, const SegmentSpan& span) {
  const auto& asset = source.asset();
  validate_span(asset, span);
  Clip clip;
  clip.span = span;
  clip.audio = slice_audio(source.canonical_audio(), span.start, span.end);
  const double fps = asset.frame_rate;
  const auto total = source.frame_count();
  auto first = static_cast<std::size_t>(std::ceil(span.start * fps - 1e-9));
  auto last = static_cast<std::size_t>(std::ceil(span.end * fps - 1e-9));
  first = std::min(first, total);
  last = std::min(last, total);
  const MediaSource* src = &source;
  clip.frames = FrameSequence(first, last - first, [src](std::size_t i) { return src->decode_frame(i); });
  return clip;
}

namespace {

constexpr char kMagic[4] = {'R', 'M', 'C', '1'};
constexpr std::size_t kHeaderSize = 40;

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string asset_id_for(std::span<const std::uint8_t> bytes) {
  auto d = Sha256().update(bytes).finish();
  return to_hex(std::span<const std::uint8_t>(d.data(), 8));
}

class ContainerSource final : public MediaSource {
 public:
  ContainerSource(std::string uri, std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    if (bytes_.size() < kHeaderSize) throw Error(ErrorKind::kIo, "truncated container header", uri);
    const std::uint8_t* h = bytes_.data();
    asset_.uri = std::move(uri);
    asset_.asset_id = asset_id_for(bytes_);
    asset_.resolution.width = static_cast<int>(get_le<std::uint32_t>(h + 4));
    asset_.resolution.height = static_cast<int>(get_le<std::uint32_t>(h + 8));
    auto fps_num = get_le<std::uint32_t>(h + 12);
    auto fps_den = get_le<std::uint32_t>(h + 16);
    asset_.sample_rate = static_cast<int>(get_le<std::uint32_t>(h + 20));
    asset_.channels = get_le<std::uint16_t>(h + 24);
    audio_frames_ = get_le<std::uint64_t>(h + 28);
    auto video_frames = get_le<std::uint32_t>(h + 36);
    if (asset_.channels == 0 || audio_frames_ == 0 || asset_.sample_rate <= 0) {
      throw Error(ErrorKind::kMissingStream, "container has no audio stream", asset_.uri);
    }
    if (fps_num == 0 || fps_den == 0) throw Error(ErrorKind::kIo, "invalid frame rate", asset_.uri);
    asset_.frame_rate = static_cast<double>(fps_num) / fps_den;
    asset_.duration = static_cast<double>(audio_frames_) / asset_.sample_rate;

    std::size_t pos = kHeaderSize + audio_frames_ * asset_.channels * 2;
    if (pos > bytes_.size()) throw Error(ErrorKind::kIo, "truncated audio payload", asset_.uri);
    frame_offsets_.reserve(video_frames);
    for (std::uint32_t f = 0; f < video_frames; ++f) {
      if (pos + 4 > bytes_.size()) throw Error(ErrorKind::kIo, "truncated frame table", asset_.uri);
      auto len = get_le<std::uint32_t>(bytes_.data() + pos);
      frame_offsets_.push_back(pos + 4);
      pos += 4 + len;
      if (pos > bytes_.size()) throw Error(ErrorKind::kIo, "truncated frame payload", asset_.uri);
    }
    frame_offsets_.push_back(pos + 4);  // sentinel: end of last payload + 4
  }

  const MediaAsset& asset() const override { return asset_; }

  const AudioBuffer& canonical_audio() const override {
    std::call_once(audio_once_, [this] {
      const std::size_t n = audio_frames_ * asset_.channels;
      std::vector<double> interleaved(n);
      const std::uint8_t* p = bytes_.data() + kHeaderSize;
      for (std::size_t i = 0; i < n; ++i) {
        interleaved[i] = static_cast<std::int16_t>(get_le<std::uint16_t>(p + 2 * i)) / 32768.0;
      }
      audio_ = canonicalize_audio(interleaved, asset_.channels, asset_.sample_rate);
    });
    return audio_;
  }

  std::size_t frame_count() const override { return frame_offsets_.size() - 1; }

  Frame decode_frame(std::size_t index) const override {
    if (index >= frame_count()) throw Error(ErrorKind::kRange, "frame index out of range", asset_.uri);
    Frame f;
    f.width = asset_.resolution.width;
    f.height = asset_.resolution.height;
    const std::size_t want = static_cast<std::size_t>(f.width) * f.height;
    f.pixels.reserve(want);
    std::size_t pos = frame_offsets_[index];
    std::size_t end = frame_offsets_[index + 1] - 4;
    while (pos + 3 <= end) {
      std::uint8_t value = bytes_[pos];
      auto run = get_le<std::uint16_t>(bytes_.data() + pos + 1);
      f.pixels.insert(f.pixels.end(), run, value);
      pos += 3;
    }
    if (f.pixels.size() != want) throw Error(ErrorKind::kIo, "corrupt frame payload", asset_.uri);
    return f;
  }

 private:
  MediaAsset asset_;
  std::vector<std::uint8_t> bytes_;
  std::uint64_t audio_frames_ = 0;
  std::vector<std::size_t> frame_offsets_;
  mutable std::once_flag audio_once_;
  mutable AudioBuffer audio_;
};

double parse_rate(const std::string& text) {
  auto parts = split(text, '/');
  if (parts.size() == 2) {
    double num = parse_double(parts[0], "r_frame_rate");
    double den = parse_double(parts[1], "r_frame_rate");
    return den != 0 ? num / den : 0.0;
  }
  return parse_double(text, "r_frame_rate");
}

/// Decodes through ffprobe/ffmpeg child processes.
class FfmpegSource final : public MediaSource {
 public:
  FfmpegSource(std::string uri, const std::vector<std::uint8_t>& bytes, MediaOptions opts)
      : opts_(std::move(opts)) {
    asset_.uri = std::move(uri);
    asset_.asset_id = asset_id_for(bytes);
    auto probe = run_process({opts_.ffprobe, "-v", "error", "-print_format", "json", "-show_streams",
                              "-show_format", asset_.uri});
    if (probe.exit_code != 0) {
      throw Error(ErrorKind::kIo, "ffprobe failed: " + probe.err, asset_.uri);
    }
    auto j = nlohmann::json::parse(probe.out, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::kIo, "unreadable ffprobe output", asset_.uri);
    bool have_audio = false;
    for (auto& s : j.value("streams", nlohmann::json::array())) {
      auto type = s.value("codec_type", "");
      if (type == "audio" && !have_audio) {
        have_audio = true;
        asset_.sample_rate = std::stoi(s.value("sample_rate", "0"));
        asset_.channels = s.value("channels", 1);
      } else if (type == "video" && asset_.resolution.width == 0) {
        asset_.resolution = {s.value("width", 0), s.value("height", 0)};
        asset_.frame_rate = parse_rate(s.value("r_frame_rate", "0/1"));
        if (s.contains("nb_frames")) frames_ = std::stoull(s["nb_frames"].get<std::string>());
      }
    }
    if (!have_audio) throw Error(ErrorKind::kMissingStream, "no audio stream", asset_.uri);
    asset_.duration = std::stod(j.at("format").value("duration", "0"));
    if (frames_ == 0 && asset_.frame_rate > 0) {
      frames_ = static_cast<std::size_t>(std::floor(asset_.duration * asset_.frame_rate));
    }
  }

  const MediaAsset& asset() const override { return asset_; }

  const AudioBuffer& canonical_audio() const override {
    std::call_once(audio_once_, [this] {
      auto r = run_process({opts_.ffmpeg, "-v", "error", "-i", asset_.uri, "-vn", "-ac", "1", "-ar",
                            std::to_string(kCanonicalSampleRate), "-f", "f64le", "-"});
      if (r.exit_code != 0) throw Error(ErrorKind::kIo, "ffmpeg audio decode failed: " + r.err, asset_.uri);
      audio_.sample_rate = kCanonicalSampleRate;
      audio_.samples.resize(r.out.size() / sizeof(double));
      std::memcpy(audio_.samples.data(), r.out.data(), audio_.samples.size() * sizeof(double));
    });
    return audio_;
  }

  std::size_t frame_count() const override { return frames_; }

  Frame decode_frame(std::size_t index) const override {
    std::lock_guard lock(frame_mu_);
    if (index < window_first_ || index >= window_first_ + window_.size()) load_window(index);
    return window_[index - window_first_];
  }

 private:
  static constexpr std::size_t kWindow = 256;

  void load_window(std::size_t first) const {
    const double t = first / asset_.frame_rate;
    auto r = run_process({opts_.ffmpeg, "-v", "error", "-ss", format_double(t), "-i", asset_.uri, "-an",
                          "-frames:v", std::to_string(kWindow), "-f", "rawvideo", "-pix_fmt", "gray", "-"});
    if (r.exit_code != 0) throw Error(ErrorKind::kIo, "ffmpeg video decode failed: " + r.err, asset_.uri);
    const std::size_t frame_bytes = static_cast<std::size_t>(asset_.resolution.width) * asset_.resolution.height;
    window_.clear();
    window_first_ = first;
    for (std::size_t off = 0; frame_bytes && off + frame_bytes <= r.out.size(); off += frame_bytes) {
      Frame f{asset_.resolution.width, asset_.resolution.height, {}};
      f.pixels.assign(r.out.begin() + static_cast<std::ptrdiff_t>(off),
                      r.out.begin() + static_cast<std::ptrdiff_t>(off + frame_bytes));
      window_.push_back(std::move(f));
    }
    if (window_.empty()) throw Error(ErrorKind::kRange, "frame index past end of stream", asset_.uri);
  }

  MediaOptions opts_;
  MediaAsset asset_;
  std::size_t frames_ = 0;
  mutable std::once_flag audio_once_;
  mutable AudioBuffer audio_;
  mutable std::mutex frame_mu_;
  mutable std::size_t window_first_ = 0;
  mutable std::vector<Frame> window_;
};

}  // namespace

std::shared_ptr<MediaSource> open_media(const std::string& uri, const MediaOptions& opts) {
  std::error_code ec;
  if (!fs::is_regular_file(uri, ec)) throw Error(ErrorKind::kIo, "not a readable file", uri);
  auto bytes = read_binary_file(uri);
  if (bytes.empty()) throw Error(ErrorKind::kIo, "zero-byte media file", uri);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
    return std::make_shared<ContainerSource>(uri, std::move(bytes));
  }
  if (!find_executable(opts.ffprobe) || !find_executable(opts.ffmpeg)) {
    throw Error(ErrorKind::kIo, "not a native container and ffprobe/ffmpeg are unavailable", uri);
  }
  return std::make_shared<FfmpegSource>(uri, bytes, opts);
}

MediaAsset register_asset(const std::string& uri, const MediaOptions& opts) {
  return open_media(uri, opts)->asset();
}

MediaRegistry::MediaRegistry(MediaOptions opts, std::optional<fs::path> manifest_path)
    : opts_(std::move(opts)), manifest_path_(std::move(manifest_path)) {}

MediaAsset MediaRegistry::register_asset(const std::string& uri) {
  {
    std::lock_guard lock(mu_);
    auto it = uri_to_id_.find(uri);
    if (it != uri_to_id_.end()) return sources_.at(it->second)->asset();
  }
  auto src = open_media(uri, opts_);
  std::lock_guard lock(mu_);
  auto it = uri_to_id_.find(uri);
  if (it != uri_to_id_.end()) return sources_.at(it->second)->asset();
  const auto& asset = src->asset();
  uri_to_id_[uri] = asset.asset_id;
  if (!sources_.count(asset.asset_id)) {
    sources_[asset.asset_id] = src;
    order_.push_back(asset);
    if (manifest_path_) {
      std::ofstream out(*manifest_path_, std::ios::app);
      if (!out) throw Error(ErrorKind::kIo, "cannot append to manifest", manifest_path_->string());
      out << nlohmann::json(asset).dump() << "\n";
    }
  }
  return asset;
}

std::shared_ptr<MediaSource> MediaRegistry::source(const std::string& asset_id) const {
  std::lock_guard lock(mu_);
  auto it = sources_.find(asset_id);
  if (it == sources_.end()) throw Error(ErrorKind::kPrecondition, "asset not registered", asset_id);
  return it->second;
}

std::vector<MediaAsset> MediaRegistry::assets() const {
  std::lock_guard lock(mu_);
  return order_;
}

void write_container(const fs::path& path, const ContainerHeader& header,
                     std::span<const double> interleaved_audio, std::size_t frame_count,
                     const std::function<Frame(std::size_t)>& make_frame) {
  std::string out;
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.resolution.width));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.resolution.height));
  put_le<std::uint32_t>(out, header.fps_num);
  put_le<std::uint32_t>(out, header.fps_den);
  put_le<std::uint32_t>(out, header.sample_rate);
  put_le<std::uint16_t>(out, header.channels);
  put_le<std::uint16_t>(out, 0);  // reserved
  const std::uint64_t audio_frames = header.channels ? interleaved_audio.size() / header.channels : 0;
  put_le<std::uint64_t>(out, audio_frames);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frame_count));
  for (std::size_t i = 0; i < audio_frames * header.channels; ++i) {
    double c = std::clamp(interleaved_audio[i], -1.0, 1.0);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  const std::size_t pixels = static_cast<std::size_t>(header.resolution.width) * header.resolution.height;
  for (std::size_t f = 0; f < frame_count; ++f) {
    Frame frame = make_frame(f);
    if (frame.pixels.size() != pixels) throw Error(ErrorKind::kRange, "frame size mismatch");
    std::string payload;
    std::size_t i = 0;
    while (i < pixels) {
      std::uint8_t v = frame.pixels[i];
      std::size_t run = 1;
      while (i + run < pixels && run < 0xFFFF && frame.pixels[i + run] == v) ++run;
      payload.push_back(static_cast<char>(v));
      put_le<std::uint16_t>(payload, static_cast<std::uint16_t>(run));
      i += run;
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
    out += payload;
  }
  write_file_atomic(path, out);
}

}  // namespace emocurate
