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

#include "emocurate/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numbers>

#include "emocurate/digest.hpp"
#include "emocurate/error.hpp"
#include "emocurate/process.hpp"
#include "emocurate/util.hpp"
#include "emocurate/wav.hpp"

namespace emocurate {

std::size_t AdapterCaps::effective_width(std::size_t requested) const {
  std::size_t w = std::max<std::size_t>(1, requested);
  if (!concurrent_safe) w = 1;
  if (max_concurrency > 0) w = std::min(w, max_concurrency);
  return w;
}

SeparationResult MockSeparator::separate(const AudioBuffer& mix) {
  SeparationResult r;
  r.vocals = mix;
  r.accompaniment.sample_rate = mix.sample_rate;
  r.accompaniment.samples.assign(mix.samples.size(), 0.0);
  return r;
}

namespace {

// Direct form I biquad, coefficients from the RBJ audio EQ cookbook.
struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad make(bool highpass, double f0, double fs) {
    const double w0 = 2.0 * std::numbers::pi * f0 / fs;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;  // Q = 1/sqrt(2)
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad q{};
    if (highpass) {
      q.b0 = (1.0 + c) / 2.0 / a0;
      q.b1 = -(1.0 + c) / a0;
      q.b2 = (1.0 + c) / 2.0 / a0;
    } else {
      q.b0 = (1.0 - c) / 2.0 / a0;
      q.b1 = (1.0 - c) / a0;
      q.b2 = (1.0 - c) / 2.0 / a0;
    }
    q.a1 = -2.0 * c / a0;
    q.a2 = (1.0 - alpha) / a0;
    return q;
  }

  void run(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& s : x) {
      const double y = b0 * s + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = s;
      y2 = y1;
      y1 = y;
      s = y;
    }
  }
};

}  // namespace

SeparationResult BandpassSeparator::separate(const AudioBuffer& mix) {
  const double fs = mix.sample_rate;
  if (!(low_hz_ > 0) || !(high_hz_ > low_hz_) || high_hz_ >= fs / 2.0) {
    throw Error(ErrorKind::kConfig, "band edges must satisfy 0 < low < high < fs/2", "separator");
  }
  std::vector<double> v = mix.samples;
  const auto hp = Biquad::make(true, low_hz_, fs);
  const auto lp = Biquad::make(false, high_hz_, fs);
  hp.run(v);
  hp.run(v);
  lp.run(v);
  lp.run(v);
  SeparationResult r;
  r.vocals.sample_rate = mix.sample_rate;
  r.accompaniment.sample_rate = mix.sample_rate;
  r.accompaniment.samples.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r.accompaniment.samples[i] = mix.samples[i] - v[i];
  r.vocals.samples = std::move(v);
  return r;
}

void CommandSeparator::check() const {
  if (!find_executable(command_)) throw Error(ErrorKind::kConfig, "separator command not found: " + command_, "separator");
}

namespace {

AudioBuffer load_mono(const std::filesystem::path& path, int expect_rate) {
  WavData w = read_wav(path);
  if (w.channels != 1 || w.sample_rate != expect_rate) {
    throw Error(ErrorKind::kSchema, "adapter output must be mono at the input rate", path.string());
  }
  AudioBuffer b;
  b.sample_rate = w.sample_rate;
  b.samples = std::move(w.samples);
  return b;
}

}  // namespace

SeparationResult CommandSeparator::separate(const AudioBuffer& mix) {
  TempDir tmp("emocurate-sep");
  const auto in = tmp.path() / "in.wav";
  const auto voc = tmp.path() / "vocals.wav";
  const auto acc = tmp.path() / "accompaniment.wav";
  write_wav(in, mix.samples, mix.sample_rate);
  auto res = run_process({command_, in.string(), voc.string(), acc.string()});
  if (res.exit_code != 0) {
    throw Error(ErrorKind::kIo, "separator exited with " + std::to_string(res.exit_code) + ": " + res.err);
  }
  return {load_mono(voc, mix.sample_rate), load_mono(acc, mix.sample_rate)};
}

SeparationResult separate_vocals(const AudioBuffer& audio, SourceSeparator& separator, const std::string& context) {
  audio.validate(context);
  SeparationResult r;
  try {
    r = separator.separate(audio);
  } catch (const std::exception& e) {
    throw StageError(DropReason::kSeparationFailed, separator.name() + ": " + e.what(), context);
  }
  for (const AudioBuffer* b : {&r.vocals, &r.accompaniment}) {
    if (b->samples.size() != audio.samples.size() || b->sample_rate != audio.sample_rate) {
      throw StageError(DropReason::kSeparationFailed, separator.name() + ": output shape differs from input", context);
    }
  }
  return r;
}

void VadConfig::validate() const {
  if (frame_ms != 10 && frame_ms != 20 && frame_ms != 30) throw Error(ErrorKind::kConfig, "must be 10, 20 or 30", "vad.frame_ms");
  if (!(min_speech_s >= 0)) throw Error(ErrorKind::kConfig, "must be >= 0", "vad.min_speech_s");
  if (!(merge_gap_s >= 0)) throw Error(ErrorKind::kConfig, "must be >= 0", "vad.merge_gap_s");
  if (hangover_frames < 0) throw Error(ErrorKind::kConfig, "must be >= 0", "vad.hangover_frames");
  if (!std::isfinite(energy_threshold_db)) throw Error(ErrorKind::kConfig, "must be finite", "vad.energy_threshold_db");
}

std::vector<double> frame_levels_db(const AudioBuffer& audio, int frame_ms) {
  const std::size_t len = static_cast<std::size_t>(audio.sample_rate) * frame_ms / 1000;
  if (len == 0) throw Error(ErrorKind::kConfig, "frame shorter than one sample", "vad.frame_ms");
  std::vector<double> out;
  out.reserve(audio.samples.size() / len + 1);
  for (std::size_t a = 0; a < audio.samples.size(); a += len) {
    const std::size_t b = std::min(a + len, audio.samples.size());
    double p = 0;
    for (std::size_t i = a; i < b; ++i) p += audio.samples[i] * audio.samples[i];
    p /= static_cast<double>(b - a);
    out.push_back(p > 0 ? 10.0 * std::log10(p) : -std::numeric_limits<double>::infinity());
  }
  return out;
}

std::vector<SegmentSpan> vad_segment(const AudioBuffer& audio, const VadConfig& cfg, const std::string& asset_id) {
  cfg.validate();
  const auto levels = frame_levels_db(audio, cfg.frame_ms);
  const double total_s = audio.duration_s();

  // Runs of speech frames as [first, last+1) frame indices.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > cfg.energy_threshold_db)) continue;
    if (!runs.empty() && runs.back().second == i) {
      runs.back().second = i + 1;
    } else {
      runs.emplace_back(i, i + 1);
    }
  }

  std::vector<SegmentSpan> spans;
  for (auto [a, b] : runs) {
    const std::size_t end = std::min(levels.size(), b + static_cast<std::size_t>(cfg.hangover_frames));
    const double s = static_cast<double>(a * static_cast<std::size_t>(cfg.frame_ms)) / 1000.0;
    const double e = std::min(total_s, static_cast<double>(end * static_cast<std::size_t>(cfg.frame_ms)) / 1000.0);
    if (!spans.empty() && s - spans.back().end < cfg.merge_gap_s) {
      spans.back().end = std::max(spans.back().end, e);
    } else {
      spans.push_back({asset_id, s, e});
    }
  }
  std::erase_if(spans, [&](const SegmentSpan& sp) { return sp.duration() < cfg.min_speech_s; });
  return spans;
}

namespace {

double mean_power(std::span<const double> x) {
  double p = 0;
  for (double v : x) p += v * v;
  return x.empty() ? 0.0 : p / static_cast<double>(x.size());
}

}  // namespace

double compute_snr(const AudioBuffer& signal, const AudioBuffer& noise) {
  if (signal.samples.size() != noise.samples.size()) {
    throw Error(ErrorKind::kRange, "signal and noise lengths differ");
  }
  const double pn = mean_power(noise.samples);
  if (pn == 0.0) throw Error(ErrorKind::kDomain, "noise reference is silent");
  return 10.0 * std::log10(mean_power(signal.samples) / pn);
}

std::optional<double> speech_to_gap_snr_db(const AudioBuffer& audio, std::span<const SegmentSpan> speech) {
  std::vector<bool> in(audio.samples.size(), false);
  const double sr = audio.sample_rate;
  for (const auto& sp : speech) {
    auto a = static_cast<std::size_t>(std::max(0LL, std::llround(sp.start * sr)));
    auto b = static_cast<std::size_t>(std::max(0LL, std::llround(sp.end * sr)));
    b = std::min(b, in.size());
    for (std::size_t i = a; i < b; ++i) in[i] = true;
  }
  double ps = 0, pn = 0;
  std::size_t ns = 0, nn = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double e = audio.samples[i] * audio.samples[i];
    if (in[i]) {
      ps += e;
      ++ns;
    } else {
      pn += e;
      ++nn;
    }
  }
  if (ns == 0 || nn == 0 || pn == 0.0) return std::nullopt;
  return 10.0 * std::log10((ps / ns) / (pn / nn));
}

std::string make_segment_id(const std::string& asset_id, double start_s) {
  const long long ms = std::llround(start_s * 1000.0);
  std::string digits = std::to_string(std::max(0LL, ms));
  if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
  return asset_id + "_" + digits;
}

std::string SpeechSegment::segment_id() const { return make_segment_id(span.asset_id, span.start); }

namespace {

constexpr std::array<const char*, 48> kVocabulary = {
    "the",    "a",      "we",     "you",    "never",  "always", "really", "just",   "think",  "know",
    "want",   "said",   "here",   "there",  "again",  "today",  "tonight", "maybe", "sorry",  "please",
    "look",   "listen", "wait",   "come",   "go",     "home",   "back",   "now",    "okay",   "fine",
    "love",   "hate",   "great",  "terrible", "funny", "strange", "quiet", "loud",  "tired",  "happy",
    "what",   "why",    "how",    "who",    "right",  "wrong",  "time",   "over"};

}  // namespace

std::vector<WordTiming> MockTranscriber::transcribe(const AudioBuffer& clip) {
  const double len = clip.duration_s();
  if (len < min_duration_s_) return {};
  Sha256 h;
  h.update(std::span(reinterpret_cast<const std::uint8_t*>(clip.samples.data()), clip.samples.size() * sizeof(double)));
  const std::string seed = to_hex(h.finish());
  const auto n = static_cast<std::size_t>(std::max(1.0, std::floor(len / 0.45)));
  std::vector<WordTiming> words(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto pick = digest_seed(seed + ":" + std::to_string(k)) % kVocabulary.size();
    words[k].token = kVocabulary[pick];
    words[k].start = k * len / static_cast<double>(n);
    words[k].end = (k + 1) * len / static_cast<double>(n);
  }
  return words;
}

void CommandTranscriber::check() const {
  if (!find_executable(command_)) throw Error(ErrorKind::kConfig, "transcriber command not found: " + command_, "transcriber");
}

std::vector<WordTiming> CommandTranscriber::transcribe(const AudioBuffer& clip) {
  TempDir tmp("emocurate-asr");
  const auto in = tmp.path() / "clip.wav";
  write_wav(in, clip.samples, clip.sample_rate);
  auto res = run_process({command_, in.string()});
  if (res.exit_code != 0) {
    throw Error(ErrorKind::kIo, "transcriber exited with " + std::to_string(res.exit_code) + ": " + res.err);
  }
  std::vector<WordTiming> words;
  for (const auto& line : split(res.out, '\n', false)) {
    if (trim(line).empty()) continue;
    auto parts = split(line, '\t');
    if (parts.size() != 3) throw Error(ErrorKind::kParse, "expected token<TAB>start<TAB>end", "transcriber");
    words.push_back({parts[0], parse_double(parts[1], "word start"), parse_double(parts[2], "word end")});
  }
  return words;
}

SpeechSegment transcribe(SpeechSegment seg, Transcriber& asr) {
  const std::string id = seg.segment_id();
  if (seg.audio.samples.empty()) throw StageError(DropReason::kTooShort, "segment has no audio", id);
  std::vector<WordTiming> rel;
  try {
    rel = asr.transcribe(seg.audio);
  } catch (const std::exception& e) {
    throw StageError(DropReason::kTranscriptionFailed, asr.name() + ": " + e.what(), id);
  }
  if (rel.empty()) throw StageError(DropReason::kTooShort, "no speech recognised", id);

  // One sample of slack for index rounding at the span edges.
  const double slack = 1.0 / seg.audio.sample_rate;
  const double len = seg.span.duration();
  seg.words.clear();
  std::vector<std::string> tokens;
  double prev_end = 0;
  for (const auto& w : rel) {
    if (w.token.empty() || !(w.start >= -slack) || !(w.end >= w.start) || w.end > len + slack || w.start < prev_end - 1e-9) {
      throw StageError(DropReason::kTranscriptionFailed, asr.name() + ": word timings out of order or outside the segment", id);
    }
    prev_end = w.end;
    WordTiming abs{w.token, seg.span.start + std::clamp(w.start, 0.0, len), seg.span.start + std::clamp(w.end, 0.0, len)};
    seg.words.push_back(abs);
    tokens.push_back(w.token);
  }
  seg.transcript = join(tokens, " ");
  return seg;
}

void to_json(nlohmann::json& j, const WordTiming& w) { j = nlohmann::json::array({w.token, w.start, w.end}); }

void from_json(const nlohmann::json& j, WordTiming& w) {
  w.token = j.at(0).get<std::string>();
  w.start = j.at(1).get<double>();
  w.end = j.at(2).get<double>();
}

}  // namespace emocurate
