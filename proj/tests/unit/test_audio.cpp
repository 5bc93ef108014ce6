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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "emocurate/audio.hpp"
#include "emocurate/error.hpp"
#include "emocurate/util.hpp"
#include "support.hpp"

using namespace emocurate;
using testing::concat;
using testing::silence;
using testing::tone;

namespace {

// Power of the `hz` component via the Goertzel recurrence.
double goertzel_power(const std::vector<double>& x, double hz, int rate) {
  const double w = 2.0 * std::numbers::pi * hz / rate;
  const double c = 2.0 * std::cos(w);
  double s1 = 0, s2 = 0;
  for (double v : x) {
    const double s0 = v + c * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return s1 * s1 + s2 * s2 - c * s1 * s2;
}

class FailingSeparator final : public SourceSeparator {
 public:
  std::string name() const override { return "failing"; }
  SeparationResult separate(const AudioBuffer&) override { throw std::runtime_error("model crashed"); }
};

class ShortSeparator final : public SourceSeparator {
 public:
  std::string name() const override { return "short"; }
  SeparationResult separate(const AudioBuffer& mix) override {
    SeparationResult r{mix, mix};
    r.vocals.samples.pop_back();
    return r;
  }
};

class FailingTranscriber final : public Transcriber {
 public:
  std::string name() const override { return "failing"; }
  std::vector<WordTiming> transcribe(const AudioBuffer&) override { throw std::runtime_error("asr down"); }
};

class BackwardsTranscriber final : public Transcriber {
 public:
  std::string name() const override { return "backwards"; }
  std::vector<WordTiming> transcribe(const AudioBuffer&) override { return {{"b", 1.0, 1.5}, {"a", 0.0, 0.5}}; }
};

SpeechSegment segment_of(const AudioBuffer& audio, double start) {
  SpeechSegment s;
  s.span = {"asset", start, start + audio.duration_s()};
  s.audio = audio;
  return s;
}

DropReason drop_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const StageError& e) {
    return e.reason();
  }
  FAIL("expected a stage error");
  return DropReason::kIoFailed;
}

}  // namespace

TEST_CASE("mock separator contract") {
  const auto mix = testing::white_noise(8000, 0.3, 1);
  MockSeparator sep;
  const auto r = separate_vocals(mix, sep);
  CHECK(r.vocals.samples == mix.samples);
  CHECK(r.accompaniment.samples == std::vector<double>(mix.samples.size(), 0.0));
  for (std::size_t i = 0; i < mix.samples.size(); ++i) CHECK(r.vocals.samples[i] + r.accompaniment.samples[i] == mix.samples[i]);
}

TEST_CASE("band-pass separator favours the vocal band") {
  auto voice = tone(2.0, 0.3, 1000.0);
  const auto music = tone(2.0, 0.3, 60.0);
  AudioBuffer mix = voice;
  for (std::size_t i = 0; i < mix.samples.size(); ++i) mix.samples[i] += music.samples[i];

  BandpassSeparator sep;
  const auto r = separate_vocals(mix, sep);
  REQUIRE(r.vocals.samples.size() == mix.samples.size());
  REQUIRE(r.accompaniment.samples.size() == mix.samples.size());
  for (std::size_t i = 0; i < mix.samples.size(); ++i) {
    CHECK(r.vocals.samples[i] + r.accompaniment.samples[i] == doctest::Approx(mix.samples[i]).epsilon(1e-12));
  }
  const double before = goertzel_power(mix.samples, 1000, 16000) / goertzel_power(mix.samples, 60, 16000);
  const double after = goertzel_power(r.vocals.samples, 1000, 16000) / goertzel_power(r.vocals.samples, 60, 16000);
  CHECK(after > 100 * before);
}

TEST_CASE("separator failures become stage errors") {
  const auto mix = tone(1.0);
  FailingSeparator bad;
  CHECK(drop_of([&] { separate_vocals(mix, bad, "asset-x"); }) == DropReason::kSeparationFailed);
  ShortSeparator shorty;
  CHECK(drop_of([&] { separate_vocals(mix, shorty, "asset-x"); }) == DropReason::kSeparationFailed);
}

TEST_CASE("vad config validation") {
  VadConfig c;
  for (int ms : {10, 20, 30}) {
    c.frame_ms = ms;
    CHECK_NOTHROW(c.validate());
  }
  c.frame_ms = 25;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.min_speech_s = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.merge_gap_s = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("vad on silence and a padded tone") {
  VadConfig cfg;
  cfg.min_speech_s = 2.0;
  CHECK(vad_segment(silence(10), cfg).empty());

  const auto sig = concat({silence(2), tone(3), silence(2)});
  const auto spans = vad_segment(sig, cfg, "a");
  REQUIRE(spans.size() == 1);
  const double frame = cfg.frame_ms / 1000.0;
  CHECK(std::abs(spans[0].start - 2.0) <= frame);
  CHECK(spans[0].end >= 5.0);
  CHECK(spans[0].end <= 5.0 + frame * (cfg.hangover_frames + 1));
  CHECK(spans[0].asset_id == "a");
}

TEST_CASE("vad merge and drop rules") {
  VadConfig cfg;
  cfg.min_speech_s = 2.0;
  cfg.hangover_frames = 0;
  cfg.merge_gap_s = 0.3;

  SUBCASE("gap below merge_gap joins") {
    const auto sig = concat({silence(1), tone(3), silence(0.21), tone(3), silence(1)});
    const auto spans = vad_segment(sig, cfg);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].start == doctest::Approx(0.99));
    CHECK(spans[0].end == doctest::Approx(7.23));
  }
  SUBCASE("gap above merge_gap splits") {
    const auto sig = concat({silence(1), tone(3), silence(0.99), tone(3), silence(1)});
    const auto spans = vad_segment(sig, cfg);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].end <= spans[1].start);
  }
  SUBCASE("runs shorter than the minimum are dropped") {
    const auto sig = concat({silence(1), tone(1.5), silence(1), tone(2.5), silence(1)});
    const auto spans = vad_segment(sig, cfg);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].duration() >= 2.0);
    CHECK(spans[0].start > 3.0);
  }
  SUBCASE("exactly min_speech survives") {
    const auto sig = concat({silence(0.3), tone(2.1), silence(1)});
    for (const auto& s : vad_segment(sig, cfg)) CHECK(s.duration() >= 2.0);
    CHECK(vad_segment(sig, cfg).size() == 1);
  }
  SUBCASE("hangover extends the end by whole frames") {
    cfg.hangover_frames = 3;
    const auto sig = concat({silence(0.3), tone(3.0), silence(1)});
    const auto spans = vad_segment(sig, cfg);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].end == doctest::Approx(3.3 + 3 * 0.03).epsilon(1e-9));
  }
}

TEST_CASE("vad is invariant under scaling with a matching threshold shift") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> len(0.2, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    AudioBuffer sig;
    for (int k = 0; k < 5; ++k) {
      sig = concat({sig, silence(len(rng)), tone(len(rng), 0.5, 300 + 100 * k)});
    }
    VadConfig cfg;
    const auto base = vad_segment(sig, cfg);
    for (double c : {0.5, 0.1, 0.01}) {
      AudioBuffer scaled = sig;
      for (auto& s : scaled.samples) s *= c;
      VadConfig shifted = cfg;
      shifted.energy_threshold_db += 20 * std::log10(c);
      const auto spans = vad_segment(scaled, shifted);
      REQUIRE(spans.size() == base.size());
      for (std::size_t i = 0; i < spans.size(); ++i) CHECK(spans[i] == base[i]);
    }
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].duration() >= cfg.min_speech_s);
      if (i > 0) CHECK(base[i - 1].end < base[i].start);
    }
  }
}

TEST_CASE("snr arithmetic") {
  const auto n = testing::white_noise(16000, 0.1, 9);
  CHECK(compute_snr(n, n) == doctest::Approx(0.0));
  AudioBuffer ten = n;
  for (auto& s : ten.samples) s *= 10;
  CHECK(compute_snr(ten, n) == doctest::Approx(20.0).epsilon(1e-12));

  const auto sine = tone(1.0, 1.0, 440.0);
  CHECK(std::abs(compute_snr(sine, n) - 10 * std::log10(0.5 / 0.01)) < 0.1);

  for (double c : {0.5, 2.0, 10.0}) {
    AudioBuffer s = sine;
    for (auto& v : s.samples) v *= c;
    CHECK(std::abs(compute_snr(s, n) - (compute_snr(sine, n) + 20 * std::log10(c))) < 1e-9);
  }

  try {
    compute_snr(sine, silence(1.0));
    FAIL("expected domain error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDomain);
  }
  try {
    compute_snr(sine, tone(0.5));
    FAIL("expected range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRange);
  }
}

TEST_CASE("speech-to-gap snr") {
  auto sig = concat({silence(1), tone(2, 0.5), silence(1)});
  const auto noise = testing::white_noise(sig.samples.size(), 0.01, 4);
  for (std::size_t i = 0; i < sig.samples.size(); ++i) sig.samples[i] += noise.samples[i];
  std::vector<SegmentSpan> speech = {{"a", 1.0, 3.0}};
  const auto snr = speech_to_gap_snr_db(sig, speech);
  REQUIRE(snr.has_value());
  CHECK(*snr == doctest::Approx(10 * std::log10((0.125 + 1e-4) / 1e-4)).epsilon(0.02));
  std::vector<SegmentSpan> all = {{"a", 0.0, 4.0}};
  CHECK_FALSE(speech_to_gap_snr_db(sig, all).has_value());
}

TEST_CASE("mock transcriber") {
  MockTranscriber asr;
  const auto clip = testing::white_noise(16000 * 3 + 333, 0.2, 5);
  const auto a = transcribe(segment_of(clip, 10.0), asr);
  const auto b = transcribe(segment_of(clip, 10.0), asr);
  CHECK(a.transcript == b.transcript);
  CHECK(a.words == b.words);

  const double L = clip.duration_s();
  const auto N = static_cast<std::size_t>(std::floor(L / 0.45));
  REQUIRE(a.words.size() == N);
  std::vector<std::string> toks;
  for (std::size_t k = 0; k < N; ++k) {
    CHECK(a.words[k].start == doctest::Approx(10.0 + k * L / N).epsilon(1e-12));
    CHECK(a.words[k].end == doctest::Approx(10.0 + (k + 1) * L / N).epsilon(1e-12));
    CHECK(a.words[k].start >= a.span.start);
    CHECK(a.words[k].end <= a.span.end);
    if (k > 0) CHECK(a.words[k].start >= a.words[k - 1].end - 1e-12);
    toks.push_back(a.words[k].token);
  }
  CHECK(a.transcript == join(toks, " "));

  const auto other = transcribe(segment_of(testing::white_noise(clip.samples.size(), 0.2, 6), 10.0), asr);
  CHECK(other.transcript != a.transcript);
}

TEST_CASE("transcription drop reasons") {
  MockTranscriber asr;
  CHECK(drop_of([&] { transcribe(segment_of(tone(1.9), 0.0), asr); }) == DropReason::kTooShort);
  CHECK(drop_of([&] { transcribe(segment_of(AudioBuffer{}, 0.0), asr); }) == DropReason::kTooShort);
  FailingTranscriber bad;
  CHECK(drop_of([&] { transcribe(segment_of(tone(3), 0.0), bad); }) == DropReason::kTranscriptionFailed);
  BackwardsTranscriber backwards;
  CHECK(drop_of([&] { transcribe(segment_of(tone(3), 0.0), backwards); }) == DropReason::kTranscriptionFailed);
}

TEST_CASE("segment ids") {
  CHECK(make_segment_id("abc", 1.5) == "abc_00001500");
  CHECK(make_segment_id("abc", 0.0) == "abc_00000000");
  CHECK(make_segment_id("abc", 8.55) == "abc_00008550");
  CHECK(make_segment_id("abc", 1.0) < make_segment_id("abc", 10.0));
}
