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

#include "checks.hpp"

#include <fstream>
#include <random>

#include "corpus.hpp"
#include "emocurate/dataset.hpp"
#include "emocurate/util.hpp"
#include "emocurate/wav.hpp"
#include "support.hpp"

using namespace emocurate;
namespace fs = std::filesystem;

namespace {

using testing::kind_of;

std::vector<std::string> kinds(const ValidationReport& r) {
  std::vector<std::string> k;
  for (const auto& v : r.violations) k.push_back(v.kind);
  return k;
}

bool has_kind(const ValidationReport& r, const std::string& kind) {
  const auto k = kinds(r);
  return std::find(k.begin(), k.end(), kind) != k.end();
}

void rewrite_manifest(const fs::path& dir, const std::function<void(std::vector<nlohmann::json>&)>& edit) {
  std::vector<nlohmann::json> lines;
  std::ifstream in(dir / "manifest.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  }
  in.close();
  edit(lines);
  std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
  for (const auto& j : lines) out << j.dump() << "\n";
}

UtteranceRecord make_record(const std::string& id, double duration, EmotionVector v) {
  UtteranceRecord r;
  r.utterance_id = id;
  r.audio_path = "audio/" + id + ".wav";
  r.duration = duration;
  r.transcript = "words";
  r.emotions = v;
  r.dominant = dominant_emotion(v);
  r.asset_id = "a";
  r.end = duration;
  return r;
}

}  // namespace

TEST_CASE("export a finished run") {
  const auto& run = testing::finished_run();
  TempDir out;
  ExportOptions opts;
  opts.domain = "synthetic";
  const auto rep = export_dataset(run, out.path(), opts);
  const auto records = read_records(run / "records.jsonl");
  CHECK(rep.stats.utterance_count == records.size());
  CHECK(rep.excluded.empty());

  const auto manifest = read_manifest(out.path());
  REQUIRE(manifest.size() == records.size());
  for (std::size_t i = 1; i < manifest.size(); ++i) CHECK(manifest[i - 1].utterance_id < manifest[i].utterance_id);
  for (const auto& m : manifest) {
    CHECK(m.domain == "synthetic");
    CHECK(m.duration >= 2.0);
    CHECK(m.dominant == dominant_emotion(m.emotions));
    const auto wav = read_wav(out.path() / m.audio_path);
    CHECK(wav.sample_rate == 16000);
    CHECK(wav.channels == 1);
    CHECK(std::abs(wav.duration_s() - m.duration) <= 0.05);
  }
  CHECK(compute_stats(manifest) == rep.stats);
  CHECK(read_text_file(out.path() / "stats.txt") == stats_to_text(rep.stats));

  const auto v = validate_dataset(out.path());
  CHECK(v.ok());
  CHECK(v.utterances == manifest.size());

  // Raising the floor excludes short utterances and says so.
  TempDir strict;
  ExportOptions three;
  three.min_duration_s = 3.0;
  const auto r3 = export_dataset(run, strict.path(), three);
  std::size_t short_ones = 0;
  for (const auto& r : records) short_ones += (r.end - r.start) < 3.0;
  CHECK(r3.excluded.size() == short_ones);
  CHECK(r3.stats.utterance_count == records.size() - short_ones);
  CHECK(validate_dataset(strict.path(), 3.0).ok());
}

TEST_CASE("export refuses unfinished runs") {
  const auto& c = testing::corpus();
  TempDir run;
  PipelineConfig cfg;
  cfg.halt_after = "vision";
  run_pipeline(c.inputs, cfg, run.path());
  TempDir out;
  CHECK(kind_of([&] { export_dataset(run.path(), out.path()); }) == ErrorKind::kPrecondition);
  CHECK(kind_of([&] { export_dataset(run.path() / "missing", out.path()); }) == ErrorKind::kPrecondition);
}

TEST_CASE("validator catches each defect") {
  const auto& run = testing::finished_run();
  auto fresh = [&](TempDir& d) {
    export_dataset(run, d.path());
    return read_manifest(d.path());
  };

  {
    TempDir d;
    const auto m = fresh(d);
    fs::remove(d.path() / m[0].audio_path);
    CHECK(kinds(validate_dataset(d.path())) == std::vector<std::string>{"missing-file"});
  }
  {
    TempDir d;
    fresh(d);
    rewrite_manifest(d.path(), [](auto& l) { l[0]["duration"] = l[0]["duration"].template get<double>() + 0.5; });
    const auto r = validate_dataset(d.path());
    CHECK(has_kind(r, "duration-mismatch"));
    CHECK(has_kind(r, "stats-mismatch"));
  }
  {
    TempDir d;
    fresh(d);
    rewrite_manifest(d.path(), [](auto& l) { l.push_back(l[0]); });
    CHECK(has_kind(validate_dataset(d.path()), "duplicate-id"));
  }
  {
    TempDir d;
    fresh(d);
    rewrite_manifest(d.path(), [](auto& l) {
      for (auto& [k, v] : l[0]["emotions"].items()) {
        (void)k;
        v = 0.0;
      }
      l[1]["dominant"] = l[1]["dominant"] == "Admiration" ? "Anger" : "Admiration";
      l[2]["audio_path"] = "../outside.wav";
      l[3]["duration"] = 1.5;
    });
    const auto r = validate_dataset(d.path());
    CHECK(has_kind(r, "invalid-vector"));
    CHECK(has_kind(r, "dominant-mismatch"));
    CHECK(has_kind(r, "bad-path"));
    CHECK(has_kind(r, "minimum-duration"));
    CHECK_FALSE(r.ok());
    CHECK(r.to_text().find("bad-path") != std::string::npos);
  }
  {
    TempDir d;
    const auto m = fresh(d);
    std::ofstream(d.path() / m[0].audio_path, std::ios::trunc) << "RIFF junk";
    write_wav(d.path() / m[1].audio_path, std::vector<double>(16000 * 3, 0.0), 8000);
    std::ofstream(d.path() / "manifest.jsonl", std::ios::app) << "{not json\n";
    const auto r = validate_dataset(d.path());
    const auto k = kinds(r);
    CHECK(std::count(k.begin(), k.end(), "bad-audio") == 2);
    CHECK(has_kind(r, "parse"));
  }
  {
    TempDir d;
    fresh(d);
    fs::remove(d.path() / "stats.txt");
    CHECK(kinds(validate_dataset(d.path())) == std::vector<std::string>{"stats-mismatch"});
  }
  TempDir empty;
  CHECK(kind_of([&] { validate_dataset(empty.path()); }) == ErrorKind::kIo);
}

TEST_CASE("stats arithmetic") {
  std::vector<UtteranceRecord> recs;
  std::mt19937_64 rng(2);
  for (std::size_t i = 0; i < 65970; ++i) {
    recs.push_back(make_record("u" + std::to_string(i), 7.16, testing::random_vector(rng, 2)));
  }
  const auto s = compute_stats(recs);
  CHECK(s.utterance_count == 65970);
  CHECK(s.total_hours == doctest::Approx(131.2).epsilon(1e-3));
  CHECK(s.mean_duration_s == doctest::Approx(7.16));
  std::size_t sum = 0;
  for (auto c : s.dominant_counts) sum += c;
  CHECK(sum == 65970);

  std::vector<UtteranceRecord> few = {make_record("a", 2.0, testing::random_vector(rng)),
                                      make_record("b", 4.5, testing::random_vector(rng))};
  const auto f = compute_stats(few);
  CHECK(f.total_seconds == doctest::Approx(6.5));
  CHECK(f.min_duration_s == 2.0);
  CHECK(stats_to_text(f).find("format_version 1\n") != std::string::npos);
  CHECK(compute_stats({}).utterance_count == 0);
}

TEST_CASE("manifest records round trip") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    auto r = make_record("id" + std::to_string(i), 2.0 + i * 0.37, testing::random_vector(rng, 1 + i % 3));
    r.domain = i % 2 ? "drama" : "";
    r.rationale = "quote \" and tab\t";
    if (i % 3 == 0) r.assessments = {{"audio", "rising pitch"}, {"facial", "smile"}, {"text", "thanks"}};
    const nlohmann::json j = r;
    CHECK(j.at("emotions").size() == kNumCategories);
    CHECK(j.get<UtteranceRecord>() == r);
  }
}
