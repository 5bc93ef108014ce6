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

#include "emocurate/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "emocurate/bounded_queue.hpp"
#include "emocurate/error.hpp"
#include "emocurate/orchestrator.hpp"
#include "emocurate/util.hpp"
#include "emocurate/wav.hpp"

namespace emocurate {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const UtteranceRecord& r) {
  json emo = json::object();
  for (auto c : canonical_categories()) emo[std::string(c.name())] = r.emotions.at(c);
  j = json{{"utterance_id", r.utterance_id},
           {"audio_path", r.audio_path},
           {"duration", r.duration},
           {"transcript", r.transcript},
           {"emotions", emo},
           {"dominant", std::string(r.dominant.name())},
           {"rationale", r.rationale},
           {"assessments", r.assessments},
           {"asset_id", r.asset_id},
           {"start", r.start},
           {"end", r.end},
           {"domain", r.domain}};
}

void from_json(const json& j, UtteranceRecord& r) {
  r.utterance_id = j.at("utterance_id").get<std::string>();
  r.audio_path = j.at("audio_path").get<std::string>();
  r.duration = j.at("duration").get<double>();
  r.transcript = j.at("transcript").get<std::string>();
  const auto& emo = j.at("emotions");
  if (!emo.is_object()) throw Error(ErrorKind::kSchema, "emotions must be an object", "emotions");
  r.emotions = EmotionVector();
  for (const auto& [name, v] : emo.items()) {
    auto c = EmotionCategory::find(name);
    if (!c) throw Error(ErrorKind::kSchema, "unknown category", "emotions." + name);
    r.emotions.set(*c, v.get<double>());
  }
  auto dom = EmotionCategory::find(j.at("dominant").get<std::string>());
  if (!dom) throw Error(ErrorKind::kSchema, "unknown category", "dominant");
  r.dominant = *dom;
  r.rationale = j.at("rationale").get<std::string>();
  r.assessments = j.value("assessments", std::map<std::string, std::string>{});
  r.asset_id = j.at("asset_id").get<std::string>();
  r.start = j.at("start").get<double>();
  r.end = j.at("end").get<double>();
  r.domain = j.value("domain", "");
}

DatasetStats compute_stats(const std::vector<UtteranceRecord>& records) {
  DatasetStats s;
  s.utterance_count = records.size();
  if (records.empty()) return s;
  s.min_duration_s = records.front().duration;
  for (const auto& r : records) {
    s.total_seconds += r.duration;
    s.min_duration_s = std::min(s.min_duration_s, r.duration);
    ++s.dominant_counts[r.dominant.index()];
  }
  s.total_hours = s.total_seconds / 3600.0;
  s.mean_duration_s = s.total_seconds / static_cast<double>(s.utterance_count);
  return s;
}

std::string stats_to_text(const DatasetStats& s) {
  std::string t = "format_version " + std::to_string(kDatasetFormatVersion) + "\n";
  t += "utterance_count " + std::to_string(s.utterance_count) + "\n";
  t += "total_seconds " + format_double(s.total_seconds) + "\n";
  t += "total_hours " + format_double(s.total_hours) + "\n";
  t += "mean_duration_s " + format_double(s.mean_duration_s) + "\n";
  t += "min_duration_s " + format_double(s.min_duration_s) + "\n";
  for (auto c : canonical_categories()) {
    t += "dominant." + std::string(c.name()) + " " + std::to_string(s.dominant_counts[c.index()]) + "\n";
  }
  return t;
}

namespace {

std::string write_manifest(const std::vector<UtteranceRecord>& recs) {
  std::string text;
  for (const auto& r : recs) text += json(r).dump() + "\n";
  return text;
}

}  // namespace

ExportReport export_dataset(const fs::path& run_dir, const fs::path& out_dir, const ExportOptions& opts) {
  if (!fs::exists(run_dir / "ledger.json") || !fs::exists(run_dir / "records.jsonl")) {
    throw Error(ErrorKind::kPrecondition, "run has not completed", run_dir.string());
  }
  const auto recs = read_records(run_dir / "records.jsonl");
  fs::create_directories(out_dir / "audio");

  struct Slot {
    std::optional<UtteranceRecord> rec;
    std::string excluded;
  };
  std::vector<Slot> slots(recs.size());
  std::atomic<std::size_t> next{0};
  const std::size_t width =
      std::max<std::size_t>(1, std::min<std::size_t>(opts.workers ? opts.workers : std::thread::hardware_concurrency(),
                                                     std::max<std::size_t>(1, recs.size())));
  run_workers(width, [&](std::size_t) {
    for (std::size_t i = next++; i < recs.size(); i = next++) {
      const auto& r = recs[i];
      auto& slot = slots[i];
      const double duration = r.end - r.start;
      if (duration < opts.min_duration_s) {
        slot.excluded = "shorter than the minimum duration";
        continue;
      }
      WavData wav;
      try {
        wav = read_wav(run_dir / r.clip);
      } catch (const Error& e) {
        slot.excluded = std::string("clip unreadable: ") + e.what();
        continue;
      }
      if (wav.channels != 1 || wav.sample_rate != 16000) {
        slot.excluded = "clip is not 16 kHz mono";
        continue;
      }
      if (std::abs(wav.duration_s() - duration) > opts.duration_tolerance_s) {
        slot.excluded = "clip length " + format_double(wav.duration_s()) + " s disagrees with span " +
                        format_double(duration) + " s";
        continue;
      }
      const std::string rel = "audio/" + r.segment_id + ".wav";
      write_file_atomic(out_dir / rel, encode_wav_pcm16(wav.samples, wav.sample_rate));
      UtteranceRecord u;
      u.utterance_id = r.segment_id;
      u.audio_path = rel;
      u.duration = duration;
      u.transcript = r.transcript;
      u.emotions = r.annotation.emotions;
      u.dominant = dominant_emotion(u.emotions);
      u.rationale = r.annotation.rationale;
      u.assessments = {{"audio", r.annotation.audio_assessment},
                       {"facial", r.annotation.facial_assessment},
                       {"text", r.annotation.text_assessment}};
      u.asset_id = r.asset_id;
      u.start = r.start;
      u.end = r.end;
      u.domain = opts.domain;
      slot.rec = std::move(u);
    }
  });

  ExportReport report;
  std::vector<UtteranceRecord> kept;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].rec) {
      kept.push_back(std::move(*slots[i].rec));
    } else {
      report.excluded.emplace_back(recs[i].segment_id, slots[i].excluded);
      std::cerr << "export: excluded " << recs[i].segment_id << ": " << slots[i].excluded << "\n";
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  report.stats = compute_stats(kept);
  write_file_atomic(out_dir / "manifest.jsonl", write_manifest(kept));
  write_file_atomic(out_dir / "stats.txt", stats_to_text(report.stats));
  return report;
}

std::vector<UtteranceRecord> read_manifest(const fs::path& dataset_dir) {
  const auto path = dataset_dir / "manifest.jsonl";
  if (!fs::exists(path)) throw Error(ErrorKind::kIo, "no manifest", path.string());
  std::vector<UtteranceRecord> out;
  int n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).get<UtteranceRecord>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(n) + ": " + e.what(), path.string());
    }
  }
  return out;
}

std::string ValidationReport::to_text() const {
  std::string t = std::to_string(utterances) + " utterances, " + std::to_string(violations.size()) + " violations\n";
  for (const auto& v : violations) {
    t += "  " + v.kind + " " + (v.utterance_id.empty() ? "(dataset)" : v.utterance_id) + ": " + v.message + "\n";
  }
  return t;
}

ValidationReport validate_dataset(const fs::path& dataset_dir, double min_duration_s, double duration_tolerance_s) {
  const auto path = dataset_dir / "manifest.jsonl";
  if (!fs::exists(path)) throw Error(ErrorKind::kIo, "no manifest", path.string());
  ValidationReport rep;
  std::vector<UtteranceRecord> recs;
  std::set<std::string> ids;
  int n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (trim(line).empty()) continue;
    UtteranceRecord r;
    try {
      r = json::parse(line).get<UtteranceRecord>();
    } catch (const std::exception& e) {
      rep.violations.push_back({"", "parse", "line " + std::to_string(n) + ": " + e.what()});
      continue;
    }
    ++rep.utterances;
    auto add = [&](std::string kind, std::string msg) { rep.violations.push_back({r.utterance_id, std::move(kind), std::move(msg)}); };
    if (!ids.insert(r.utterance_id).second) add("duplicate-id", "utterance id appears more than once");
    if (!(r.duration >= min_duration_s)) {
      add("minimum-duration", "duration " + format_double(r.duration) + " s is below " + format_double(min_duration_s) + " s");
    }
    if (r.emotions.is_zero()) {
      add("invalid-vector", "all intensities are zero");
    } else if (dominant_emotion(r.emotions) != r.dominant) {
      add("dominant-mismatch", "dominant " + std::string(r.dominant.name()) + " does not match the intensities");
    }
    const fs::path rel(r.audio_path);
    bool bad_path = rel.empty() || rel.is_absolute();
    for (const auto& part : rel) bad_path = bad_path || part == "..";
    if (bad_path) {
      add("bad-path", "audio path must stay inside the dataset");
    } else if (!fs::exists(dataset_dir / rel)) {
      add("missing-file", "audio file " + r.audio_path + " is missing");
    } else {
      try {
        const auto wav = read_wav(dataset_dir / rel);
        if (wav.sample_rate != kCanonicalSampleRate || wav.channels != 1) {
          add("bad-audio", "expected 16 kHz mono, got " + std::to_string(wav.sample_rate) + " Hz x " +
                               std::to_string(wav.channels));
        } else if (std::abs(wav.duration_s() - r.duration) > duration_tolerance_s) {
          add("duration-mismatch", "audio lasts " + format_double(wav.duration_s()) + " s, manifest says " +
                                       format_double(r.duration) + " s");
        }
      } catch (const Error& e) {
        add("bad-audio", e.what());
      }
    }
    recs.push_back(std::move(r));
  }

  const auto stats_path = dataset_dir / "stats.txt";
  if (!fs::exists(stats_path)) {
    rep.violations.push_back({"", "stats-mismatch", "stats.txt is missing"});
  } else if (read_text_file(stats_path) != stats_to_text(compute_stats(recs))) {
    rep.violations.push_back({"", "stats-mismatch", "stats.txt does not match the manifest"});
  }
  return rep;
}

}  // namespace emocurate
