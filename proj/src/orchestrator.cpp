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

#include "emocurate/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "emocurate/bounded_queue.hpp"
#include "emocurate/checkpoint.hpp"
#include "emocurate/error.hpp"
#include "emocurate/util.hpp"
#include "emocurate/wav.hpp"

namespace emocurate {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::size_t positive_size(const KvConfig& kv, const std::string& key, std::size_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 1) throw Error(ErrorKind::kConfig, "must be >= 1", key);
  return static_cast<std::size_t>(v);
}

std::map<std::string, int> parse_script(const KvConfig& kv, const std::string& key) {
  std::map<std::string, int> out;
  for (const auto& item : kv.get_list(key)) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::kConfig, "expected segment_id:count", key);
    const long long n = parse_int(item.substr(colon + 1), key);
    if (n < 0) throw Error(ErrorKind::kConfig, "count must be >= 0", key);
    out[std::string(trim(item.substr(0, colon)))] = static_cast<int>(n);
  }
  return out;
}

std::string render_script(const std::map<std::string, int>& m) {
  std::vector<std::string> parts;
  for (const auto& [k, v] : m) parts.push_back(k + ":" + std::to_string(v));
  return join(parts, ",");
}

}  // namespace

PipelineConfig PipelineConfig::from_kv(const KvConfig& kv) {
  PipelineConfig c;
  c.workers.audio = positive_size(kv, "workers.audio", 1);
  c.workers.vision = positive_size(kv, "workers.vision", 1);
  c.workers.analysis = positive_size(kv, "workers.analysis", 1);
  c.queue_capacity = positive_size(kv, "queue_capacity", c.queue_capacity);
  c.checkpoint_path = kv.get_string("checkpoint_path", "");
  c.ablation_no_vision = kv.get_bool("ablation_no_vision", false);

  c.separator = kv.get_string("separator", c.separator);
  c.transcriber = kv.get_string("transcriber", c.transcriber);
  c.detector = kv.get_string("detector", c.detector);
  c.scorer = kv.get_string("scorer", c.scorer);
  c.mllm = kv.get_string("mllm", c.mllm);
  const long long mc = kv.get_int("mllm.max_concurrency", 0);
  if (mc < 0) throw Error(ErrorKind::kConfig, "must be >= 0", "mllm.max_concurrency");
  c.mllm_max_concurrency = static_cast<std::size_t>(mc);

  if (auto card = kv.get("rate_card")) c.rates = RateCard::load(*card);
  c.rates.input_usd_per_token = kv.get_double("rate.input_usd_per_token", c.rates.input_usd_per_token);
  c.rates.output_usd_per_token = kv.get_double("rate.output_usd_per_token", c.rates.output_usd_per_token);
  if (c.rates.input_usd_per_token < 0) throw Error(ErrorKind::kConfig, "must be >= 0", "rate.input_usd_per_token");
  if (c.rates.output_usd_per_token < 0) throw Error(ErrorKind::kConfig, "must be >= 0", "rate.output_usd_per_token");

  c.retry.max_attempts = static_cast<int>(kv.get_int("retry.max_attempts", c.retry.max_attempts));
  for (const auto& b : kv.get_list("retry.backoff_s")) c.retry.backoff_s.push_back(parse_double(b, "retry.backoff_s"));

  c.vad.frame_ms = static_cast<int>(kv.get_int("vad.frame_ms", c.vad.frame_ms));
  c.vad.energy_threshold_db = kv.get_double("vad.energy_threshold_db", c.vad.energy_threshold_db);
  c.vad.hangover_frames = static_cast<int>(kv.get_int("vad.hangover_frames", c.vad.hangover_frames));
  c.vad.min_speech_s = kv.get_double("vad.min_speech_s", c.vad.min_speech_s);
  c.vad.merge_gap_s = kv.get_double("vad.merge_gap_s", c.vad.merge_gap_s);
  c.min_transcribe_s = kv.get_double("transcribe.min_duration_s", c.min_transcribe_s);

  c.detect_min_confidence = kv.get_double("vision.detect_min_confidence", c.detect_min_confidence);
  c.detect_stride = positive_size(kv, "vision.detect_stride", c.detect_stride);
  c.tracking.iou_threshold = kv.get_double("vision.iou_threshold", c.tracking.iou_threshold);
  const long long gap = kv.get_int("vision.max_gap", static_cast<long long>(c.tracking.max_gap));
  if (gap < 0) throw Error(ErrorKind::kConfig, "must be >= 0", "vision.max_gap");
  c.tracking.max_gap = static_cast<std::size_t>(gap);
  c.selection.min_mean = kv.get_double("vision.min_mean", c.selection.min_mean);
  c.selection.ambiguity_margin = kv.get_double("vision.ambiguity_margin", c.selection.ambiguity_margin);
  c.crop_stride = positive_size(kv, "vision.crop_stride", c.crop_stride);
  c.media_mode = kv.get_string("analysis.media", c.media_mode);
  c.templates_dir = kv.get_string("templates_dir", "");

  c.mock_garbage = parse_script(kv, "mock.mllm.garbage");
  c.mock_transport_failures = parse_script(kv, "mock.mllm.transport_failures");
  c.mock_mllm_delay_s = kv.get_double("mock.mllm.delay_ms", 0.0) / 1000.0;
  c.halt_after = kv.get_string("debug.halt_after", "");

  if (auto unused = kv.unused_keys(); !unused.empty()) {
    throw Error(ErrorKind::kConfig, "unknown configuration key", unused.front());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  KvConfig kv = KvConfig::load(path);
  // Paths inside the file are relative to the file.
  const fs::path base = fs::absolute(path).parent_path();
  for (const char* key : {"rate_card", "templates_dir", "checkpoint_path"}) {
    if (auto v = kv.get(key); v && !v->empty() && fs::path(*v).is_relative()) kv.set(key, (base / *v).string());
  }
  KvConfig fresh = KvConfig::parse(kv.to_text(), path.string());
  return from_kv(fresh);
}

KvConfig PipelineConfig::to_kv() const {
  KvConfig kv;
  kv.set("workers.audio", std::to_string(workers.audio));
  kv.set("workers.vision", std::to_string(workers.vision));
  kv.set("workers.analysis", std::to_string(workers.analysis));
  kv.set("queue_capacity", std::to_string(queue_capacity));
  if (!checkpoint_path.empty()) kv.set("checkpoint_path", checkpoint_path.string());
  kv.set("ablation_no_vision", ablation_no_vision ? "true" : "false");
  kv.set("separator", separator);
  kv.set("transcriber", transcriber);
  kv.set("detector", detector);
  kv.set("scorer", scorer);
  kv.set("mllm", mllm);
  kv.set("mllm.max_concurrency", std::to_string(mllm_max_concurrency));
  kv.set("rate.input_usd_per_token", format_double(rates.input_usd_per_token));
  kv.set("rate.output_usd_per_token", format_double(rates.output_usd_per_token));
  kv.set("retry.max_attempts", std::to_string(retry.max_attempts));
  std::vector<std::string> backoff;
  for (double b : retry.backoff_s) backoff.push_back(format_double(b));
  kv.set("retry.backoff_s", join(backoff, ","));
  kv.set("vad.frame_ms", std::to_string(vad.frame_ms));
  kv.set("vad.energy_threshold_db", format_double(vad.energy_threshold_db));
  kv.set("vad.hangover_frames", std::to_string(vad.hangover_frames));
  kv.set("vad.min_speech_s", format_double(vad.min_speech_s));
  kv.set("vad.merge_gap_s", format_double(vad.merge_gap_s));
  kv.set("transcribe.min_duration_s", format_double(min_transcribe_s));
  kv.set("vision.detect_min_confidence", format_double(detect_min_confidence));
  kv.set("vision.detect_stride", std::to_string(detect_stride));
  kv.set("vision.iou_threshold", format_double(tracking.iou_threshold));
  kv.set("vision.max_gap", std::to_string(tracking.max_gap));
  kv.set("vision.min_mean", format_double(selection.min_mean));
  kv.set("vision.ambiguity_margin", format_double(selection.ambiguity_margin));
  kv.set("vision.crop_stride", std::to_string(crop_stride));
  kv.set("analysis.media", media_mode);
  if (!templates_dir.empty()) kv.set("templates_dir", templates_dir.string());
  kv.set("mock.mllm.garbage", render_script(mock_garbage));
  kv.set("mock.mllm.transport_failures", render_script(mock_transport_failures));
  kv.set("mock.mllm.delay_ms", format_double(mock_mllm_delay_s * 1000.0));
  if (!halt_after.empty()) kv.set("debug.halt_after", halt_after);
  return kv;
}

void PipelineConfig::validate() const {
  if (workers.audio < 1 || workers.vision < 1 || workers.analysis < 1) throw Error(ErrorKind::kConfig, "must be >= 1", "workers");
  if (queue_capacity < 1) throw Error(ErrorKind::kConfig, "must be >= 1", "queue_capacity");
  vad.validate();
  retry.validate();
  if (media_mode != "crops" && media_mode != "full") throw Error(ErrorKind::kConfig, "must be crops or full", "analysis.media");
  if (!halt_after.empty() && halt_after != "audio" && halt_after != "vision") {
    throw Error(ErrorKind::kConfig, "must be audio or vision", "debug.halt_after");
  }
  if (!(detect_min_confidence >= 0 && detect_min_confidence <= 1)) throw Error(ErrorKind::kConfig, "must be in [0, 1]", "vision.detect_min_confidence");
  if (!(tracking.iou_threshold >= 0 && tracking.iou_threshold <= 1)) throw Error(ErrorKind::kConfig, "must be in [0, 1]", "vision.iou_threshold");
  if (!(selection.min_mean >= 0 && selection.min_mean <= 1)) throw Error(ErrorKind::kConfig, "must be in [0, 1]", "vision.min_mean");
  if (!(selection.ambiguity_margin >= 0)) throw Error(ErrorKind::kConfig, "must be >= 0", "vision.ambiguity_margin");
  if (!(min_transcribe_s >= 0)) throw Error(ErrorKind::kConfig, "must be >= 0", "transcribe.min_duration_s");
  if (!(mock_mllm_delay_s >= 0)) throw Error(ErrorKind::kConfig, "must be >= 0", "mock.mllm.delay_ms");
}

// ---------------------------------------------------------------------------
// Job state, ledger, records

const char* to_string(JobStage s) noexcept {
  switch (s) {
    case JobStage::kIngested: return "ingested";
    case JobStage::kAudioDone: return "audio-done";
    case JobStage::kVisionDone: return "vision-done";
    case JobStage::kAnnotated: return "annotated";
    case JobStage::kDropped: return "dropped";
  }
  return "unknown";
}

namespace {

JobStage job_stage_from_string(const std::string& s) {
  for (auto st : {JobStage::kIngested, JobStage::kAudioDone, JobStage::kVisionDone, JobStage::kAnnotated, JobStage::kDropped}) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorKind::kParse, "unknown job stage '" + s + "'");
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void to_json(json& j, const JobState& s) {
  j = json{{"segment_id", s.segment_id},
           {"asset_id", s.asset_id},
           {"start", s.start},
           {"end", s.end},
           {"stage", to_string(s.stage)},
           {"drop_reason", s.drop_reason ? json(to_string(*s.drop_reason)) : json(nullptr)},
           {"drop_message", s.drop_message},
           {"attempts", s.attempts},
           {"input_tokens", s.usage.input_tokens},
           {"output_tokens", s.usage.output_tokens},
           {"cost_usd", s.cost_usd},
           {"timestamps_ms", s.timestamps_ms}};
}

void from_json(const json& j, JobState& s) {
  s.segment_id = j.at("segment_id").get<std::string>();
  s.asset_id = j.at("asset_id").get<std::string>();
  s.start = j.at("start").get<double>();
  s.end = j.at("end").get<double>();
  s.stage = job_stage_from_string(j.at("stage").get<std::string>());
  s.drop_reason.reset();
  if (!j.at("drop_reason").is_null()) s.drop_reason = drop_reason_from_string(j.at("drop_reason").get<std::string>());
  s.drop_message = j.value("drop_message", "");
  s.attempts = j.value("attempts", 0);
  s.usage.input_tokens = j.value("input_tokens", std::int64_t{0});
  s.usage.output_tokens = j.value("output_tokens", std::int64_t{0});
  s.cost_usd = j.value("cost_usd", 0.0);
  s.timestamps_ms = j.value("timestamps_ms", std::map<std::string, std::int64_t>{});
}

RunLedger compute_ledger(std::span<const JobState> jobs, double input_media_s, double wall_clock_s) {
  RunLedger l;
  double out_s = 0;
  for (const auto& j : jobs) {
    ++l.segments_ingested;
    if (j.stage == JobStage::kAnnotated) {
      ++l.segments_annotated;
      out_s += j.duration();
    } else if (j.stage == JobStage::kDropped) {
      ++l.segments_dropped;
      ++l.drop_histogram[j.drop_reason ? to_string(*j.drop_reason) : "unknown"];
    }
    l.total_cost_usd += j.cost_usd;
    l.input_tokens += j.usage.input_tokens;
    l.output_tokens += j.usage.output_tokens;
  }
  l.input_media_hours = input_media_s / 3600.0;
  l.output_annotated_hours = out_s / 3600.0;
  l.retention_rate = input_media_s > 0 ? out_s / input_media_s : 0.0;
  l.wall_clock_s = wall_clock_s;
  l.speed_ratio = wall_clock_s > 0 ? input_media_s / wall_clock_s : 0.0;
  if (l.output_annotated_hours > 0) l.cost_per_output_hour_usd = l.total_cost_usd / l.output_annotated_hours;
  return l;
}

json RunLedger::to_json() const {
  return json{{"input_media_hours", input_media_hours},
              {"output_annotated_hours", output_annotated_hours},
              {"retention_rate", retention_rate},
              {"wall_clock_s", wall_clock_s},
              {"speed_ratio", speed_ratio},
              {"total_cost_usd", total_cost_usd},
              {"cost_per_output_hour_usd", opt_json(cost_per_output_hour_usd)},
              {"drop_histogram", drop_histogram},
              {"assets", assets},
              {"segments_ingested", segments_ingested},
              {"segments_annotated", segments_annotated},
              {"segments_dropped", segments_dropped},
              {"input_tokens", input_tokens},
              {"output_tokens", output_tokens},
              {"failed_assets", failed_assets},
              {"snr_before_db", opt_json(snr_before_db)},
              {"snr_after_db", opt_json(snr_after_db)},
              {"snr_improvement_db", opt_json(snr_improvement_db)},
              {"snr_improvement_linear_pct", opt_json(snr_improvement_linear_pct)},
              {"effective_workers", {{"audio", effective_workers.audio}, {"vision", effective_workers.vision}, {"analysis", effective_workers.analysis}}},
              {"queue_capacity", queue_capacity},
              {"peak_vision_queue", peak_vision_queue},
              {"peak_analysis_queue", peak_analysis_queue}};
}

RunLedger RunLedger::from_json(const json& j) {
  RunLedger l;
  l.input_media_hours = j.at("input_media_hours").get<double>();
  l.output_annotated_hours = j.at("output_annotated_hours").get<double>();
  l.retention_rate = j.at("retention_rate").get<double>();
  l.wall_clock_s = j.at("wall_clock_s").get<double>();
  l.speed_ratio = j.at("speed_ratio").get<double>();
  l.total_cost_usd = j.at("total_cost_usd").get<double>();
  l.cost_per_output_hour_usd = opt_from<double>(j, "cost_per_output_hour_usd");
  l.drop_histogram = j.at("drop_histogram").get<std::map<std::string, std::size_t>>();
  l.assets = j.at("assets").get<std::size_t>();
  l.segments_ingested = j.at("segments_ingested").get<std::size_t>();
  l.segments_annotated = j.at("segments_annotated").get<std::size_t>();
  l.segments_dropped = j.at("segments_dropped").get<std::size_t>();
  l.input_tokens = j.at("input_tokens").get<std::int64_t>();
  l.output_tokens = j.at("output_tokens").get<std::int64_t>();
  l.failed_assets = j.at("failed_assets").get<std::map<std::string, std::string>>();
  l.snr_before_db = opt_from<double>(j, "snr_before_db");
  l.snr_after_db = opt_from<double>(j, "snr_after_db");
  l.snr_improvement_db = opt_from<double>(j, "snr_improvement_db");
  l.snr_improvement_linear_pct = opt_from<double>(j, "snr_improvement_linear_pct");
  const auto& w = j.at("effective_workers");
  l.effective_workers = {w.at("audio").get<std::size_t>(), w.at("vision").get<std::size_t>(), w.at("analysis").get<std::size_t>()};
  l.queue_capacity = j.at("queue_capacity").get<std::size_t>();
  l.peak_vision_queue = j.at("peak_vision_queue").get<std::size_t>();
  l.peak_analysis_queue = j.at("peak_analysis_queue").get<std::size_t>();
  return l;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string RunLedger::summary_text() const {
  std::string s;
  s += "assets                 " + std::to_string(assets) + "\n";
  s += "input media            " + fixed(input_media_hours, 4) + " h\n";
  s += "annotated output       " + fixed(output_annotated_hours, 4) + " h\n";
  s += "retention              " + fixed(retention_rate * 100.0, 2) + " %\n";
  s += "segments               " + std::to_string(segments_ingested) + " ingested, " +
       std::to_string(segments_annotated) + " annotated, " + std::to_string(segments_dropped) + " dropped\n";
  for (const auto& [reason, n] : drop_histogram) s += "  dropped " + reason + ": " + std::to_string(n) + "\n";
  for (const auto& [uri, reason] : failed_assets) s += "  failed asset " + uri + ": " + reason + "\n";
  s += "wall clock             " + fixed(wall_clock_s, 2) + " s\n";
  s += "speed ratio            1:" + (speed_ratio > 0 ? fixed(1.0 / speed_ratio, 3) : std::string("n/a")) +
       " (wall : media)\n";
  s += "total cost             $" + fixed(total_cost_usd, 6) + "\n";
  s += "cost per output hour   " + (cost_per_output_hour_usd ? "$" + fixed(*cost_per_output_hour_usd, 4) : std::string("n/a")) + "\n";
  if (snr_before_db && snr_after_db) {
    s += "speech/gap SNR         " + fixed(*snr_before_db, 2) + " dB -> " + fixed(*snr_after_db, 2) + " dB (" +
         fixed(*snr_improvement_db, 2) + " dB, " + fixed(*snr_improvement_linear_pct, 1) + " % linear)\n";
  }
  s += "workers                audio " + std::to_string(effective_workers.audio) + ", vision " +
       std::to_string(effective_workers.vision) + ", analysis " + std::to_string(effective_workers.analysis) + "\n";
  s += "peak queue             vision " + std::to_string(peak_vision_queue) + ", analysis " +
       std::to_string(peak_analysis_queue) + " of " + std::to_string(queue_capacity) + "\n";
  return s;
}

void to_json(json& j, const SegmentRecord& r) {
  j = json{{"segment_id", r.segment_id},
           {"asset_id", r.asset_id},
           {"start", r.start},
           {"end", r.end},
           {"transcript", r.transcript},
           {"words", r.words},
           {"snr_db", opt_json(r.snr_db)},
           {"speaker", r.speaker_track ? json{{"track_id", *r.speaker_track}, {"mean_score", r.speaker_score.value_or(0.0)}}
                                       : json(nullptr)},
           {"media_ref", r.media_ref},
           {"clip", r.clip},
           {"annotation", r.annotation}};
}

void from_json(const json& j, SegmentRecord& r) {
  r.segment_id = j.at("segment_id").get<std::string>();
  r.asset_id = j.at("asset_id").get<std::string>();
  r.start = j.at("start").get<double>();
  r.end = j.at("end").get<double>();
  r.transcript = j.at("transcript").get<std::string>();
  r.words = j.at("words").get<std::vector<WordTiming>>();
  r.snr_db = opt_from<double>(j, "snr_db");
  r.speaker_track.reset();
  r.speaker_score.reset();
  if (auto sp = j.find("speaker"); sp != j.end() && !sp->is_null()) {
    r.speaker_track = sp->at("track_id").get<int>();
    r.speaker_score = sp->at("mean_score").get<double>();
  }
  r.media_ref = j.at("media_ref").get<std::string>();
  r.clip = j.at("clip").get<std::string>();
  r.annotation = j.at("annotation").get<AnnotationRecord>();
}

std::vector<SegmentRecord> read_records(const fs::path& path) {
  std::vector<SegmentRecord> out;
  int n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::kParse, "line " + std::to_string(n) + " is not JSON", path.string());
    try {
      out.push_back(j.get<SegmentRecord>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchema, "line " + std::to_string(n) + ": " + e.what(), path.string());
    }
  }
  return out;
}

std::vector<std::string> read_input_list(const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  std::vector<std::string> out;
  for (const auto& raw : read_lines(path)) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    fs::path p(line);
    out.push_back((p.is_relative() ? base / p : p).lexically_normal().string());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adapters

namespace {

std::optional<std::string> command_of(const std::string& spec) {
  static constexpr std::string_view kPrefix = "command:";
  if (spec.rfind(kPrefix, 0) == 0) return spec.substr(kPrefix.size());
  return std::nullopt;
}

}  // namespace

Adapters make_adapters(const PipelineConfig& cfg, Adapters a) {
  if (!a.separator) {
    if (cfg.separator == "mock") {
      a.separator = std::make_shared<MockSeparator>();
    } else if (cfg.separator == "bandpass") {
      a.separator = std::make_shared<BandpassSeparator>();
    } else if (auto cmd = command_of(cfg.separator)) {
      a.separator = std::make_shared<CommandSeparator>(*cmd);
    } else {
      throw Error(ErrorKind::kConfig, "unknown separator '" + cfg.separator + "'", "separator");
    }
  }
  if (!a.transcriber) {
    if (cfg.transcriber == "mock") {
      a.transcriber = std::make_shared<MockTranscriber>(cfg.min_transcribe_s);
    } else if (auto cmd = command_of(cfg.transcriber)) {
      a.transcriber = std::make_shared<CommandTranscriber>(*cmd);
    } else {
      throw Error(ErrorKind::kConfig, "unknown transcriber '" + cfg.transcriber + "'", "transcriber");
    }
  }
  if (!a.detector) {
    if (cfg.detector == "mock") {
      a.detector = std::make_shared<MockFaceDetector>();
    } else if (auto cmd = command_of(cfg.detector)) {
      a.detector = std::make_shared<CommandFaceDetector>(*cmd);
    } else {
      throw Error(ErrorKind::kConfig, "unknown detector '" + cfg.detector + "'", "detector");
    }
  }
  if (!a.scorer) {
    if (cfg.scorer == "mock") {
      a.scorer = std::make_shared<ConfidenceScorer>();
    } else if (cfg.scorer.rfind("constant:", 0) == 0) {
      const double v = parse_double(cfg.scorer.substr(9), "scorer");
      if (!(v >= 0 && v <= 1)) throw Error(ErrorKind::kConfig, "constant score must be in [0, 1]", "scorer");
      a.scorer = std::make_shared<ConstantScorer>(v);
    } else {
      throw Error(ErrorKind::kConfig, "unknown scorer '" + cfg.scorer + "'", "scorer");
    }
  }
  if (!a.mllm) {
    if (cfg.mllm == "mock") {
      auto m = std::make_shared<MockMllmClient>();
      for (const auto& [id, n] : cfg.mock_garbage) m->script_garbage(id, n);
      for (const auto& [id, n] : cfg.mock_transport_failures) m->script_transport_failures(id, n);
      m->set_delay(cfg.mock_mllm_delay_s);
      m->set_caps({true, cfg.mllm_max_concurrency});
      a.mllm = m;
    } else if (auto cmd = command_of(cfg.mllm)) {
      a.mllm = std::make_shared<CommandMllmClient>(*cmd, cfg.mllm_max_concurrency ? cfg.mllm_max_concurrency : 1);
    } else {
      throw Error(ErrorKind::kConfig, "unknown mllm '" + cfg.mllm + "'", "mllm");
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// Run

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::size_t narrower(AdapterCaps a, AdapterCaps b, std::size_t requested) {
  return std::min(a.effective_width(requested), b.effective_width(requested));
}

std::string full_media_ref(const JobState& j) {
  return "asset:" + j.asset_id + "#t=" + format_double(j.start) + "," + format_double(j.end);
}

// A segment moving between stages.
struct Work {
  JobState job;
  std::string transcript;
  std::vector<WordTiming> words;
  std::optional<double> snr_db;
  std::string media_ref;
  std::optional<int> track;
  std::optional<double> score;
};

json work_to_json(const Work& w) {
  return json{{"job", w.job},
              {"transcript", w.transcript},
              {"words", w.words},
              {"snr_db", opt_json(w.snr_db)},
              {"media_ref", w.media_ref},
              {"track", opt_json(w.track)},
              {"score", opt_json(w.score)}};
}

Work work_from_json(const json& j) {
  Work w;
  w.job = j.at("job").get<JobState>();
  w.transcript = j.at("transcript").get<std::string>();
  w.words = j.at("words").get<std::vector<WordTiming>>();
  w.snr_db = opt_from<double>(j, "snr_db");
  w.media_ref = j.at("media_ref").get<std::string>();
  w.track = opt_from<int>(j, "track");
  w.score = opt_from<double>(j, "score");
  return w;
}

std::string clip_rel(const std::string& id) { return "clips/" + id + ".wav"; }

void drop(Work& w, DropReason r, const std::string& message) {
  w.job.stage = JobStage::kDropped;
  w.job.drop_reason = r;
  w.job.drop_message = message;
}

struct AssetSummary {
  double duration = 0;
  std::optional<double> snr_before;
  std::optional<double> snr_after;
};

class Run {
 public:
  Run(std::vector<std::string> inputs, PipelineConfig cfg, fs::path out, Adapters adapters)
      : inputs_(std::move(inputs)),
        cfg_(std::move(cfg)),
        out_(fs::absolute(std::move(out))),
        store_(cfg_.checkpoint_path.empty() ? out_ / "checkpoint" : fs::absolute(cfg_.checkpoint_path)),
        ad_(std::move(adapters)) {}

  RunResult execute();

 private:
  void audio_worker(BoundedQueue<Work>& next);
  void process_asset(const std::string& uri, BoundedQueue<Work>& next);
  void vision_worker(BoundedQueue<Work>& in, BoundedQueue<Work>& next);
  void analysis_worker(BoundedQueue<Work>& in);
  void record(const Work& w);
  void push(BoundedQueue<Work>& q, Work w);
  RunLedger finalize(double wall_s, const StageWorkers& widths, std::size_t peak_v, std::size_t peak_a);

  std::vector<std::string> inputs_;
  PipelineConfig cfg_;
  fs::path out_;
  CheckpointStore store_;
  Adapters ad_;
  PromptTemplates templates_;
  MediaRegistry registry_;

  std::atomic<std::size_t> next_input_{0};
  std::mutex mu_;
  std::set<std::string> claimed_;
  std::map<std::string, JobState> jobs_;
  std::map<std::string, SegmentRecord> records_;
  std::map<std::string, std::string> failed_assets_;
  std::map<std::string, AssetSummary> asset_summaries_;
};

void Run::push(BoundedQueue<Work>& q, Work w) { q.push(std::move(w)); }

void Run::record(const Work& w) {
  std::lock_guard lock(mu_);
  jobs_[w.job.segment_id] = w.job;
}

void Run::audio_worker(BoundedQueue<Work>& next) {
  for (;;) {
    const std::size_t i = next_input_.fetch_add(1);
    if (i >= inputs_.size()) return;
    process_asset(inputs_[i], next);
  }
}

void Run::process_asset(const std::string& uri, BoundedQueue<Work>& next) {
  MediaAsset asset;
  try {
    asset = registry_.register_asset(uri);
  } catch (const Error& e) {
    std::lock_guard lock(mu_);
    failed_assets_[uri] = e.what();
    return;
  }
  {
    std::lock_guard lock(mu_);
    if (!claimed_.insert(asset.asset_id).second) return;  // same bytes listed twice
  }
  const std::string marker = "assets/" + asset.asset_id;
  std::vector<Work> works;
  AssetSummary summary;
  summary.duration = asset.duration;

  if (auto m = store_.get(marker)) {
    summary.snr_before = opt_from<double>(*m, "snr_before_db");
    summary.snr_after = opt_from<double>(*m, "snr_after_db");
    if (auto f = m->find("failed"); f != m->end() && !f->is_null()) {
      std::lock_guard lock(mu_);
      failed_assets_[uri] = f->get<std::string>();
      asset_summaries_[asset.asset_id] = summary;
      return;
    }
    for (const auto& id : m->at("segments")) {
      auto payload = store_.get("segments/" + id.get<std::string>() + ".audio");
      if (!payload) throw Error(ErrorKind::kIntegrity, "asset marker lists a missing segment", id.get<std::string>());
      works.push_back(work_from_json(*payload));
    }
  } else {
    auto src = registry_.source(asset.asset_id);
    json mj{{"asset", asset}, {"failed", nullptr}, {"segments", json::array()}};
    SeparationResult sep;
    try {
      sep = separate_vocals(src->canonical_audio(), *ad_.separator, asset.asset_id);
    } catch (const Error& e) {
      const std::string reason = std::string(to_string(DropReason::kSeparationFailed)) + ": " + e.what();
      mj["failed"] = reason;
      store_.put(marker, mj);
      std::lock_guard lock(mu_);
      failed_assets_[uri] = reason;
      asset_summaries_[asset.asset_id] = summary;
      return;
    }
    const auto spans = vad_segment(sep.vocals, cfg_.vad, asset.asset_id);
    summary.snr_before = speech_to_gap_snr_db(src->canonical_audio(), spans);
    summary.snr_after = speech_to_gap_snr_db(sep.vocals, spans);
    mj["snr_before_db"] = opt_json(summary.snr_before);
    mj["snr_after_db"] = opt_json(summary.snr_after);

    // Gap power of the vocal track, the noise reference for per-segment SNR.
    std::vector<bool> in_speech(sep.vocals.samples.size(), false);
    for (const auto& sp : spans) {
      const AudioBuffer s = slice_audio(sep.vocals, sp.start, sp.end);
      const auto a = static_cast<std::size_t>(std::llround(sp.start * sep.vocals.sample_rate));
      for (std::size_t k = 0; k < s.samples.size(); ++k) in_speech[a + k] = true;
    }
    double gap_p = 0;
    std::size_t gap_n = 0;
    for (std::size_t k = 0; k < in_speech.size(); ++k) {
      if (!in_speech[k]) {
        gap_p += sep.vocals.samples[k] * sep.vocals.samples[k];
        ++gap_n;
      }
    }
    gap_p = gap_n ? gap_p / static_cast<double>(gap_n) : 0.0;

    for (const auto& sp : spans) {
      Work w;
      SpeechSegment seg;
      seg.span = sp;
      seg.audio = slice_audio(sep.vocals, sp.start, sp.end);
      w.job.segment_id = seg.segment_id();
      w.job.asset_id = asset.asset_id;
      w.job.start = sp.start;
      w.job.end = sp.end;
      w.job.timestamps_ms["ingested"] = now_ms();
      if (gap_p > 0 && !seg.audio.samples.empty()) {
        double p = 0;
        for (double v : seg.audio.samples) p += v * v;
        p /= static_cast<double>(seg.audio.samples.size());
        if (p > 0) w.snr_db = 10.0 * std::log10(p / gap_p);
      }
      try {
        write_wav(out_ / clip_rel(w.job.segment_id), seg.audio.samples, seg.audio.sample_rate);
        seg = transcribe(std::move(seg), *ad_.transcriber);
        w.transcript = seg.transcript;
        w.words = seg.words;
        w.job.stage = JobStage::kAudioDone;
      } catch (const StageError& e) {
        drop(w, e.reason(), e.what());
      } catch (const Error& e) {
        drop(w, DropReason::kIoFailed, e.what());
      }
      w.job.timestamps_ms[to_string(w.job.stage)] = now_ms();
      if (cfg_.ablation_no_vision && w.job.stage != JobStage::kDropped) w.media_ref = full_media_ref(w.job);
      store_.put("segments/" + w.job.segment_id + ".audio", work_to_json(w));
      mj["segments"].push_back(w.job.segment_id);
      works.push_back(std::move(w));
    }
    // Written last: its presence means every segment file above is complete.
    store_.put(marker, mj);
  }

  {
    std::lock_guard lock(mu_);
    asset_summaries_[asset.asset_id] = summary;
  }
  for (auto& w : works) {
    record(w);
    if (w.job.stage == JobStage::kDropped || cfg_.halt_after == "audio") continue;
    push(next, std::move(w));
  }
}

void Run::vision_worker(BoundedQueue<Work>& in, BoundedQueue<Work>& next) {
  while (auto item = in.pop()) {
    Work w = std::move(*item);
    const std::string name = "segments/" + w.job.segment_id + ".vision";
    if (auto ck = store_.get(name)) {
      w = work_from_json(*ck);
    } else {
      try {
        auto src = registry_.source(w.job.asset_id);
        const Clip clip = slice_segment(*src, SegmentSpan{w.job.asset_id, w.job.start, w.job.end});
        if (clip.frames.empty()) {
          drop(w, DropReason::kNoFace, "segment has no video frames");
        } else {
          auto boxes = detect_faces(clip.frames, *ad_.detector, cfg_.detect_min_confidence, cfg_.detect_stride, w.job.segment_id);
          auto tracks = link_tracks(std::move(boxes), cfg_.tracking);
          const WavData wav = read_wav(out_ / clip_rel(w.job.segment_id));
          const AudioBuffer audio{wav.samples, wav.sample_rate};
          const auto sel = select_speaker(tracks, *ad_.scorer, audio, cfg_.selection, w.job.segment_id);
          if (sel.reason != SelectionReason::kSelected) {
            drop(w, drop_reason_for(sel.reason), std::string(to_string(sel.reason)) + " (best mean " + format_double(sel.mean_score) + ")");
          } else {
            const auto& track = *std::find_if(tracks.begin(), tracks.end(),
                                              [&](const FaceTrack& t) { return t.track_id == *sel.chosen_track; });
            const std::string crops = "crops/" + w.job.segment_id;
            write_crops(out_ / crops, clip.frames, track, cfg_.crop_stride);
            w.track = sel.chosen_track;
            w.score = sel.mean_score;
            w.media_ref = cfg_.media_mode == "full" ? full_media_ref(w.job) : crops + "/index.tsv";
            w.job.stage = JobStage::kVisionDone;
          }
        }
      } catch (const StageError& e) {
        drop(w, e.reason(), e.what());
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kIntegrity) throw;
        drop(w, DropReason::kIoFailed, e.what());
      }
      w.job.timestamps_ms[to_string(w.job.stage)] = now_ms();
      store_.put(name, work_to_json(w));
    }
    record(w);
    if (w.job.stage == JobStage::kDropped || cfg_.halt_after == "vision") continue;
    push(next, std::move(w));
  }
}

void Run::analysis_worker(BoundedQueue<Work>& in) {
  while (auto item = in.pop()) {
    Work w = std::move(*item);
    const std::string name = "segments/" + w.job.segment_id + ".analysis";
    std::optional<AnnotationRecord> rec;
    if (auto ck = store_.get(name)) {
      w = work_from_json(*ck);
      if (auto r = ck->find("record"); r != ck->end() && !r->is_null()) rec = r->get<AnnotationRecord>();
    } else {
      SpeechSegment seg;
      seg.span = SegmentSpan{w.job.asset_id, w.job.start, w.job.end};
      seg.transcript = w.transcript;
      seg.words = w.words;
      const PromptBundle prompt = build_prompt(seg, w.media_ref, templates_);
      const AnnotateResult res = annotate(prompt, *ad_.mllm, cfg_.retry, cfg_.rates);
      w.job.attempts = res.attempts;
      w.job.usage = res.usage;
      w.job.cost_usd = res.cost_usd;
      if (res.record) {
        rec = res.record;
        w.job.stage = JobStage::kAnnotated;
      } else {
        drop(w, res.drop.value_or(DropReason::kUnparseableResponse), res.message);
      }
      w.job.timestamps_ms[to_string(w.job.stage)] = now_ms();
      json payload = work_to_json(w);
      payload["record"] = rec ? json(*rec) : json(nullptr);
      store_.put(name, payload);
    }
    record(w);
    if (rec) {
      SegmentRecord r;
      r.segment_id = w.job.segment_id;
      r.asset_id = w.job.asset_id;
      r.start = w.job.start;
      r.end = w.job.end;
      r.transcript = w.transcript;
      r.words = w.words;
      r.snr_db = w.snr_db;
      r.speaker_track = w.track;
      r.speaker_score = w.score;
      r.media_ref = w.media_ref;
      r.clip = clip_rel(w.job.segment_id);
      r.annotation = *rec;
      std::lock_guard lock(mu_);
      records_[r.segment_id] = std::move(r);
    }
  }
}

RunLedger Run::finalize(double wall_s, const StageWorkers& widths, std::size_t peak_v, std::size_t peak_a) {
  auto by_time = [](const auto& a, const auto& b) {
    return std::tie(a.asset_id, a.start, a.segment_id) < std::tie(b.asset_id, b.start, b.segment_id);
  };
  std::vector<JobState> jobs;
  for (auto& [id, j] : jobs_) jobs.push_back(j);
  std::sort(jobs.begin(), jobs.end(), by_time);
  std::vector<SegmentRecord> recs;
  for (auto& [id, r] : records_) recs.push_back(r);
  std::sort(recs.begin(), recs.end(), by_time);

  std::string text;
  for (const auto& r : recs) text += json(r).dump() + "\n";
  write_file_atomic(out_ / "records.jsonl", text);
  text.clear();
  for (const auto& j : jobs) text += json(j).dump() + "\n";
  write_file_atomic(out_ / "jobs.jsonl", text);

  auto assets = registry_.assets();
  std::sort(assets.begin(), assets.end(), [](const MediaAsset& a, const MediaAsset& b) { return a.asset_id < b.asset_id; });
  text.clear();
  double input_s = 0;
  for (const auto& a : assets) {
    if (!claimed_.count(a.asset_id)) continue;
    text += json(a).dump() + "\n";
    input_s += a.duration;
  }
  write_file_atomic(out_ / "assets.jsonl", text);

  RunLedger l = compute_ledger(jobs, input_s, wall_s);
  l.assets = claimed_.size();
  l.failed_assets = failed_assets_;
  double before = 0, after = 0;
  std::size_t n = 0;
  for (const auto& [id, s] : asset_summaries_) {
    if (!s.snr_before || !s.snr_after) continue;
    before += *s.snr_before;
    after += *s.snr_after;
    ++n;
  }
  if (n > 0) {
    l.snr_before_db = before / static_cast<double>(n);
    l.snr_after_db = after / static_cast<double>(n);
    l.snr_improvement_db = *l.snr_after_db - *l.snr_before_db;
    l.snr_improvement_linear_pct = (std::pow(10.0, *l.snr_improvement_db / 10.0) - 1.0) * 100.0;
  }
  l.effective_workers = widths;
  l.queue_capacity = cfg_.queue_capacity;
  l.peak_vision_queue = peak_v;
  l.peak_analysis_queue = peak_a;
  write_file_atomic(out_ / "ledger.json", l.to_json().dump(2) + "\n");
  write_file_atomic(out_ / "ledger.txt", l.summary_text());
  return l;
}

std::string run_identity_text(PipelineConfig cfg) {
  cfg.halt_after.clear();
  cfg.checkpoint_path.clear();
  return cfg.to_kv().to_text();
}

RunResult Run::execute() {
  const auto t0 = std::chrono::steady_clock::now();
  cfg_.validate();
  ad_ = make_adapters(cfg_, std::move(ad_));
  ad_.separator->check();
  ad_.transcriber->check();
  if (!cfg_.ablation_no_vision) {
    ad_.detector->check();
    ad_.scorer->check();
  }
  ad_.mllm->check();
  templates_ = cfg_.templates_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::load(cfg_.templates_dir);

  RunResult result;
  result.out_dir = out_;
  const json identity{{"config", run_identity_text(cfg_)}, {"inputs", inputs_}, {"out_dir", out_.string()}};
  if (auto prior = store_.get("run")) {
    if (prior->at("config") != identity.at("config") || prior->at("inputs") != identity.at("inputs")) {
      throw Error(ErrorKind::kConfig, "checkpoint belongs to a different run", store_.dir().string());
    }
    store_.verify_all();
    if (auto done = store_.get("complete")) {
      result.ledger = RunLedger::from_json(done->at("ledger"));
      result.complete = true;
      return result;
    }
  } else {
    store_.put("run", identity);
  }
  fs::create_directories(out_ / "clips");
  fs::create_directories(out_ / "crops");
  double prior_wall = 0;
  if (auto s = store_.get("session")) prior_wall = s->at("wall_clock_s").get<double>();

  const StageWorkers widths{
      narrower(ad_.separator->caps(), ad_.transcriber->caps(), cfg_.workers.audio),
      narrower(ad_.detector->caps(), ad_.scorer->caps(), cfg_.workers.vision),
      ad_.mllm->caps().effective_width(cfg_.workers.analysis)};

  BoundedQueue<Work> q_vision(cfg_.queue_capacity);
  BoundedQueue<Work> q_analysis(cfg_.queue_capacity);
  std::mutex fatal_mu;
  std::exception_ptr fatal;
  auto guarded = [&](const std::function<void()>& body) {
    try {
      body();
    } catch (...) {
      {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
      }
      q_vision.close();
      q_analysis.close();
    }
  };
  {
    BoundedQueue<Work>& audio_out = cfg_.ablation_no_vision ? q_analysis : q_vision;
    std::jthread audio([&] {
      guarded([&] { run_workers(widths.audio, [&](std::size_t) { audio_worker(audio_out); }); });
      q_vision.close();
    });
    std::jthread vision([&] {
      guarded([&] { run_workers(widths.vision, [&](std::size_t) { vision_worker(q_vision, q_analysis); }); });
      q_analysis.close();
    });
    std::jthread analysis([&] {
      guarded([&] { run_workers(widths.analysis, [&](std::size_t) { analysis_worker(q_analysis); }); });
    });
  }
  if (fatal) std::rethrow_exception(fatal);

  const double wall = prior_wall + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!cfg_.halt_after.empty()) {
    store_.put("session", json{{"wall_clock_s", wall}});
    result.complete = false;
    return result;
  }
  result.ledger = finalize(wall, widths, q_vision.high_water(), q_analysis.high_water());
  store_.put("session", json{{"wall_clock_s", wall}});
  store_.put("complete", json{{"ledger", result.ledger.to_json()}});
  result.complete = true;
  return result;
}

}  // namespace

RunResult run_pipeline(const std::vector<std::string>& inputs, const PipelineConfig& cfg, const fs::path& out_dir,
                       Adapters adapters) {
  Run run(inputs, cfg, out_dir, std::move(adapters));
  return run.execute();
}

RunResult resume_pipeline(const fs::path& checkpoint_dir, Adapters adapters) {
  const auto run_file = checkpoint_dir / "run.ckpt";
  if (!fs::exists(run_file)) throw Error(ErrorKind::kIntegrity, "no run record in checkpoint", checkpoint_dir.string());
  const json identity = read_checkpoint_file(run_file);
  PipelineConfig cfg = PipelineConfig::from_kv(KvConfig::parse(identity.at("config").get<std::string>(), "checkpoint run"));
  cfg.halt_after.clear();
  if (cfg.checkpoint_path.empty() && fs::absolute(checkpoint_dir) != fs::absolute(identity.at("out_dir").get<std::string>()) / "checkpoint") {
    cfg.checkpoint_path = fs::absolute(checkpoint_dir);
  }
  CheckpointStore(checkpoint_dir).verify_all();
  return run_pipeline(identity.at("inputs").get<std::vector<std::string>>(), cfg, identity.at("out_dir").get<std::string>(),
                      std::move(adapters));
}

}  // namespace emocurate
