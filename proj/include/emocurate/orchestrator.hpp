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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emocurate/analysis.hpp"
#include "emocurate/audio.hpp"
#include "emocurate/kv_config.hpp"
#include "emocurate/vision.hpp"

namespace emocurate {

struct StageWorkers {
  std::size_t audio = 1;
  std::size_t vision = 1;
  std::size_t analysis = 1;
  friend bool operator==(const StageWorkers&, const StageWorkers&) = default;
};

/// Everything a run needs. Loaded from a key/value file; see docs/formats.md
/// for the key list.
struct PipelineConfig {
  StageWorkers workers;
  std::size_t queue_capacity = 8;
  std::filesystem::path checkpoint_path;  ///< empty: `<out>/checkpoint`
  bool ablation_no_vision = false;

  std::string separator = "bandpass";
  std::string transcriber = "mock";
  std::string detector = "mock";
  std::string scorer = "mock";
  std::string mllm = "mock";
  std::size_t mllm_max_concurrency = 0;

  RateCard rates;
  RetryPolicy retry;
  VadConfig vad;
  double min_transcribe_s = 2.0;
  double detect_min_confidence = 0.5;
  std::size_t detect_stride = 1;
  TrackingConfig tracking;
  SelectionConfig selection{0.6, 0.05};
  std::size_t crop_stride = 1;
  std::string media_mode = "crops";  ///< crops | full
  std::filesystem::path templates_dir;  ///< empty: built-in templates

  std::map<std::string, int> mock_garbage;
  std::map<std::string, int> mock_transport_failures;
  double mock_mllm_delay_s = 0;

  std::string halt_after;  ///< test hook: "", "audio" or "vision"

  /// Throws Error(kConfig) naming the key for bad values and unknown keys.
  static PipelineConfig from_kv(const KvConfig& kv);
  static PipelineConfig load(const std::filesystem::path& path);
  KvConfig to_kv() const;
  void validate() const;
};

enum class JobStage { kIngested, kAudioDone, kVisionDone, kAnnotated, kDropped };

const char* to_string(JobStage s) noexcept;

struct JobState {
  std::string segment_id;
  std::string asset_id;
  double start = 0;
  double end = 0;
  JobStage stage = JobStage::kIngested;
  std::optional<DropReason> drop_reason;
  std::string drop_message;
  int attempts = 0;
  TokenUsage usage;
  double cost_usd = 0;
  std::map<std::string, std::int64_t> timestamps_ms;  ///< stage name -> unix ms

  double duration() const { return end - start; }
};

void to_json(nlohmann::json& j, const JobState& s);
void from_json(const nlohmann::json& j, JobState& s);

struct RunLedger {
  double input_media_hours = 0;
  double output_annotated_hours = 0;
  double retention_rate = 0;
  double wall_clock_s = 0;
  double speed_ratio = 0;  ///< input media seconds per wall-clock second
  double total_cost_usd = 0;
  std::optional<double> cost_per_output_hour_usd;
  std::map<std::string, std::size_t> drop_histogram;
  std::size_t assets = 0;
  std::size_t segments_ingested = 0;
  std::size_t segments_annotated = 0;
  std::size_t segments_dropped = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::map<std::string, std::string> failed_assets;  ///< uri -> reason

  /// Speech-to-gap SNR averaged over assets, on the mix and on the vocals.
  std::optional<double> snr_before_db;
  std::optional<double> snr_after_db;
  std::optional<double> snr_improvement_db;
  std::optional<double> snr_improvement_linear_pct;

  StageWorkers effective_workers;
  std::size_t queue_capacity = 0;
  std::size_t peak_vision_queue = 0;
  std::size_t peak_analysis_queue = 0;

  nlohmann::json to_json() const;
  static RunLedger from_json(const nlohmann::json& j);
  std::string summary_text() const;
};

/// Counting, duration and cost fields from terminal job states. Durations sum
/// over annotated segments only; cost sums every attempt, dropped or not.
RunLedger compute_ledger(std::span<const JobState> jobs, double input_media_s, double wall_clock_s);

/// One line of `records.jsonl`.
struct SegmentRecord {
  std::string segment_id;
  std::string asset_id;
  double start = 0;
  double end = 0;
  std::string transcript;
  std::vector<WordTiming> words;
  std::optional<double> snr_db;
  std::optional<int> speaker_track;
  std::optional<double> speaker_score;
  std::string media_ref;
  std::string clip;  ///< relative path of the vocal clip
  AnnotationRecord annotation;

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

void to_json(nlohmann::json& j, const SegmentRecord& r);
void from_json(const nlohmann::json& j, SegmentRecord& r);
std::vector<SegmentRecord> read_records(const std::filesystem::path& path);

/// Model backends used by a run. Null members are built from the config.
struct Adapters {
  std::shared_ptr<SourceSeparator> separator;
  std::shared_ptr<Transcriber> transcriber;
  std::shared_ptr<FaceDetector> detector;
  std::shared_ptr<ActiveSpeakerScorer> scorer;
  std::shared_ptr<MllmClient> mllm;
};

Adapters make_adapters(const PipelineConfig& cfg, Adapters overrides = {});

struct RunResult {
  RunLedger ledger;
  bool complete = false;  ///< false when halted by the test hook
  std::filesystem::path out_dir;
};

/// Runs (or continues) a pipeline into `out_dir`. Output files:
/// records.jsonl, jobs.jsonl, assets.jsonl, ledger.json, ledger.txt, plus
/// clips/ and crops/. Throws Error(kConfig) before any work when an adapter
/// is unreachable or the checkpoint belongs to a different run.
RunResult run_pipeline(const std::vector<std::string>& inputs, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir, Adapters adapters = {});

/// Continues the run recorded in `checkpoint_dir`. A completed run is
/// returned unchanged. Throws Error(kIntegrity) for a corrupt checkpoint.
RunResult resume_pipeline(const std::filesystem::path& checkpoint_dir, Adapters adapters = {});

/// One path per line; blank lines and `#` comments skipped. Relative paths
/// resolve against the list file's directory.
std::vector<std::string> read_input_list(const std::filesystem::path& path);

}  // namespace emocurate
