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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emocurate/taxonomy.hpp"

namespace emocurate {

inline constexpr int kDatasetFormatVersion = 1;

/// One line of `manifest.jsonl`.
struct UtteranceRecord {
  std::string utterance_id;
  std::string audio_path;  ///< relative to the dataset root
  double duration = 0;     ///< seconds
  std::string transcript;
  EmotionVector emotions;
  EmotionCategory dominant = EmotionCategory::at(0);
  std::string rationale;
  /// Per-modality assessments, keyed facial, audio and text. May be empty.
  std::map<std::string, std::string> assessments;
  std::string asset_id;
  double start = 0;
  double end = 0;
  std::string domain;  ///< free text, may be empty

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

/// Emotions are written as an object with all 26 categories.
void to_json(nlohmann::json& j, const UtteranceRecord& r);
void from_json(const nlohmann::json& j, UtteranceRecord& r);

struct DatasetStats {
  std::size_t utterance_count = 0;
  double total_seconds = 0;
  double total_hours = 0;
  double mean_duration_s = 0;
  double min_duration_s = 0;
  std::array<std::size_t, kNumCategories> dominant_counts{};

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats compute_stats(const std::vector<UtteranceRecord>& records);
/// `stats.txt` contents: `key value` lines.
std::string stats_to_text(const DatasetStats& s);

struct ExportOptions {
  double min_duration_s = 2.0;
  double duration_tolerance_s = 0.05;
  std::string domain;
  std::size_t workers = 0;  ///< 0: hardware concurrency
};

struct ExportReport {
  DatasetStats stats;
  std::vector<std::pair<std::string, std::string>> excluded;  ///< utterance_id, reason
};

/// Writes `audio/<id>.wav`, `manifest.jsonl` and `stats.txt` from a finished
/// run directory. Records whose clip is missing, shorter than the minimum or
/// whose length disagrees with the span are left out and listed in the
/// report. Throws Error(kPrecondition) when the run has not completed.
ExportReport export_dataset(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                            const ExportOptions& opts = {});

std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& dataset_dir);

struct Violation {
  std::string utterance_id;  ///< empty for dataset-level problems
  std::string kind;
  std::string message;
};

struct ValidationReport {
  std::size_t utterances = 0;
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_text() const;
};

/// Checks every manifest line and the stats file. Throws Error(kIo) when
/// there is no manifest. Violation kinds: parse, duplicate-id,
/// minimum-duration, missing-file, bad-audio, duration-mismatch,
/// invalid-vector, dominant-mismatch, bad-path, stats-mismatch.
ValidationReport validate_dataset(const std::filesystem::path& dataset_dir, double min_duration_s = 2.0,
                                  double duration_tolerance_s = 0.05);

}  // namespace emocurate
