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
#include <set>
#include <string>
#include <vector>

#include "emocurate/taxonomy.hpp"

namespace emocurate {

/// segment_id -> predicted intensities
using Predictions = std::map<std::string, EmotionVector>;

struct GoldSet {
  std::string taxonomy;  ///< may be empty when the file does not name one
  std::map<std::string, std::string> items;  ///< segment_id -> legacy label

  /// JSON lines of `{"segment_id": ..., "label": ...}`, optionally preceded
  /// by `{"taxonomy": ...}`.
  static GoldSet load(const std::filesystem::path& path);
};

/// Dominant-emotion predictions from a run directory's records.jsonl.
Predictions load_run_predictions(const std::filesystem::path& run_dir);

struct AccuracyResult {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t scored = 0;
  std::size_t skipped = 0;  ///< excluded or mapped to the empty set
};

/// An item is correct iff the dominant predicted category is in the mapped
/// gold set. Items whose gold label is in `exclude` or maps to the empty set
/// are skipped. Throws Error(kUndefinedScore) when nothing is scored,
/// Error(kCoverage) when a scored item has no prediction, and
/// Error(kUnknownLabel) for labels outside the mapping.
AccuracyResult accuracy(const Predictions& predictions, const GoldSet& gold, const LegacyMapping& m,
                        const std::set<std::string>& exclude = {});

enum class ConfusionColumns {
  kLegacy,  ///< predictions binned back to legacy labels
  kNative,  ///< one column per canonical category
};

inline constexpr const char* kOtherLabel = "(other)";

/// Rows are gold labels, columns predictions. In legacy mode the label list
/// is shared by rows and columns: the scored legacy labels in declaration
/// order followed by "(other)". A predicted category bins to the first
/// scored label whose mapped set contains it, else to "(other)".
struct ConfusionMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t diagonal() const;
  std::size_t at(const std::string& gold, const std::string& predicted) const;
};

ConfusionMatrix confusion(const Predictions& predictions, const GoldSet& gold, const LegacyMapping& m,
                          const std::set<std::string>& exclude = {},
                          ConfusionColumns columns = ConfusionColumns::kLegacy);

/// Items x categories rating counts; every row sums to n_raters.
struct AgreementTable {
  std::size_t n_raters = 0;
  std::vector<std::string> categories;
  std::vector<std::vector<std::size_t>> counts;

  /// Throws Error(kTable).
  void validate() const;
};

/// Fleiss' kappa. Throws Error(kTable) for malformed tables and
/// Error(kDegenerateAgreement) when expected agreement is 1.
double fleiss_kappa(const AgreementTable& t);

/// One rating per run per segment: the run's dominant emotion. Categories
/// are the observed dominants in canonical order; rows follow segment_id
/// order. Throws Error(kCoverage) unless every run covers the same segments.
AgreementTable runs_to_table(const std::vector<Predictions>& runs);

struct Rating {
  std::string sample_id;
  std::string rater_id;
  bool reasonable = false;
  std::optional<std::string> dominant;
};

/// JSON lines with sample_id, rater_id, reasonable and optional dominant.
std::vector<Rating> load_ratings(const std::filesystem::path& path);

struct RationalityResult {
  double rate = 0;
  std::size_t reasonable = 0;
  std::size_t total = 0;
  struct Bucket {
    std::size_t reasonable = 0;
    std::size_t total = 0;
    double rate() const { return total ? static_cast<double>(reasonable) / static_cast<double>(total) : 0.0; }
  };
  std::map<std::string, Bucket> by_category;
};

/// Fraction of (sample, rater) pairs judged reasonable. A repeated pair
/// keeps its last rating. The breakdown key is the rating's `dominant`, else
/// `dominant_by_sample[sample_id]`, else "(unknown)". Throws
/// Error(kUndefinedScore) for no ratings.
RationalityResult rationality_rate(const std::vector<Rating>& ratings,
                                   const std::map<std::string, std::string>& dominant_by_sample = {});

}  // namespace emocurate
