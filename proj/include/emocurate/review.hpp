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
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emocurate/dataset.hpp"
#include "emocurate/eval.hpp"

namespace emocurate {

struct ReviewSample {
  std::string sample_id;  ///< the utterance id
  std::string audio_path;
  std::string transcript;
  EmotionVector emotions;
  EmotionCategory dominant = EmotionCategory::at(0);
  std::string rationale;
  std::map<std::string, std::string> assessments;
};

nlohmann::json sample_to_json(const ReviewSample& s);

/// Category-balanced draw. Each round gives every category that still has
/// samples floor(remaining / categories) more; when that is zero the last
/// few go one each to categories in seeded order. Within a category samples
/// are taken in seeded order, and the returned list is in seeded order too.
/// Throws Error(kEmptySet) for an empty manifest.
std::vector<ReviewSample> build_review_set(const std::vector<UtteranceRecord>& manifest, std::size_t n,
                                           std::uint64_t seed);

struct StoredRating {
  std::string sample_id;
  std::string rater_id;
  bool reasonable = false;
  std::string comment;
  std::string dominant;
  std::int64_t ts_ms = 0;
};

struct RaterProgress {
  std::size_t rated = 0;
  std::size_t reasonable = 0;
  std::size_t pending = 0;
};

struct ReviewSummary {
  std::optional<double> rate;
  std::size_t total = 0;
  std::size_t reasonable = 0;
  std::map<std::string, RationalityResult::Bucket> by_category;
  std::map<std::string, RaterProgress> by_rater;

  nlohmann::json to_json() const;
};

struct ReviewOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  /// Allowed rater ids; empty admits any well-formed id.
  std::set<std::string> raters;
  /// Where campaign.json and ratings.jsonl live; empty: `<dataset>/review`.
  std::filesystem::path state_dir;
};

/// Review campaign over an exported dataset. Every rater is assigned the
/// whole review set. Ratings go to an append-only log and the state is
/// rebuilt from it on construction, last line winning per (rater, sample).
class ReviewService {
 public:
  /// Throws Error(kConflict) if the state directory belongs to a campaign
  /// with a different manifest, size or seed.
  ReviewService(std::filesystem::path dataset_dir, ReviewOptions opts);

  /// Registers a rater (idempotent). Throws Error(kAuth) for malformed ids
  /// or ids outside the roster.
  void open_session(const std::string& rater_id);
  /// Head of the rater's queue, or nullopt when done. Throws Error(kAuth)
  /// for a rater without a session.
  std::optional<ReviewSample> next_sample(const std::string& rater_id) const;
  /// Returns the rater's remaining queue length. Throws Error(kAuth) or
  /// Error(kConflict) for a sample that is not pending for this rater.
  std::size_t submit_rating(const std::string& rater_id, const std::string& sample_id, bool reasonable,
                            const std::string& comment = {});
  ReviewSummary summary() const;

  const std::vector<ReviewSample>& samples() const { return samples_; }
  std::optional<ReviewSample> sample(const std::string& sample_id) const;
  std::size_t pending(const std::string& rater_id) const;
  const std::filesystem::path& dataset_dir() const { return dataset_dir_; }
  const std::filesystem::path& ratings_path() const { return ratings_path_; }

 private:
  void check_rater(const std::string& rater_id) const;
  void append(const StoredRating& r);

  std::filesystem::path dataset_dir_;
  ReviewOptions opts_;
  std::filesystem::path ratings_path_;
  std::vector<ReviewSample> samples_;
  std::map<std::string, std::size_t> index_;
  mutable std::shared_mutex mu_;
  // rater -> sample -> latest rating
  std::map<std::string, std::map<std::string, StoredRating>> ratings_;
  std::set<std::string> sessions_;
};

std::vector<StoredRating> load_rating_log(const std::filesystem::path& path);

/// Local HTTP front end:
///   GET  /api/session/:rater/next
///   POST /api/session/:rater/rating   {"sample_id", "reasonable", "comment"?}
///   GET  /api/summary
///   GET  /audio/:utterance_id
class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws Error(kIo) if binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace emocurate
