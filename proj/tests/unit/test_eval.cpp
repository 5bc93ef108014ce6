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

#include "emocurate/error.hpp"
#include "emocurate/eval.hpp"
#include "emocurate/process.hpp"

using namespace emocurate;

namespace {

EmotionVector only(const char* name, double v = 0.9) {
  EmotionVector e;
  e.set(EmotionCategory::named(name), v);
  return e;
}

using testing::kind_of;

// Straight transcription of the kappa definition, kept separate from the
// library code.
double kappa_oracle(const std::vector<std::vector<std::size_t>>& t) {
  const double N = static_cast<double>(t.size());
  double n = 0;
  for (auto c : t[0]) n += static_cast<double>(c);
  const std::size_t k = t[0].size();
  double pbar = 0;
  std::vector<double> pj(k, 0);
  for (const auto& row : t) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) {
      s += static_cast<double>(row[j]) * static_cast<double>(row[j]);
      pj[j] += static_cast<double>(row[j]);
    }
    pbar += (s - n) / (n * (n - 1));
  }
  pbar /= N;
  double pe = 0;
  for (double p : pj) pe += (p / (N * n)) * (p / (N * n));
  return (pbar - pe) / (1 - pe);
}

}  // namespace

TEST_CASE("fleiss kappa on the textbook table") {
  AgreementTable t;
  t.n_raters = 14;
  t.categories = {"1", "2", "3", "4", "5"};
  t.counts = {{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
              {7, 7, 0, 0, 0},  {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}};
  CHECK(fleiss_kappa(t) == doctest::Approx(0.20993).epsilon(1e-4));
}

TEST_CASE("fleiss kappa matches the oracle on random tables") {
  std::mt19937_64 rng(99);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    AgreementTable t;
    t.n_raters = 2 + rng() % 9;
    const std::size_t k = 2 + rng() % 6;
    const std::size_t items = 1 + rng() % 40;
    t.categories.resize(k);
    for (std::size_t i = 0; i < items; ++i) {
      std::vector<std::size_t> row(k, 0);
      for (std::size_t r = 0; r < t.n_raters; ++r) ++row[rng() % k];
      t.counts.push_back(row);
    }
    std::vector<std::size_t> totals(k, 0);
    for (const auto& row : t.counts) {
      for (std::size_t j = 0; j < k; ++j) totals[j] += row[j];
    }
    const bool degenerate = std::count_if(totals.begin(), totals.end(), [](auto v) { return v > 0; }) < 2;
    if (degenerate) {
      CHECK(kind_of([&] { fleiss_kappa(t); }) == ErrorKind::kDegenerateAgreement);
      continue;
    }
    CHECK(fleiss_kappa(t) == doctest::Approx(kappa_oracle(t.counts)).epsilon(1e-12));
    ++compared;
  }
  CHECK(compared > 150);
}

TEST_CASE("fleiss kappa edge cases") {
  AgreementTable perfect{3, {"a", "b"}, {{3, 0}, {0, 3}, {3, 0}}};
  CHECK(fleiss_kappa(perfect) == doctest::Approx(1.0));
  AgreementTable all_same{3, {"a", "b"}, {{3, 0}, {3, 0}}};
  CHECK(kind_of([&] { fleiss_kappa(all_same); }) == ErrorKind::kDegenerateAgreement);
  AgreementTable bad_sum{3, {"a", "b"}, {{2, 0}}};
  CHECK(kind_of([&] { fleiss_kappa(bad_sum); }) == ErrorKind::kTable);
  AgreementTable one_rater{1, {"a", "b"}, {{1, 0}}};
  CHECK(kind_of([&] { fleiss_kappa(one_rater); }) == ErrorKind::kTable);
  AgreementTable empty{3, {"a", "b"}, {}};
  CHECK(kind_of([&] { fleiss_kappa(empty); }) == ErrorKind::kTable);
  AgreementTable ragged{2, {"a", "b"}, {{2}}};
  CHECK(kind_of([&] { fleiss_kappa(ragged); }) == ErrorKind::kTable);
}

TEST_CASE("runs_to_table") {
  Predictions a{{"s1", only("Joy")}, {"s2", only("Anger")}, {"s3", only("Joy")}};
  Predictions b{{"s1", only("Joy")}, {"s2", only("Fear")}, {"s3", only("Joy")}};
  const auto t = runs_to_table({a, b, a});
  CHECK(t.n_raters == 3);
  CHECK(t.categories == std::vector<std::string>{"Anger", "Fear", "Joy"});
  CHECK(t.counts == std::vector<std::vector<std::size_t>>{{0, 0, 3}, {2, 1, 0}, {0, 0, 3}});
  CHECK(fleiss_kappa(t) == doctest::Approx(kappa_oracle(t.counts)));

  CHECK(kind_of([&] { runs_to_table({a}); }) == ErrorKind::kTable);
  Predictions c = a;
  c.erase("s3");
  CHECK(kind_of([&] { runs_to_table({a, c}); }) == ErrorKind::kCoverage);
}

TEST_CASE("accuracy against legacy labels") {
  const auto meld = LegacyMapping::meld7();
  GoldSet gold{"meld-7", {{"a", "joy"}, {"b", "neutral"}, {"c", "anger"}, {"d", "sadness"}}};
  Predictions p{{"a", only("Joy")}, {"b", only("Calmness")}, {"c", only("Anxiety")}, {"d", only("Sadness")}};
  auto r = accuracy(p, gold, meld);
  CHECK(r.scored == 4);
  CHECK(r.correct == 3);
  CHECK(r.accuracy == doctest::Approx(0.75));

  r = accuracy(p, gold, meld, {"neutral"});
  CHECK(r.scored == 3);
  CHECK(r.skipped == 1);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));

  // Mixed vectors are scored on the dominant entry only.
  Predictions mixed = p;
  EmotionVector v = only("Anger", 0.6);
  v.set(EmotionCategory::named("Joy"), 0.59);
  mixed["c"] = v;
  CHECK(accuracy(mixed, gold, meld).correct == 4);

  const auto iemocap = LegacyMapping::iemocap9();
  GoldSet g2{"iemocap-9", {{"x", "frustration"}, {"y", "excited"}, {"z", "happy"}}};
  Predictions p2{{"y", only("Excitement")}, {"z", only("Excitement")}};
  r = accuracy(p2, g2, iemocap);
  CHECK(r.scored == 2);
  CHECK(r.skipped == 1);
  CHECK(r.correct == 1);

  CHECK(kind_of([&] { accuracy(p, gold, meld, {"neutral", "joy", "anger", "sadness"}); }) == ErrorKind::kUndefinedScore);
  Predictions missing = p;
  missing.erase("d");
  CHECK(kind_of([&] { accuracy(missing, gold, meld); }) == ErrorKind::kCoverage);
  GoldSet odd{"meld-7", {{"a", "bored"}}};
  CHECK(kind_of([&] { accuracy(p, odd, meld); }) == ErrorKind::kUnknownLabel);
  CHECK(kind_of([&] { accuracy(p, gold, meld, {"contempt"}); }) == ErrorKind::kUnknownLabel);
  GoldSet other_tax{"iemocap-9", gold.items};
  CHECK(kind_of([&] { accuracy(p, other_tax, meld); }) == ErrorKind::kConfig);
}

TEST_CASE("confusion matrices") {
  const auto meld = LegacyMapping::meld7();
  GoldSet gold{"meld-7", {{"a", "joy"}, {"b", "neutral"}, {"c", "anger"}, {"d", "anger"}}};
  Predictions p{{"a", only("Joy")}, {"b", only("Joy")}, {"c", only("Anxiety")}, {"d", only("Anger")}};
  const auto cm = confusion(p, gold, meld);
  CHECK(cm.row_labels == cm.col_labels);
  CHECK(cm.row_labels.back() == kOtherLabel);
  CHECK(cm.row_labels.size() == 8);
  CHECK(cm.total() == 4);
  CHECK(cm.diagonal() == accuracy(p, gold, meld).correct);
  CHECK(cm.at("neutral", "joy") == 1);
  CHECK(cm.at("anger", kOtherLabel) == 1);

  const auto native = confusion(p, gold, meld, {"neutral"}, ConfusionColumns::kNative);
  CHECK(native.col_labels.size() == kNumCategories);
  CHECK(native.total() == 3);
  CHECK(native.at("anger", "Anxiety") == 1);
}

TEST_CASE("gold and prediction files") {
  TempDir d;
  std::ofstream(d.path() / "gold.jsonl") << "{\"taxonomy\": \"meld-7\"}\n"
                                            "{\"segment_id\": \"a\", \"label\": \"Joy\"}\n\n"
                                            "{\"segment_id\": \"b\", \"label\": \"anger\"}\n";
  const auto g = GoldSet::load(d.path() / "gold.jsonl");
  CHECK(g.taxonomy == "meld-7");
  CHECK(g.items.size() == 2);
  std::ofstream(d.path() / "bad.jsonl") << "{\"segment_id\": \"a\"}\n";
  CHECK(kind_of([&] { GoldSet::load(d.path() / "bad.jsonl"); }) == ErrorKind::kSchema);
  CHECK(kind_of([&] { GoldSet::load(d.path() / "none.jsonl"); }) == ErrorKind::kIo);
}

TEST_CASE("rationality rate") {
  std::vector<Rating> ratings;
  for (int i = 0; i < 1000; ++i) ratings.push_back({"s" + std::to_string(i), "r1", i < 830, std::nullopt});
  auto r = rationality_rate(ratings);
  CHECK(r.rate == doctest::Approx(0.83));
  CHECK(r.total == 1000);
  CHECK(r.by_category.at("(unknown)").total == 1000);

  std::vector<Rating> small = {{"a", "r1", true, "Joy"}, {"a", "r1", false, "Joy"}, {"b", "r1", true, std::nullopt},
                               {"b", "r2", true, std::nullopt}};
  r = rationality_rate(small, {{"b", "Anger"}});
  CHECK(r.total == 3);
  CHECK(r.reasonable == 2);
  CHECK(r.by_category.at("Joy").rate() == 0.0);
  CHECK(r.by_category.at("Anger").rate() == 1.0);

  CHECK(kind_of([] { rationality_rate({}); }) == ErrorKind::kUndefinedScore);
}
