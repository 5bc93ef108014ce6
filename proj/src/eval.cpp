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

#include "emocurate/eval.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "emocurate/error.hpp"
#include "emocurate/orchestrator.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<json> read_json_lines(const fs::path& path) {
  std::vector<json> out;
  int n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(n) + " is not a JSON object", path.string());
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::set<std::string> lowered(const std::set<std::string>& s, const LegacyMapping& m) {
  std::set<std::string> out;
  for (const auto& l : s) {
    auto low = to_lower(l);
    if (!m.contains(low)) throw Error(ErrorKind::kUnknownLabel, "'" + l + "' is not a " + m.taxonomy() + " label", "exclude");
    out.insert(low);
  }
  return out;
}

void check_taxonomy(const GoldSet& gold, const LegacyMapping& m) {
  if (!gold.taxonomy.empty() && gold.taxonomy != m.taxonomy()) {
    throw Error(ErrorKind::kConfig, "gold set is " + gold.taxonomy + " but mapping is " + m.taxonomy(), "mapping");
  }
}

// Items that count toward scores, with their lowered gold label.
std::vector<std::pair<std::string, std::string>> scored_items(const Predictions& predictions, const GoldSet& gold,
                                                              const LegacyMapping& m, const std::set<std::string>& excl,
                                                              std::size_t* skipped) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [id, label] : gold.items) {
    const auto low = to_lower(label);
    const auto& set = m.categories_for(low);
    if (excl.count(low) || set.empty()) {
      if (skipped) ++*skipped;
      continue;
    }
    if (!predictions.count(id)) throw Error(ErrorKind::kCoverage, "no prediction for gold item", id);
    out.emplace_back(id, low);
  }
  return out;
}

}  // namespace

GoldSet GoldSet::load(const fs::path& path) {
  GoldSet g;
  for (const auto& j : read_json_lines(path)) {
    if (j.contains("taxonomy") && !j.contains("segment_id")) {
      g.taxonomy = j.at("taxonomy").get<std::string>();
      continue;
    }
    if (!j.contains("segment_id") || !j.contains("label")) throw Error(ErrorKind::kSchema, "need segment_id and label", path.string());
    auto id = j.at("segment_id").get<std::string>();
    if (!g.items.emplace(id, j.at("label").get<std::string>()).second) {
      throw Error(ErrorKind::kSchema, "duplicate gold item", id);
    }
  }
  return g;
}

Predictions load_run_predictions(const fs::path& run_dir) {
  Predictions p;
  for (const auto& r : read_records(run_dir / "records.jsonl")) p[r.segment_id] = r.annotation.emotions;
  return p;
}

AccuracyResult accuracy(const Predictions& predictions, const GoldSet& gold, const LegacyMapping& m,
                        const std::set<std::string>& exclude) {
  check_taxonomy(gold, m);
  AccuracyResult r;
  const auto items = scored_items(predictions, gold, m, lowered(exclude, m), &r.skipped);
  for (const auto& [id, label] : items) {
    const auto dom = dominant_emotion(predictions.at(id));
    if (m.categories_for(label).count(dom)) ++r.correct;
  }
  r.scored = items.size();
  if (r.scored == 0) throw Error(ErrorKind::kUndefinedScore, "no gold items left to score");
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.scored);
  return r;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (auto c : row) t += c;
  }
  return t;
}

std::size_t ConfusionMatrix::diagonal() const {
  std::size_t d = 0;
  for (std::size_t i = 0; i < row_labels.size(); ++i) {
    auto it = std::find(col_labels.begin(), col_labels.end(), row_labels[i]);
    if (it != col_labels.end()) d += counts[i][static_cast<std::size_t>(it - col_labels.begin())];
  }
  return d;
}

std::size_t ConfusionMatrix::at(const std::string& gold, const std::string& predicted) const {
  auto r = std::find(row_labels.begin(), row_labels.end(), gold);
  auto c = std::find(col_labels.begin(), col_labels.end(), predicted);
  if (r == row_labels.end() || c == col_labels.end()) throw Error(ErrorKind::kUnknownLabel, "no such cell", gold + "/" + predicted);
  return counts[static_cast<std::size_t>(r - row_labels.begin())][static_cast<std::size_t>(c - col_labels.begin())];
}

ConfusionMatrix confusion(const Predictions& predictions, const GoldSet& gold, const LegacyMapping& m,
                          const std::set<std::string>& exclude, ConfusionColumns columns) {
  check_taxonomy(gold, m);
  const auto excl = lowered(exclude, m);
  const auto items = scored_items(predictions, gold, m, excl, nullptr);
  if (items.empty()) throw Error(ErrorKind::kUndefinedScore, "no gold items left to score");

  ConfusionMatrix cm;
  for (const auto& l : m.labels()) {
    if (!excl.count(l) && !m.categories_for(l).empty()) cm.row_labels.push_back(l);
  }
  if (columns == ConfusionColumns::kLegacy) {
    cm.row_labels.push_back(kOtherLabel);
    cm.col_labels = cm.row_labels;
  } else {
    for (auto c : canonical_categories()) cm.col_labels.emplace_back(c.name());
  }
  cm.counts.assign(cm.row_labels.size(), std::vector<std::size_t>(cm.col_labels.size(), 0));

  auto row_of = [&](const std::string& l) {
    return static_cast<std::size_t>(std::find(cm.row_labels.begin(), cm.row_labels.end(), l) - cm.row_labels.begin());
  };
  for (const auto& [id, label] : items) {
    const auto dom = dominant_emotion(predictions.at(id));
    std::size_t col = 0;
    if (columns == ConfusionColumns::kNative) {
      col = dom.index();
    } else {
      col = cm.col_labels.size() - 1;  // (other)
      for (std::size_t k = 0; k + 1 < cm.col_labels.size(); ++k) {
        if (m.categories_for(cm.col_labels[k]).count(dom)) {
          col = k;
          break;
        }
      }
    }
    ++cm.counts[row_of(label)][col];
  }
  return cm;
}

void AgreementTable::validate() const {
  if (n_raters < 2) throw Error(ErrorKind::kTable, "need at least two raters", "n_raters");
  if (counts.empty()) throw Error(ErrorKind::kTable, "no items", "counts");
  if (categories.empty()) throw Error(ErrorKind::kTable, "no categories", "categories");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != categories.size()) {
      throw Error(ErrorKind::kTable, "row " + std::to_string(i) + " has the wrong width", "counts");
    }
    std::size_t s = 0;
    for (auto c : counts[i]) s += c;
    if (s != n_raters) throw Error(ErrorKind::kTable, "row " + std::to_string(i) + " sums to " + std::to_string(s), "counts");
  }
}

double fleiss_kappa(const AgreementTable& t) {
  t.validate();
  const double n = static_cast<double>(t.n_raters);
  const double N = static_cast<double>(t.counts.size());
  const std::size_t k = t.categories.size();
  double p_bar = 0;
  std::vector<double> col(k, 0.0);
  for (const auto& row : t.counts) {
    double sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(row[j]);
      sq += c * c;
      col[j] += c;
    }
    p_bar += (sq - n) / (n * (n - 1.0));
  }
  p_bar /= N;
  double p_e = 0;
  for (double c : col) {
    const double p = c / (N * n);
    p_e += p * p;
  }
  if (p_e >= 1.0) throw Error(ErrorKind::kDegenerateAgreement, "all ratings fall in one category");
  return (p_bar - p_e) / (1.0 - p_e);
}

AgreementTable runs_to_table(const std::vector<Predictions>& runs) {
  if (runs.size() < 2) throw Error(ErrorKind::kTable, "need at least two runs", "runs");
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].size() != runs[0].size() ||
        !std::equal(runs[r].begin(), runs[r].end(), runs[0].begin(), [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw Error(ErrorKind::kCoverage, "run " + std::to_string(r) + " covers a different segment set", "runs");
    }
  }
  std::vector<std::vector<EmotionCategory>> dominants;
  CategorySet seen;
  for (const auto& [id, v] : runs[0]) {
    std::vector<EmotionCategory> row;
    for (const auto& run : runs) {
      row.push_back(dominant_emotion(run.at(id)));
      seen.insert(row.back());
    }
    dominants.push_back(std::move(row));
  }
  AgreementTable t;
  t.n_raters = runs.size();
  std::vector<EmotionCategory> cats(seen.begin(), seen.end());
  for (auto c : cats) t.categories.emplace_back(c.name());
  for (const auto& row : dominants) {
    std::vector<std::size_t> counts(cats.size(), 0);
    for (auto c : row) ++counts[static_cast<std::size_t>(std::find(cats.begin(), cats.end(), c) - cats.begin())];
    t.counts.push_back(std::move(counts));
  }
  return t;
}

std::vector<Rating> load_ratings(const fs::path& path) {
  std::vector<Rating> out;
  for (const auto& j : read_json_lines(path)) {
    Rating r;
    try {
      r.sample_id = j.at("sample_id").get<std::string>();
      r.rater_id = j.at("rater_id").get<std::string>();
      r.reasonable = j.at("reasonable").get<bool>();
      if (auto d = j.find("dominant"); d != j.end() && d->is_string()) r.dominant = d->get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchema, e.what(), path.string());
    }
    out.push_back(std::move(r));
  }
  return out;
}

RationalityResult rationality_rate(const std::vector<Rating>& ratings,
                                   const std::map<std::string, std::string>& dominant_by_sample) {
  std::map<std::pair<std::string, std::string>, const Rating*> last;
  for (const auto& r : ratings) last[{r.sample_id, r.rater_id}] = &r;
  if (last.empty()) throw Error(ErrorKind::kUndefinedScore, "no ratings");
  RationalityResult out;
  for (const auto& [key, r] : last) {
    std::string cat = "(unknown)";
    if (r->dominant) {
      cat = *r->dominant;
    } else if (auto it = dominant_by_sample.find(r->sample_id); it != dominant_by_sample.end()) {
      cat = it->second;
    }
    auto& b = out.by_category[cat];
    ++b.total;
    ++out.total;
    if (r->reasonable) {
      ++b.reasonable;
      ++out.reasonable;
    }
  }
  out.rate = static_cast<double>(out.reasonable) / static_cast<double>(out.total);
  return out;
}

}  // namespace emocurate
