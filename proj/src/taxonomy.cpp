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

#include "emocurate/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "emocurate/error.hpp"
#include "emocurate/kv_config.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace {

// Sorted byte-wise; the index of a category is its position here.
constexpr std::array<std::string_view, kNumCategories> kNames = {
    "Admiration",   "Adoration",     "Aesthetic",    "Amusement", "Anger",
    "Anxiety",      "Awe",           "Awkwardness",  "Boredom",   "Calmness",
    "Confusion",    "Craving",       "Disgust",      "Empathic pain",
    "Entrancement", "Excitement",    "Fear",         "Horror",    "Interest",
    "Joy",          "Nostalgia",     "Relief",       "Romance/Love",
    "Sadness",      "Satisfaction",  "Surprise",
};

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

EmotionCategory EmotionCategory::at(std::size_t index) {
  if (index >= kNumCategories) {
    throw Error(ErrorKind::kRange, "category index " + std::to_string(index) + " out of range");
  }
  return EmotionCategory(index);
}

std::optional<EmotionCategory> EmotionCategory::find(std::string_view name) noexcept {
  auto it = std::lower_bound(kNames.begin(), kNames.end(), name);
  if (it == kNames.end() || *it != name) return std::nullopt;
  return EmotionCategory(static_cast<std::size_t>(it - kNames.begin()));
}

EmotionCategory EmotionCategory::named(std::string_view name) {
  auto c = find(name);
  if (!c) throw Error(ErrorKind::kUnknownLabel, "not a canonical category", std::string(name));
  return *c;
}

std::string_view EmotionCategory::name() const noexcept { return kNames[index_]; }

std::span<const EmotionCategory> canonical_categories() noexcept {
  static const auto all = [] {
    std::vector<EmotionCategory> v;
    for (std::size_t i = 0; i < kNumCategories; ++i) v.push_back(EmotionCategory::at(i));
    return v;
  }();
  return all;
}

static void check_intensity(double v, std::string_view name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw Error(ErrorKind::kRange, "intensity " + format_double(v) + " outside [0, 1]",
                std::string(name));
  }
}

EmotionVector EmotionVector::from_values(std::span<const double> values) {
  if (values.size() != kNumCategories) {
    throw Error(ErrorKind::kRange, "expected 26 intensities, got " + std::to_string(values.size()));
  }
  EmotionVector v;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    check_intensity(values[i], kNames[i]);
    v.values_[i] = values[i];
  }
  return v;
}

void EmotionVector::set(EmotionCategory c, double intensity) {
  check_intensity(intensity, c.name());
  values_[c.index()] = intensity;
}

bool EmotionVector::is_zero() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return x == 0.0; });
}

double EmotionVector::total() const noexcept {
  double s = 0;
  for (double x : values_) s += x;
  return s;
}

EmotionCategory dominant_emotion(const EmotionVector& v) {
  if (v.is_zero()) throw Error(ErrorKind::kInvalidVector, "all-zero emotion vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumCategories; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return EmotionCategory::at(best);
}

LegacyMapping::LegacyMapping(std::string taxonomy,
                             std::vector<std::pair<std::string, CategorySet>> entries)
    : taxonomy_(std::move(taxonomy)) {
  for (auto& [label, set] : entries) {
    auto key = to_lower(trim(label));
    if (key.empty()) throw Error(ErrorKind::kConfig, "empty legacy label", taxonomy_);
    if (std::find(labels_.begin(), labels_.end(), key) != labels_.end()) {
      throw Error(ErrorKind::kConfig, "legacy label listed twice", taxonomy_ + "." + key);
    }
    labels_.push_back(key);
    sets_.push_back(std::move(set));
  }
}

bool LegacyMapping::contains(std::string_view label) const {
  auto key = to_lower(label);
  return std::find(labels_.begin(), labels_.end(), key) != labels_.end();
}

const CategorySet& LegacyMapping::categories_for(std::string_view label) const {
  auto key = to_lower(label);
  auto it = std::find(labels_.begin(), labels_.end(), key);
  if (it == labels_.end()) {
    throw Error(ErrorKind::kUnknownLabel, "label not in taxonomy " + taxonomy_, std::string(label));
  }
  return sets_[static_cast<std::size_t>(it - labels_.begin())];
}

CategorySet map_legacy_label(std::string_view label, const LegacyMapping& m) {
  return m.categories_for(label);
}

static CategorySet one(std::string_view name) { return {EmotionCategory::named(name)}; }

LegacyMapping LegacyMapping::meld7() {
  return LegacyMapping("meld-7", {
                                     {"anger", one("Anger")},
                                     {"disgust", one("Disgust")},
                                     {"fear", one("Fear")},
                                     {"joy", one("Joy")},
                                     {"neutral", one("Calmness")},
                                     {"sadness", one("Sadness")},
                                     {"surprise", one("Surprise")},
                                 });
}

LegacyMapping LegacyMapping::iemocap9() {
  return LegacyMapping("iemocap-9", {
                                        {"anger", one("Anger")},
                                        {"disgust", one("Disgust")},
                                        {"excited", one("Excitement")},
                                        {"fear", one("Fear")},
                                        {"frustration", {}},
                                        {"happy", one("Joy")},
                                        {"neutral", one("Calmness")},
                                        {"sadness", one("Sadness")},
                                        {"surprise", one("Surprise")},
                                    });
}

std::optional<LegacyMapping> default_mapping(std::string_view taxonomy) {
  if (taxonomy == "meld-7") return LegacyMapping::meld7();
  if (taxonomy == "iemocap-9") return LegacyMapping::iemocap9();
  return std::nullopt;
}

std::vector<LegacyMapping> LegacyMapping::parse(std::string_view text, std::string_view source) {
  std::vector<std::string> order;
  std::vector<std::vector<std::pair<std::string, CategorySet>>> bodies;
  for (auto& e : parse_kv_entries(text, source)) {
    if (e.section.empty()) {
      throw Error(ErrorKind::kConfig, "mapping line outside a [taxonomy] section",
                  std::string(source) + ":" + std::to_string(e.line));
    }
    auto it = std::find(order.begin(), order.end(), e.section);
    if (it == order.end()) {
      order.push_back(e.section);
      bodies.emplace_back();
      it = order.end() - 1;
    }
    CategorySet set;
    if (!trim(e.value).empty()) {
      for (auto& name : split(e.value, ',')) {
        auto c = EmotionCategory::find(name);
        if (!c) {
          throw Error(ErrorKind::kUnknownLabel, "not a canonical category: '" + name + "'",
                      std::string(source) + ":" + std::to_string(e.line));
        }
        set.insert(*c);
      }
    }
    bodies[static_cast<std::size_t>(it - order.begin())].emplace_back(e.key, std::move(set));
  }
  std::vector<LegacyMapping> out;
  for (std::size_t i = 0; i < order.size(); ++i) out.emplace_back(order[i], std::move(bodies[i]));
  return out;
}

std::vector<LegacyMapping> LegacyMapping::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

std::string LegacyMapping::to_text() const {
  std::string out = "[" + taxonomy_ + "]\n";
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    std::vector<std::string> names;
    for (auto c : sets_[i]) names.emplace_back(c.name());
    out += labels_[i] + " = " + join(names, ", ") + "\n";
  }
  return out;
}

}  // namespace emocurate
