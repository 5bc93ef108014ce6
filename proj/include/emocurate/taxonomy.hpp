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
#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emocurate {

inline constexpr std::size_t kNumCategories = 26;

/// One of the 26 canonical emotion categories. The index is the position of
/// the name in byte-wise lexicographic order.
class EmotionCategory {
 public:
  static EmotionCategory at(std::size_t index);
  static EmotionCategory named(std::string_view name);
  static std::optional<EmotionCategory> find(std::string_view name) noexcept;

  std::size_t index() const noexcept { return index_; }
  std::string_view name() const noexcept;

  friend auto operator<=>(const EmotionCategory&, const EmotionCategory&) = default;

 private:
  explicit constexpr EmotionCategory(std::size_t index) noexcept : index_(index) {}
  std::size_t index_;
};

using CategorySet = std::set<EmotionCategory>;

/// All 26 categories, index order. Stable for the life of the process.
std::span<const EmotionCategory> canonical_categories() noexcept;

/// Mixed-emotion intensities, one per canonical category, each in [0, 1].
/// Intensities are not normalised to sum to one.
class EmotionVector {
 public:
  using Intensities = std::array<double, kNumCategories>;

  EmotionVector() { values_.fill(0.0); }

  /// Throws Error(kRange) on a wrong length or an entry outside [0, 1].
  static EmotionVector from_values(std::span<const double> values);

  double operator[](std::size_t index) const { return values_[index]; }
  double at(EmotionCategory c) const { return values_[c.index()]; }
  void set(EmotionCategory c, double intensity);

  const Intensities& values() const noexcept { return values_; }
  bool is_zero() const noexcept;
  double total() const noexcept;

  friend bool operator==(const EmotionVector&, const EmotionVector&) = default;

 private:
  Intensities values_;
};

/// Argmax category; ties go to the smallest index. Throws
/// Error(kInvalidVector) for an all-zero vector.
EmotionCategory dominant_emotion(const EmotionVector& v);

/// Legacy dataset taxonomy (e.g. meld-7) mapped into the canonical space.
/// Labels are case-insensitive and kept in declaration order. An empty
/// category set marks a label that has no canonical counterpart.
class LegacyMapping {
 public:
  LegacyMapping(std::string taxonomy, std::vector<std::pair<std::string, CategorySet>> entries);

  const std::string& taxonomy() const noexcept { return taxonomy_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool contains(std::string_view label) const;
  const CategorySet& categories_for(std::string_view label) const;

  static LegacyMapping meld7();
  static LegacyMapping iemocap9();

  /// Parses `[taxonomy]` sections of `label = Cat, Cat` lines.
  static std::vector<LegacyMapping> parse(std::string_view text, std::string_view source);
  static std::vector<LegacyMapping> load(const std::filesystem::path& path);
  std::string to_text() const;

 private:
  std::string taxonomy_;
  std::vector<std::string> labels_;
  std::vector<CategorySet> sets_;
};

/// Throws Error(kUnknownLabel) when `label` is not part of the taxonomy.
CategorySet map_legacy_label(std::string_view label, const LegacyMapping& m);

/// Shipped default for `meld-7` or `iemocap-9`.
std::optional<LegacyMapping> default_mapping(std::string_view taxonomy);

std::string to_lower(std::string_view s);

}  // namespace emocurate
