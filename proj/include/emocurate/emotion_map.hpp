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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emocurate/taxonomy.hpp"

namespace emocurate {

struct TsneConfig {
  double perplexity = 30;
  int iterations = 1000;
  /// Upper bound; the step used is min(learning_rate, max(N / (4 * early_exaggeration), 50)).
  double learning_rate = 200;
  double early_exaggeration = 12;
  int exaggeration_iterations = 250;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 0;
  double init_sigma = 1e-4;

  /// Throws Error(kConfig) naming the field. `n_points` checks the
  /// perplexity bound when non-zero.
  void validate(std::size_t n_points = 0) const;
};

struct Calibration {
  double beta = 0;               ///< precision of the Gaussian kernel
  std::vector<double> p;         ///< conditional distribution over the inputs
  double perplexity = 0;         ///< achieved 2^H
  int iterations = 0;
};

/// Binary search for beta so that p_j ∝ exp(-beta * d_j) has perplexity
/// `target`. `distances` are squared distances from one point to each of the
/// others. Requires 1 < target <= distances.size(). Throws Error(kDomain)
/// for non-finite or negative distances and Error(kPrecondition) otherwise.
Calibration perplexity_calibration(std::span<const double> distances, double target);

/// Row-major N x N squared Euclidean distances.
std::vector<double> squared_distances(std::span<const EmotionVector> vectors);

/// Symmetrised joint affinities, row-major N x N, zero diagonal, sum 1.
std::vector<double> joint_probabilities(std::span<const double> sq_distances, std::size_t n, double perplexity);

using Point2 = std::array<double, 2>;

/// KL(P || Q) for embedding `y`; fills `grad` (same length as y) when given.
double tsne_objective(std::span<const double> p, std::span<const Point2> y, std::vector<Point2>* grad = nullptr);

struct TsneTrace {
  std::vector<double> kl;  ///< true KL(P || Q) after each iteration
};

/// Exact t-SNE. `ids` key the seeded initial positions and fix the internal
/// point order, so permuting the input permutes the output rows and nothing
/// else. Throws Error(kDegeneracy) when every point coincides.
std::vector<Point2> tsne_project(std::span<const EmotionVector> vectors, std::span<const std::string> ids,
                                 const TsneConfig& cfg, TsneTrace* trace = nullptr);

struct Rgb {
  double r = 0;
  double g = 0;
  double b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

using Palette = std::array<Rgb, kNumCategories>;

/// Evenly spaced hues at fixed lightness and chroma in OKLCH, in category
/// index order.
Palette default_palette();
/// `Name r g b` lines, all 26 categories. Throws Error(kSchema) or
/// Error(kRange).
Palette load_palette(const std::filesystem::path& path);
std::string palette_to_text(const Palette& p);

/// Intensity-weighted mean of the palette colours. Throws
/// Error(kInvalidVector) for an all-zero vector.
Rgb weighted_color(const EmotionVector& v, const Palette& palette);

struct MapPoint {
  std::string segment_id;
  double x = 0;
  double y = 0;
  EmotionCategory label = EmotionCategory::at(0);
  Rgb color;
  friend bool operator==(const MapPoint&, const MapPoint&) = default;
};

std::vector<MapPoint> build_map(std::span<const std::string> ids, std::span<const EmotionVector> vectors,
                                const TsneConfig& cfg, const Palette& palette = default_palette());

/// Tab-separated, header `segment_id x y label r g b`, rows sorted by
/// segment_id. Numbers round-trip exactly.
void export_map(std::vector<MapPoint> points, const std::filesystem::path& out);
std::vector<MapPoint> read_map(const std::filesystem::path& path);

}  // namespace emocurate
