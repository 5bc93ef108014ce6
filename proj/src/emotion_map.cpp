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

#include "emocurate/emotion_map.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "emocurate/digest.hpp"
#include "emocurate/error.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;

void TsneConfig::validate(std::size_t n_points) const {
  if (!(perplexity > 1)) throw Error(ErrorKind::kConfig, "perplexity must exceed 1", "perplexity");
  if (n_points && !(perplexity < static_cast<double>(n_points))) {
    throw Error(ErrorKind::kConfig, "perplexity must be below the number of points (" + std::to_string(n_points) + ")",
                "perplexity");
  }
  if (iterations < 1) throw Error(ErrorKind::kConfig, "need at least one iteration", "iterations");
  if (!(learning_rate > 0)) throw Error(ErrorKind::kConfig, "must be positive", "learning_rate");
  if (!(early_exaggeration >= 1)) throw Error(ErrorKind::kConfig, "must be at least 1", "early_exaggeration");
  if (exaggeration_iterations < 0) throw Error(ErrorKind::kConfig, "must be non-negative", "exaggeration_iterations");
  if (momentum_initial < 0 || momentum_initial >= 1) throw Error(ErrorKind::kConfig, "must be in [0, 1)", "momentum_initial");
  if (momentum_final < 0 || momentum_final >= 1) throw Error(ErrorKind::kConfig, "must be in [0, 1)", "momentum_final");
  if (momentum_switch < 0) throw Error(ErrorKind::kConfig, "must be non-negative", "momentum_switch");
  if (!(init_sigma > 0)) throw Error(ErrorKind::kConfig, "must be positive", "init_sigma");
}

namespace {

// Entropy (nats) of p_j ∝ exp(-b e_j); fills p.
double entropy_at(std::span<const double> e, double b, std::vector<double>& p) {
  double z = 0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    p[j] = std::exp(-b * e[j]);
    z += p[j];
  }
  double h = 0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    p[j] /= z;
    if (p[j] > 0) h -= p[j] * std::log(p[j]);
  }
  return h;
}

}  // namespace

Calibration perplexity_calibration(std::span<const double> distances, double target) {
  const std::size_t m = distances.size();
  if (m < 1) throw Error(ErrorKind::kPrecondition, "need at least two points");
  for (double d : distances) {
    if (!std::isfinite(d) || d < 0) throw Error(ErrorKind::kDomain, "distances must be finite and non-negative", "distances");
  }
  if (!(target > 1) || target > static_cast<double>(m)) {
    throw Error(ErrorKind::kPrecondition, "target perplexity must be in (1, " + std::to_string(m) + "]", "perplexity");
  }

  // Work on distances shifted to a zero minimum and scaled to a unit maximum
  // so the search does not depend on the units of d.
  const double dmin = *std::min_element(distances.begin(), distances.end());
  std::vector<double> e(m);
  for (std::size_t j = 0; j < m; ++j) e[j] = distances[j] - dmin;
  const double scale = *std::max_element(e.begin(), e.end());

  Calibration c;
  c.p.assign(m, 1.0 / static_cast<double>(m));
  if (scale == 0) {
    c.perplexity = static_cast<double>(m);
    return c;
  }
  for (auto& v : e) v /= scale;

  const double log_target = std::log(target);
  double b = 1;
  double lo = 0;
  double hi = std::numeric_limits<double>::infinity();
  double h = 0;
  for (c.iterations = 1; c.iterations <= 200; ++c.iterations) {
    h = entropy_at(e, b, c.p);
    const double diff = h - log_target;
    if (std::abs(diff) < 1e-12) break;
    if (diff > 0) {
      lo = b;
      b = std::isinf(hi) ? b * 2 : (b + hi) / 2;
    } else {
      hi = b;
      b = (b + lo) / 2;
    }
  }
  c.iterations = std::min(c.iterations, 200);
  c.beta = b / scale;
  c.perplexity = std::exp(h);
  return c;
}

std::vector<double> squared_distances(std::span<const EmotionVector> vectors) {
  const std::size_t n = vectors.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < kNumCategories; ++k) {
        const double t = vectors[i][k] - vectors[j][k];
        s += t * t;
      }
      d[i * n + j] = s;
      d[j * n + i] = s;
    }
  }
  return d;
}

std::vector<double> joint_probabilities(std::span<const double> sq_distances, std::size_t n, double perplexity) {
  if (sq_distances.size() != n * n) throw Error(ErrorKind::kPrecondition, "distance matrix is not n x n");
  std::vector<double> cond(n * n, 0.0);
  std::vector<double> row(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) row[k++] = sq_distances[i * n + j];
    }
    const auto cal = perplexity_calibration(row, perplexity);
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) cond[i * n + j] = cal.p[k++];
    }
  }
  std::vector<double> p(n * n, 0.0);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
    }
  }
  return p;
}

namespace {

// Student-t kernel values (row-major, zero diagonal) and their sum.
double kernel(std::span<const Point2> y, std::vector<double>& w) {
  const std::size_t n = y.size();
  w.assign(n * n, 0.0);
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      w[i * n + j] = v;
      w[j * n + i] = v;
      z += 2 * v;
    }
  }
  return z;
}

double kl_from_kernel(std::span<const double> p, const std::vector<double>& w, double z) {
  double kl = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0) kl += p[k] * std::log(p[k] * z / w[k]);
  }
  return kl;
}

void gradient(std::span<const double> p, double exaggeration, std::span<const Point2> y, const std::vector<double>& w,
              double z, std::vector<Point2>& grad) {
  const std::size_t n = y.size();
  grad.assign(n, Point2{0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    double gx = 0;
    double gy = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double wij = w[i * n + j];
      const double f = (exaggeration * p[i * n + j] - wij / z) * wij;
      gx += f * (y[i][0] - y[j][0]);
      gy += f * (y[i][1] - y[j][1]);
    }
    grad[i] = {4 * gx, 4 * gy};
  }
}

Point2 seeded_gaussian(std::uint64_t seed, const std::string& id, double sigma) {
  std::mt19937_64 rng(digest_seed(std::to_string(seed) + '\0' + id));
  // Box-Muller on 53-bit uniforms in (0, 1].
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = 2.0 * std::numbers::pi * uniform();
  return {sigma * r * std::cos(t), sigma * r * std::sin(t)};
}

}  // namespace

double tsne_objective(std::span<const double> p, std::span<const Point2> y, std::vector<Point2>* grad) {
  if (p.size() != y.size() * y.size()) throw Error(ErrorKind::kPrecondition, "P does not match the embedding size");
  std::vector<double> w;
  const double z = kernel(y, w);
  if (grad) gradient(p, 1.0, y, w, z, *grad);
  return kl_from_kernel(p, w, z);
}

std::vector<Point2> tsne_project(std::span<const EmotionVector> vectors, std::span<const std::string> ids,
                                 const TsneConfig& cfg, TsneTrace* trace) {
  const std::size_t n = vectors.size();
  if (n < 3) throw Error(ErrorKind::kPrecondition, "need at least three points");
  if (ids.size() != n) throw Error(ErrorKind::kPrecondition, "one id per vector required", "ids");
  cfg.validate(n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  for (std::size_t k = 1; k < n; ++k) {
    if (ids[order[k]] == ids[order[k - 1]]) throw Error(ErrorKind::kPrecondition, "duplicate id", ids[order[k]]);
  }
  std::vector<EmotionVector> xs;
  xs.reserve(n);
  for (auto i : order) xs.push_back(vectors[i]);

  const auto d = squared_distances(xs);
  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0; })) {
    throw Error(ErrorKind::kDegeneracy, "all points coincide");
  }
  const auto p = joint_probabilities(d, n, cfg.perplexity);

  std::vector<Point2> y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = seeded_gaussian(cfg.seed, ids[order[k]], cfg.init_sigma);
  // Large steps diverge on small inputs; cap at max(N / (4 * exaggeration), 50).
  const double lr = std::min(cfg.learning_rate,
                             std::max(static_cast<double>(n) / (4.0 * cfg.early_exaggeration), 50.0));
  std::vector<Point2> update(n, Point2{0, 0});
  std::vector<Point2> gains(n, Point2{1, 1});
  std::vector<Point2> grad;
  std::vector<double> w;
  if (trace) trace->kl.clear();

  for (int it = 0; it < cfg.iterations; ++it) {
    const double exaggeration = it < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch ? cfg.momentum_initial : cfg.momentum_final;
    const double z = kernel(y, w);
    gradient(p, exaggeration, y, w, z, grad);
    Point2 mean{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 2; ++a) {
        auto& g = gains[i][a];
        g = (grad[i][a] > 0) != (update[i][a] > 0) ? g + 0.2 : g * 0.8;
        g = std::max(g, 0.01);
        update[i][a] = momentum * update[i][a] - lr * g * grad[i][a];
        y[i][a] += update[i][a];
        mean[a] += y[i][a];
      }
    }
    for (auto& pt : y) {
      pt[0] -= mean[0] / static_cast<double>(n);
      pt[1] -= mean[1] / static_cast<double>(n);
    }
    if (trace) trace->kl.push_back(tsne_objective(p, y));
  }

  std::vector<Point2> out(n);
  for (std::size_t k = 0; k < n; ++k) out[order[k]] = y[k];
  return out;
}

Palette default_palette() {
  constexpr double kL = 0.75;
  constexpr double kC = 0.12;
  auto encode = [](double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
  };
  Palette pal;
  for (std::size_t k = 0; k < kNumCategories; ++k) {
    const double h = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(kNumCategories);
    const double a = kC * std::cos(h);
    const double b = kC * std::sin(h);
    const double l_ = kL + 0.3963377774 * a + 0.2158037573 * b;
    const double m_ = kL - 0.1055613458 * a - 0.0638541728 * b;
    const double s_ = kL - 0.0894841775 * a - 1.2914855480 * b;
    const double l = l_ * l_ * l_;
    const double m = m_ * m_ * m_;
    const double s = s_ * s_ * s_;
    pal[k] = {encode(4.0767416621 * l - 3.3077115913 * m + 0.2309699292 * s),
              encode(-1.2684380046 * l + 2.6097574011 * m - 0.3413193965 * s),
              encode(-0.0041960863 * l - 0.7034186147 * m + 1.7076147010 * s)};
  }
  return pal;
}

Palette load_palette(const fs::path& path) {
  Palette pal;
  std::vector<bool> seen(kNumCategories, false);
  int n = 0;
  for (const auto& raw : read_lines(path)) {
    ++n;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    // Names may contain spaces ("Empathic pain"); the last three fields are the colour.
    std::istringstream in{std::string(line)};
    std::vector<std::string> tok{std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
    if (tok.size() < 4) {
      throw Error(ErrorKind::kSchema, "line " + std::to_string(n) + ": expected 'Name r g b'", path.string());
    }
    const std::string& r = tok[tok.size() - 3];
    const std::string& g = tok[tok.size() - 2];
    const std::string& b = tok[tok.size() - 1];
    std::string name = tok[0];
    for (std::size_t k = 1; k + 3 < tok.size(); ++k) name += ' ' + tok[k];
    auto cat = EmotionCategory::find(name);
    if (!cat) throw Error(ErrorKind::kSchema, "unknown category '" + name + "'", path.string());
    if (seen[cat->index()]) throw Error(ErrorKind::kSchema, "duplicate category '" + name + "'", path.string());
    Rgb c{parse_double(r, name), parse_double(g, name), parse_double(b, name)};
    for (double v : {c.r, c.g, c.b}) {
      if (!(v >= 0 && v <= 1)) throw Error(ErrorKind::kRange, "colour component outside [0, 1]", name);
    }
    pal[cat->index()] = c;
    seen[cat->index()] = true;
  }
  for (std::size_t k = 0; k < kNumCategories; ++k) {
    if (!seen[k]) throw Error(ErrorKind::kSchema, "missing category '" + std::string(EmotionCategory::at(k).name()) + "'", path.string());
  }
  return pal;
}

std::string palette_to_text(const Palette& p) {
  std::string out = "# category r g b (sRGB, 0..1)\n";
  for (std::size_t k = 0; k < kNumCategories; ++k) {
    out += std::string(EmotionCategory::at(k).name()) + ' ' + format_double(p[k].r) + ' ' + format_double(p[k].g) + ' ' +
           format_double(p[k].b) + '\n';
  }
  return out;
}

Rgb weighted_color(const EmotionVector& v, const Palette& palette) {
  const double total = v.total();
  if (!(total > 0)) throw Error(ErrorKind::kInvalidVector, "vector has zero total intensity");
  Rgb c;
  for (std::size_t k = 0; k < kNumCategories; ++k) {
    if (v[k] == 0) continue;
    const double w = v[k] / total;
    c.r += w * palette[k].r;
    c.g += w * palette[k].g;
    c.b += w * palette[k].b;
  }
  return c;
}

std::vector<MapPoint> build_map(std::span<const std::string> ids, std::span<const EmotionVector> vectors,
                                const TsneConfig& cfg, const Palette& palette) {
  const auto pos = tsne_project(vectors, ids, cfg);
  std::vector<MapPoint> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back({ids[i], pos[i][0], pos[i][1], dominant_emotion(vectors[i]), weighted_color(vectors[i], palette)});
  }
  return out;
}

void export_map(std::vector<MapPoint> points, const fs::path& out) {
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.segment_id < b.segment_id; });
  std::string text = "segment_id\tx\ty\tlabel\tr\tg\tb\n";
  for (const auto& p : points) {
    text += p.segment_id + '\t' + format_double(p.x) + '\t' + format_double(p.y) + '\t' + std::string(p.label.name()) +
            '\t' + format_double(p.color.r) + '\t' + format_double(p.color.g) + '\t' + format_double(p.color.b) + '\n';
  }
  write_file_atomic(out, text);
}

std::vector<MapPoint> read_map(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "segment_id\tx\ty\tlabel\tr\tg\tb") {
    throw Error(ErrorKind::kParse, "missing map header", path.string());
  }
  std::vector<MapPoint> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], '\t', false);
    if (f.size() != 7) throw Error(ErrorKind::kParse, "line " + std::to_string(i + 1) + ": expected 7 fields", path.string());
    auto cat = EmotionCategory::find(f[3]);
    if (!cat) throw Error(ErrorKind::kParse, "unknown label '" + f[3] + "'", path.string());
    out.push_back({f[0], parse_double(f[1], "x"), parse_double(f[2], "y"), *cat,
                   {parse_double(f[4], "r"), parse_double(f[5], "g"), parse_double(f[6], "b")}});
  }
  return out;
}

}  // namespace emocurate
