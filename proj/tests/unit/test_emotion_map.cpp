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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "emocurate/emotion_map.hpp"
#include "emocurate/process.hpp"
#include "support.hpp"

using namespace emocurate;

namespace {

using testing::kind_of;

double perplexity_of(const std::vector<double>& p) {
  double h = 0;
  for (double v : p) {
    if (v > 0) h -= v * std::log2(v);
  }
  return std::exp2(h);
}

// Ten tight clusters, one per category, `per` points each.
void clusters(std::size_t per, std::uint64_t seed, std::vector<EmotionVector>& vecs, std::vector<std::string>& ids,
              std::vector<int>& label) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 0.05);
  for (int c = 0; c < 10; ++c) {
    for (std::size_t i = 0; i < per; ++i) {
      EmotionVector v;
      v.set(EmotionCategory::at(static_cast<std::size_t>(c) * 2), 0.9 + jitter(rng));
      v.set(EmotionCategory::at(static_cast<std::size_t>(c) * 2 + 1), jitter(rng));
      vecs.push_back(v);
      ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
      label.push_back(c);
    }
  }
}

}  // namespace

TEST_CASE("perplexity calibration hits the target") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(10 + rng() % 90);
    for (auto& x : d) x = u(rng);
    const double target = 2.0 + static_cast<double>(rng() % (d.size() - 2));
    const auto cal = perplexity_calibration(d, target);
    CHECK(cal.perplexity == doctest::Approx(target).epsilon(1e-6));
    CHECK(perplexity_of(cal.p) == doctest::Approx(target).epsilon(1e-6));
    CHECK(std::accumulate(cal.p.begin(), cal.p.end(), 0.0) == doctest::Approx(1.0));
    // p follows exp(-beta d) up to normalisation.
    double z = 0;
    for (double x : d) z += std::exp(-cal.beta * x);
    for (std::size_t j = 0; j < d.size(); ++j) {
      CHECK(cal.p[j] == doctest::Approx(std::exp(-cal.beta * d[j]) / z).epsilon(1e-9));
    }
    CHECK(cal.iterations <= 200);
  }
}

TEST_CASE("perplexity calibration edge cases") {
  const std::vector<double> same(5, 0.7);
  const auto cal = perplexity_calibration(same, 3.0);
  for (double p : cal.p) CHECK(p == doctest::Approx(0.2));

  const std::vector<double> d = {0.1, 0.4, 0.9};
  CHECK(perplexity_calibration(d, 3.0).perplexity == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(kind_of([&] { perplexity_calibration(d, 1.0); }) == ErrorKind::kPrecondition);
  CHECK(kind_of([&] { perplexity_calibration(d, 3.5); }) == ErrorKind::kPrecondition);
  const std::vector<double> neg = {0.1, -0.2, 0.3};
  CHECK(kind_of([&] { perplexity_calibration(neg, 2.0); }) == ErrorKind::kDomain);
  const std::vector<double> nan = {0.1, std::nan(""), 0.3};
  CHECK(kind_of([&] { perplexity_calibration(nan, 2.0); }) == ErrorKind::kDomain);
}

TEST_CASE("joint probabilities") {
  std::mt19937_64 rng(4);
  std::vector<EmotionVector> v;
  for (int i = 0; i < 40; ++i) v.push_back(testing::random_vector(rng));
  const auto d = squared_distances(v);
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < kNumCategories; ++k) s += (v[i][k] - v[j][k]) * (v[i][k] - v[j][k]);
      CHECK(d[i * n + j] == doctest::Approx(s));
    }
  }
  const auto p = joint_probabilities(d, n, 10);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(p[i * n + i] == 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(p[i * n + j] == doctest::Approx(p[j * n + i]));
      CHECK(p[i * n + j] >= 0.0);
      total += p[i * n + j];
    }
  }
  CHECK(total == doctest::Approx(1.0));

  // p_ij = (p_j|i + p_i|j) / 2n from independently calibrated rows.
  std::vector<std::vector<double>> cond(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(d[i * n + j]);
    }
    cond[i] = perplexity_calibration(row, 10).p;
  }
  auto c = [&](std::size_t i, std::size_t j) { return cond[i][j < i ? j : j - 1]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) CHECK(p[i * n + j] == doctest::Approx((c(i, j) + c(j, i)) / (2.0 * n)).epsilon(1e-9));
    }
  }
}

TEST_CASE("objective gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<EmotionVector> v;
    for (int i = 0; i < 25; ++i) v.push_back(testing::random_vector(rng));
    const std::size_t n = v.size();
    const auto p = joint_probabilities(squared_distances(v), n, 8);
    std::normal_distribution<double> g(0, 1);
    std::vector<Point2> y(n);
    for (auto& pt : y) pt = {g(rng), g(rng)};
    std::vector<Point2> grad;
    const double kl = tsne_objective(p, y, &grad);
    CHECK(kl >= 0);
    const double h = 1e-6;
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        auto yp = y, ym = y;
        yp[i][k] += h;
        ym[i][k] -= h;
        const double fd = (tsne_objective(p, yp) - tsne_objective(p, ym)) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[i][k]) / std::max(1e-3, std::abs(fd)));
      }
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("t-SNE separates clusters") {
  std::vector<EmotionVector> vecs;
  std::vector<std::string> ids;
  std::vector<int> label;
  clusters(10, 21, vecs, ids, label);
  TsneConfig cfg;
  cfg.perplexity = 8;
  cfg.seed = 3;
  TsneTrace trace;
  const auto y = tsne_project(vecs, ids, cfg, &trace);
  REQUIRE(y.size() == vecs.size());
  CHECK(trace.kl.size() == static_cast<std::size_t>(cfg.iterations));

  std::array<Point2, 10> centroid{};
  for (std::size_t i = 0; i < y.size(); ++i) {
    centroid[label[i]][0] += y[i][0] / 10;
    centroid[label[i]][1] += y[i][1] / 10;
  }
  int separated = 0;
  for (int c = 0; c < 10; ++c) {
    bool ok = true;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (label[i] != c) continue;
      auto dist = [&](int k) { return std::hypot(y[i][0] - centroid[k][0], y[i][1] - centroid[k][1]); };
      for (int k = 0; k < 10; ++k) {
        if (k != c && dist(k) <= dist(c)) ok = false;
      }
    }
    separated += ok;
  }
  CHECK(separated == 10);

  // After early exaggeration the true objective does not rise across
  // 50-iteration windows.
  const auto settled = static_cast<std::size_t>(std::max(cfg.exaggeration_iterations, cfg.momentum_switch));
  std::size_t rises = 0;
  for (std::size_t t = settled + 50; t < trace.kl.size(); ++t) rises += trace.kl[t] > trace.kl[t - 50] + 1e-6;
  CHECK(rises == 0);
  for (double kl : trace.kl) CHECK(kl >= 0);
  CHECK(trace.kl.back() < trace.kl[static_cast<std::size_t>(cfg.exaggeration_iterations)]);
}

TEST_CASE("t-SNE is seeded and permutation equivariant") {
  std::vector<EmotionVector> vecs;
  std::vector<std::string> ids;
  std::vector<int> label;
  clusters(4, 5, vecs, ids, label);
  TsneConfig cfg;
  cfg.perplexity = 5;
  cfg.iterations = 300;
  cfg.seed = 11;
  const auto a = tsne_project(vecs, ids, cfg);
  CHECK(tsne_project(vecs, ids, cfg) == a);

  std::vector<std::size_t> perm(vecs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
  std::vector<EmotionVector> pv;
  std::vector<std::string> pid;
  for (auto i : perm) {
    pv.push_back(vecs[i]);
    pid.push_back(ids[i]);
  }
  const auto b = tsne_project(pv, pid, cfg);
  for (std::size_t k = 0; k < perm.size(); ++k) CHECK(b[k] == a[perm[k]]);

  cfg.seed = 12;
  CHECK(tsne_project(vecs, ids, cfg) != a);
}

TEST_CASE("t-SNE preconditions") {
  std::vector<EmotionVector> two(2, EmotionVector{});
  std::vector<std::string> ids2 = {"a", "b"};
  TsneConfig cfg;
  cfg.perplexity = 1.5;
  CHECK(kind_of([&] { tsne_project(two, ids2, cfg); }) == ErrorKind::kPrecondition);

  std::vector<EmotionVector> same(5);
  for (auto& v : same) v.set(EmotionCategory::named("Joy"), 0.5);
  std::vector<std::string> ids5 = {"a", "b", "c", "d", "e"};
  cfg.perplexity = 2;
  CHECK(kind_of([&] { tsne_project(same, ids5, cfg); }) == ErrorKind::kDegeneracy);

  std::vector<std::string> dup = {"a", "b", "c", "d", "a"};
  std::mt19937_64 rng(1);
  std::vector<EmotionVector> v5;
  for (int i = 0; i < 5; ++i) v5.push_back(testing::random_vector(rng));
  CHECK(kind_of([&] { tsne_project(v5, dup, cfg); }) == ErrorKind::kPrecondition);

  auto field = [](TsneConfig c, std::size_t n) {
    try {
      c.validate(n);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfig);
      return e.field();
    }
    return std::string("no error");
  };
  TsneConfig c;
  CHECK(field(c, 100) == "no error");
  CHECK(field(c, 20) == "perplexity");
  c.learning_rate = 0;
  CHECK(field(c, 100) == "learning_rate");
  c = {};
  c.iterations = 0;
  CHECK(field(c, 100) == "iterations");
}

TEST_CASE("palette and colour blending") {
  const auto pal = default_palette();
  std::set<std::tuple<double, double, double>> distinct;
  for (const auto& c : pal) {
    for (double ch : {c.r, c.g, c.b}) {
      CHECK(ch >= 0.0);
      CHECK(ch <= 1.0);
    }
    distinct.insert({c.r, c.g, c.b});
  }
  CHECK(distinct.size() == kNumCategories);

  TempDir d;
  const auto path = d.path() / "pal.txt";
  std::ofstream(path) << palette_to_text(pal);
  CHECK(load_palette(path) == pal);
  CHECK(load_palette(testing::data_dir() / "palette.txt") == pal);

  std::ofstream(d.path() / "short.txt") << "Joy 0.1 0.2 0.3\n";
  CHECK(kind_of([&] { load_palette(d.path() / "short.txt"); }) == ErrorKind::kSchema);
  auto text = palette_to_text(pal);
  const auto pos = text.find('\n');
  std::ofstream(d.path() / "range.txt") << "Admiration 1.5 0 0" << text.substr(pos);
  CHECK(kind_of([&] { load_palette(d.path() / "range.txt"); }) == ErrorKind::kRange);

  EmotionVector v;
  const auto joy = EmotionCategory::named("Joy");
  const auto fear = EmotionCategory::named("Fear");
  v.set(joy, 0.4);
  CHECK(weighted_color(v, pal) == pal[joy.index()]);
  v.set(fear, 0.2);
  const auto c = weighted_color(v, pal);
  CHECK(c.r == doctest::Approx((0.4 * pal[joy.index()].r + 0.2 * pal[fear.index()].r) / 0.6));
  CHECK(c.b == doctest::Approx((0.4 * pal[joy.index()].b + 0.2 * pal[fear.index()].b) / 0.6));
  CHECK(kind_of([&] { weighted_color(EmotionVector{}, pal); }) == ErrorKind::kInvalidVector);
}

TEST_CASE("map export round trips") {
  std::vector<EmotionVector> vecs;
  std::vector<std::string> ids;
  std::vector<int> label;
  clusters(3, 9, vecs, ids, label);
  TsneConfig cfg;
  cfg.perplexity = 5;
  cfg.iterations = 200;
  auto points = build_map(ids, vecs, cfg);
  REQUIRE(points.size() == ids.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].segment_id == ids[i]);
    CHECK(points[i].label == dominant_emotion(vecs[i]));
  }
  TempDir d;
  export_map(points, d.path() / "map.tsv");
  const auto back = read_map(d.path() / "map.tsv");
  std::sort(points.begin(), points.end(), [](auto& a, auto& b) { return a.segment_id < b.segment_id; });
  CHECK(back == points);
}
