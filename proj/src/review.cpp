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

#include "emocurate/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>

#include "emocurate/digest.hpp"
#include "emocurate/error.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;
using nlohmann::json;

json sample_to_json(const ReviewSample& s) {
  json emo = json::object();
  for (auto c : canonical_categories()) {
    if (s.emotions.at(c) > 0) emo[std::string(c.name())] = s.emotions.at(c);
  }
  return json{{"sample_id", s.sample_id},
              {"transcript", s.transcript},
              {"audio_url", "/audio/" + s.sample_id},
              {"emotions", emo},
              {"dominant", std::string(s.dominant.name())},
              {"rationale", s.rationale},
              {"assessments", s.assessments}};
}

std::vector<ReviewSample> build_review_set(const std::vector<UtteranceRecord>& manifest, std::size_t n,
                                           std::uint64_t seed) {
  if (manifest.empty()) throw Error(ErrorKind::kEmptySet, "dataset has no utterances");
  const std::string prefix = std::to_string(seed) + '\0';
  auto key = [&](const std::string& id) { return std::make_pair(digest_seed(prefix + id), id); };

  std::map<std::size_t, std::vector<const UtteranceRecord*>> groups;
  for (const auto& r : manifest) groups[r.dominant.index()].push_back(&r);
  for (auto& [c, g] : groups) {
    std::sort(g.begin(), g.end(), [&](auto a, auto b) { return key(a->utterance_id) < key(b->utterance_id); });
  }
  // Category order used for remainders.
  std::vector<std::size_t> cats;
  for (const auto& [c, g] : groups) cats.push_back(c);
  std::sort(cats.begin(), cats.end(), [&](auto a, auto b) {
    return key("category:" + std::string(EmotionCategory::at(a).name())) <
           key("category:" + std::string(EmotionCategory::at(b).name()));
  });

  std::map<std::size_t, std::size_t> taken;
  std::size_t remaining = std::min(n, manifest.size());
  while (remaining > 0) {
    std::vector<std::size_t> active;
    for (auto c : cats) {
      if (taken[c] < groups[c].size()) active.push_back(c);
    }
    if (active.empty()) break;
    const std::size_t quota = remaining / active.size();
    if (quota == 0) {
      for (std::size_t k = 0; k < remaining; ++k) ++taken[active[k]];
      break;
    }
    for (auto c : active) {
      const std::size_t t = std::min(quota, groups[c].size() - taken[c]);
      taken[c] += t;
      remaining -= t;
    }
  }

  std::vector<const UtteranceRecord*> chosen;
  for (const auto& [c, t] : taken) {
    for (std::size_t k = 0; k < t; ++k) chosen.push_back(groups[c][k]);
  }
  std::sort(chosen.begin(), chosen.end(), [&](auto a, auto b) { return key(a->utterance_id) < key(b->utterance_id); });
  std::vector<ReviewSample> out;
  out.reserve(chosen.size());
  for (const auto* r : chosen) {
    out.push_back({r->utterance_id, r->audio_path, r->transcript, r->emotions, r->dominant, r->rationale, r->assessments});
  }
  return out;
}

namespace {

json rating_to_json(const StoredRating& r) {
  return json{{"sample_id", r.sample_id}, {"rater_id", r.rater_id}, {"reasonable", r.reasonable},
              {"comment", r.comment},     {"dominant", r.dominant}, {"ts_ms", r.ts_ms}};
}

bool valid_rater_id(const std::string& id) {
  static const std::regex re("[A-Za-z0-9._-]{1,64}");
  return std::regex_match(id, re);
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::vector<StoredRating> load_rating_log(const fs::path& path) {
  std::vector<StoredRating> out;
  if (!fs::exists(path)) return out;
  int n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    // A torn final line from a crash mid-append is skipped.
    if (j.is_discarded() || !j.is_object()) {
      std::cerr << "review: skipping unreadable line " << n << " of " << path.string() << "\n";
      continue;
    }
    StoredRating r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.rater_id = j.at("rater_id").get<std::string>();
    r.reasonable = j.at("reasonable").get<bool>();
    r.comment = j.value("comment", "");
    r.dominant = j.value("dominant", "");
    r.ts_ms = j.value("ts_ms", std::int64_t{0});
    out.push_back(std::move(r));
  }
  return out;
}

json ReviewSummary::to_json() const {
  json cats = json::object();
  for (const auto& [c, b] : by_category) {
    cats[c] = {{"reasonable", b.reasonable}, {"total", b.total}, {"rate", b.rate()}};
  }
  json raters = json::object();
  for (const auto& [r, p] : by_rater) raters[r] = {{"rated", p.rated}, {"reasonable", p.reasonable}, {"pending", p.pending}};
  return json{{"rate", rate ? json(*rate) : json(nullptr)},
              {"total", total},
              {"reasonable", reasonable},
              {"by_category", cats},
              {"by_rater", raters}};
}

ReviewService::ReviewService(fs::path dataset_dir, ReviewOptions opts)
    : dataset_dir_(std::move(dataset_dir)), opts_(std::move(opts)) {
  const fs::path state = opts_.state_dir.empty() ? dataset_dir_ / "review" : opts_.state_dir;
  ratings_path_ = state / "ratings.jsonl";
  for (const auto& r : opts_.raters) {
    if (!valid_rater_id(r)) throw Error(ErrorKind::kConfig, "malformed rater id '" + r + "'", "raters");
  }

  const auto manifest_text = read_text_file(dataset_dir_ / "manifest.jsonl");
  samples_ = build_review_set(read_manifest(dataset_dir_), opts_.n, opts_.seed);
  for (std::size_t i = 0; i < samples_.size(); ++i) index_[samples_[i].sample_id] = i;

  const json campaign{{"manifest_sha256", sha256_hex(manifest_text)}, {"n", opts_.n}, {"seed", opts_.seed}};
  const auto campaign_path = state / "campaign.json";
  fs::create_directories(state);
  if (fs::exists(campaign_path)) {
    auto stored = json::parse(read_text_file(campaign_path), nullptr, false);
    if (stored != campaign) {
      throw Error(ErrorKind::kConflict, "review state belongs to a different campaign", campaign_path.string());
    }
  } else {
    write_file_atomic(campaign_path, campaign.dump(2) + "\n");
  }

  for (auto& r : load_rating_log(ratings_path_)) {
    if (!index_.count(r.sample_id)) continue;
    sessions_.insert(r.rater_id);
    ratings_[r.rater_id][r.sample_id] = std::move(r);
  }
}

void ReviewService::check_rater(const std::string& rater_id) const {
  if (!sessions_.count(rater_id)) throw Error(ErrorKind::kAuth, "unknown rater", rater_id);
}

void ReviewService::open_session(const std::string& rater_id) {
  if (!valid_rater_id(rater_id)) throw Error(ErrorKind::kAuth, "malformed rater id", rater_id);
  if (!opts_.raters.empty() && !opts_.raters.count(rater_id)) throw Error(ErrorKind::kAuth, "rater not on the roster", rater_id);
  std::unique_lock lock(mu_);
  sessions_.insert(rater_id);
}

std::optional<ReviewSample> ReviewService::next_sample(const std::string& rater_id) const {
  std::shared_lock lock(mu_);
  check_rater(rater_id);
  auto it = ratings_.find(rater_id);
  for (const auto& s : samples_) {
    if (it == ratings_.end() || !it->second.count(s.sample_id)) return s;
  }
  return std::nullopt;
}

std::size_t ReviewService::pending(const std::string& rater_id) const {
  std::shared_lock lock(mu_);
  check_rater(rater_id);
  auto it = ratings_.find(rater_id);
  return samples_.size() - (it == ratings_.end() ? 0 : it->second.size());
}

std::optional<ReviewSample> ReviewService::sample(const std::string& sample_id) const {
  auto it = index_.find(sample_id);
  if (it == index_.end()) return std::nullopt;
  return samples_[it->second];
}

void ReviewService::append(const StoredRating& r) {
  const std::string line = rating_to_json(r).dump() + "\n";
  const int fd = ::open(ratings_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorKind::kIo, std::strerror(errno), ratings_path_.string());
  std::size_t done = 0;
  while (done < line.size()) {
    const auto w = ::write(fd, line.data() + done, line.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorKind::kIo, std::strerror(err), ratings_path_.string());
    }
    done += static_cast<std::size_t>(w);
  }
  ::fsync(fd);
  ::close(fd);
}

std::size_t ReviewService::submit_rating(const std::string& rater_id, const std::string& sample_id, bool reasonable,
                                         const std::string& comment) {
  std::unique_lock lock(mu_);
  check_rater(rater_id);
  auto it = index_.find(sample_id);
  if (it == index_.end()) throw Error(ErrorKind::kConflict, "sample is not assigned to this rater", sample_id);
  auto& mine = ratings_[rater_id];
  if (mine.count(sample_id)) throw Error(ErrorKind::kConflict, "sample already rated", sample_id);
  StoredRating r{sample_id, rater_id, reasonable, comment, std::string(samples_[it->second].dominant.name()), now_ms()};
  append(r);
  mine.emplace(sample_id, std::move(r));
  return samples_.size() - mine.size();
}

ReviewSummary ReviewService::summary() const {
  std::shared_lock lock(mu_);
  ReviewSummary s;
  std::vector<Rating> all;
  for (const auto& rater : sessions_) {
    RaterProgress p;
    if (auto it = ratings_.find(rater); it != ratings_.end()) {
      for (const auto& [id, r] : it->second) {
        ++p.rated;
        if (r.reasonable) ++p.reasonable;
        all.push_back({r.sample_id, r.rater_id, r.reasonable, std::string(samples_[index_.at(id)].dominant.name())});
      }
    }
    p.pending = samples_.size() - p.rated;
    s.by_rater[rater] = p;
  }
  if (!all.empty()) {
    const auto rr = rationality_rate(all);
    s.rate = rr.rate;
    s.total = rr.total;
    s.reasonable = rr.reasonable;
    s.by_category = rr.by_category;
  }
  return s;
}

struct ReviewServer::Impl {
  explicit Impl(ReviewService& s) : svc(s) { routes(); }

  ReviewService& svc;
  httplib::Server server;
  std::thread thread;

  static void send_error(httplib::Response& res, const Error& e) {
    int status = 500;
    switch (e.kind()) {
      case ErrorKind::kAuth: status = 401; break;
      case ErrorKind::kConflict: status = 409; break;
      case ErrorKind::kParse:
      case ErrorKind::kSchema: status = 400; break;
      default: break;
    }
    res.status = status;
    res.set_content(json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", "internal"}, {"message", e.what()}}.dump(), "application/json");
    }
  }

  void routes() {
    server.Get(R"(/api/session/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string rater = req.matches[1];
        svc.open_session(rater);
        auto s = svc.next_sample(rater);
        json body{{"done", !s.has_value()}, {"pending", svc.pending(rater)}, {"total", svc.samples().size()}};
        if (s) body["sample"] = sample_to_json(*s);
        res.set_content(body.dump(), "application/json");
      });
    });
    server.Post(R"(/api/session/([^/]+)/rating)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string rater = req.matches[1];
        svc.open_session(rater);
        auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) throw Error(ErrorKind::kParse, "body is not a JSON object");
        if (!body.contains("sample_id") || !body["sample_id"].is_string()) {
          throw Error(ErrorKind::kSchema, "sample_id must be a string", "sample_id");
        }
        if (!body.contains("reasonable") || !body["reasonable"].is_boolean()) {
          throw Error(ErrorKind::kSchema, "reasonable must be a boolean", "reasonable");
        }
        std::string comment;
        if (body.contains("comment") && !body["comment"].is_null()) {
          if (!body["comment"].is_string()) throw Error(ErrorKind::kSchema, "comment must be a string", "comment");
          comment = body["comment"].get<std::string>();
        }
        const auto left = svc.submit_rating(rater, body["sample_id"].get<std::string>(), body["reasonable"].get<bool>(), comment);
        res.set_content(json{{"ok", true}, {"pending", left}}.dump(), "application/json");
      });
    });
    server.Get("/api/summary", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { res.set_content(svc.summary().to_json().dump(), "application/json"); });
    });
    server.Get(R"(/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = svc.sample(req.matches[1]);
        if (!s) {
          res.status = 404;
          res.set_content(json{{"error", "not-found"}, {"message", "no such utterance"}}.dump(), "application/json");
          return;
        }
        const auto bytes = read_binary_file(svc.dataset_dir() / s->audio_path);
        res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
      });
    });
  }
};

ReviewServer::ReviewServer(ReviewService& service) : impl_(std::make_unique<Impl>(service)) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorKind::kIo, "cannot bind", host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorKind::kIo, "cannot bind to port " + std::to_string(port), host);
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ReviewServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorKind::kIo, "cannot serve on port " + std::to_string(port), host);
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace emocurate
