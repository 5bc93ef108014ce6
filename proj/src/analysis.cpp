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

#include "emocurate/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "emocurate/digest.hpp"
#include "emocurate/kv_config.hpp"
#include "emocurate/process.hpp"
#include "emocurate/templates_embedded.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> parse_emotion_lines(std::string_view text, const std::string& source) {
  std::vector<std::string> out(kNumCategories);
  std::vector<bool> seen(kNumCategories, false);
  for (const auto& raw : split(text, '\n', false)) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorKind::kSchema, "expected 'Name: description'", source);
    const auto name = trim(line.substr(0, colon));
    auto cat = EmotionCategory::find(name);
    if (!cat) throw Error(ErrorKind::kSchema, "unknown emotion '" + std::string(name) + "'", source);
    if (seen[cat->index()]) throw Error(ErrorKind::kSchema, "duplicate emotion '" + std::string(name) + "'", source);
    seen[cat->index()] = true;
    out[cat->index()] = std::string(line);
  }
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (!seen[i]) throw Error(ErrorKind::kSchema, "missing emotion '" + std::string(EmotionCategory::at(i).name()) + "'", source);
  }
  return out;
}

std::string trimmed(std::string_view s) { return std::string(trim(s)); }

}  // namespace

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  t.version = embedded::kTemplateVersion;
  t.mission = trimmed(embedded::kMission);
  t.emotion_descriptions = parse_emotion_lines(embedded::kEmotions, "builtin emotions.txt");
  t.output_structure = trimmed(embedded::kOutputStructure);
  return t;
}

PromptTemplates PromptTemplates::load(const fs::path& dir) {
  PromptTemplates t;
  t.version = dir.filename().string();
  t.mission = trimmed(read_text_file(dir / "mission.txt"));
  t.emotion_descriptions = parse_emotion_lines(read_text_file(dir / "emotions.txt"), (dir / "emotions.txt").string());
  t.output_structure = trimmed(read_text_file(dir / "output_structure.txt"));
  t.validate();
  return t;
}

void PromptTemplates::validate() const {
  if (mission.empty()) throw Error(ErrorKind::kSchema, "empty", "mission");
  if (output_structure.empty()) throw Error(ErrorKind::kSchema, "empty", "output_structure");
  if (emotion_descriptions.size() != kNumCategories) throw Error(ErrorKind::kSchema, "need one block per category", "emotions");
  for (const auto& d : emotion_descriptions) {
    if (d.empty()) throw Error(ErrorKind::kSchema, "empty description", "emotions");
  }
}

std::string PromptBundle::system_prompt() const {
  std::string s = mission + "\n\n";
  for (const auto& d : emotion_descriptions) s += d + "\n";
  s += "\n" + output_structure + "\n";
  return s;
}

std::string PromptBundle::user_prompt() const {
  return "<media ref=\"" + escape_markup(user_media) + "\"/>\n<transcript>" + escape_markup(user_transcript) +
         "</transcript>\n";
}

std::string PromptBundle::digest() const {
  Sha256 h;
  h.update(system_prompt());
  h.update(std::string_view("\0", 1));
  h.update(user_prompt());
  return to_hex(h.finish());
}

std::string escape_markup(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_markup(std::string_view text) {
  static constexpr std::pair<std::string_view, char> kEntities[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}};
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    bool hit = false;
    if (text[i] == '&') {
      for (auto [ent, ch] : kEntities) {
        if (text.substr(i, ent.size()) == ent) {
          out += ch;
          i += ent.size();
          hit = true;
          break;
        }
      }
      if (!hit) throw Error(ErrorKind::kParse, "bare '&' in escaped text");
    } else {
      out += text[i++];
    }
  }
  return out;
}

std::string extract_transcript(const std::string& user_prompt) {
  static constexpr std::string_view kOpen = "<transcript>";
  static constexpr std::string_view kClose = "</transcript>";
  const auto a = user_prompt.find(kOpen);
  const auto b = user_prompt.rfind(kClose);
  if (a == std::string::npos || b == std::string::npos || b < a + kOpen.size()) {
    throw Error(ErrorKind::kParse, "no transcript element", "transcript");
  }
  return unescape_markup(std::string_view(user_prompt).substr(a + kOpen.size(), b - a - kOpen.size()));
}

PromptBundle build_prompt(const SpeechSegment& seg, const std::string& media_ref, const PromptTemplates& templates) {
  if (seg.transcript.empty()) throw Error(ErrorKind::kPrecondition, "segment has no transcript", seg.segment_id());
  templates.validate();
  PromptBundle b;
  b.segment_id = seg.segment_id();
  b.mission = templates.mission;
  b.emotion_descriptions = templates.emotion_descriptions;
  b.output_structure = templates.output_structure;
  b.user_media = media_ref;
  b.user_transcript = seg.transcript;
  return b;
}

namespace {

json emotions_to_json(const EmotionVector& v) {
  json e = json::object();
  for (auto c : canonical_categories()) {
    if (v.at(c) != 0.0) e[std::string(c.name())] = v.at(c);
  }
  return e;
}

}  // namespace

std::string render_response(const ResponseFields& f) {
  json j{{"schema_version", f.schema_version},
         {"facial_assessment", f.facial_assessment},
         {"audio_assessment", f.audio_assessment},
         {"text_assessment", f.text_assessment},
         {"emotions", emotions_to_json(f.emotions)},
         {"rationale", f.rationale}};
  return j.dump(2);
}

namespace {

json locate_object(const std::string& raw) {
  std::string_view body = raw;
  // Prefer the contents of a ``` fence when present.
  if (auto fence = body.find("```"); fence != std::string_view::npos) {
    auto nl = body.find('\n', fence);
    auto close = nl == std::string_view::npos ? nl : body.find("```", nl);
    if (close != std::string_view::npos) body = body.substr(nl + 1, close - nl - 1);
  }
  const auto a = body.find('{');
  const auto b = body.rfind('}');
  if (a == std::string_view::npos || b == std::string_view::npos || b < a) {
    throw Error(ErrorKind::kParse, "no JSON object in response", "response");
  }
  json j = json::parse(body.substr(a, b - a + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::kParse, "malformed JSON object", "response");
  return j;
}

std::string required_text(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw Error(ErrorKind::kSchema, "missing required field", field);
  if (!it->is_string()) throw Error(ErrorKind::kSchema, "must be a string", field);
  auto s = it->get<std::string>();
  if (trim(s).empty()) throw Error(ErrorKind::kSchema, "must not be empty", field);
  return s;
}

}  // namespace

ResponseFields parse_response(const std::string& raw, const std::string& schema_version) {
  if (trim(raw).empty()) throw Error(ErrorKind::kParse, "empty response", "response");
  const json j = locate_object(raw);
  ResponseFields f;
  f.schema_version = required_text(j, "schema_version");
  if (f.schema_version != schema_version) {
    throw Error(ErrorKind::kSchema, "expected '" + schema_version + "', got '" + f.schema_version + "'", "schema_version");
  }
  f.facial_assessment = required_text(j, "facial_assessment");
  f.audio_assessment = required_text(j, "audio_assessment");
  f.text_assessment = required_text(j, "text_assessment");
  auto e = j.find("emotions");
  if (e == j.end()) throw Error(ErrorKind::kSchema, "missing required field", "emotions");
  if (!e->is_object()) throw Error(ErrorKind::kSchema, "must be an object", "emotions");
  for (auto it = e->begin(); it != e->end(); ++it) {
    const std::string field = "emotions." + it.key();
    auto cat = EmotionCategory::find(it.key());
    if (!cat) throw Error(ErrorKind::kSchema, "unknown emotion category", field);
    if (!it->is_number()) throw Error(ErrorKind::kSchema, "intensity must be a number", field);
    const double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::kRange, "intensity " + format_double(v) + " outside [0, 1]", field);
    f.emotions.set(*cat, v);
  }
  if (f.emotions.is_zero()) throw Error(ErrorKind::kInvalidVector, "all intensities are zero", "emotions");
  f.rationale = required_text(j, "rationale");
  return f;
}

void to_json(json& j, const AnnotationRecord& r) {
  j = json{{"segment_id", r.segment_id},
           {"schema_version", r.schema_version},
           {"facial_assessment", r.facial_assessment},
           {"audio_assessment", r.audio_assessment},
           {"text_assessment", r.text_assessment},
           {"emotions", emotions_to_json(r.emotions)},
           {"rationale", r.rationale},
           {"model_id", r.model_id},
           {"prompt_digest", r.prompt_digest},
           {"token_usage", {{"input_tokens", r.token_usage.input_tokens}, {"output_tokens", r.token_usage.output_tokens}}},
           {"cost_usd", r.cost_usd},
           {"attempts", r.attempts}};
}

void from_json(const json& j, AnnotationRecord& r) {
  r.segment_id = j.at("segment_id").get<std::string>();
  r.schema_version = j.at("schema_version").get<std::string>();
  r.facial_assessment = j.at("facial_assessment").get<std::string>();
  r.audio_assessment = j.at("audio_assessment").get<std::string>();
  r.text_assessment = j.at("text_assessment").get<std::string>();
  r.emotions = EmotionVector{};
  for (auto it = j.at("emotions").begin(); it != j.at("emotions").end(); ++it) {
    auto cat = EmotionCategory::find(it.key());
    if (!cat) throw Error(ErrorKind::kSchema, "unknown emotion category", "emotions." + it.key());
    const double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::kRange, "intensity outside [0, 1]", "emotions." + it.key());
    r.emotions.set(*cat, v);
  }
  r.rationale = j.at("rationale").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.prompt_digest = j.at("prompt_digest").get<std::string>();
  r.token_usage.input_tokens = j.at("token_usage").at("input_tokens").get<std::int64_t>();
  r.token_usage.output_tokens = j.at("token_usage").at("output_tokens").get<std::int64_t>();
  r.cost_usd = j.at("cost_usd").get<double>();
  r.attempts = j.value("attempts", 1);
}

std::string render_record(const AnnotationRecord& r) { return json(r).dump(); }

AnnotationRecord parse_record(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::kParse, "record is not a JSON object");
  try {
    return j.get<AnnotationRecord>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, e.what(), "record");
  }
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

void MockMllmClient::script_garbage(const std::string& segment_id, int count) {
  std::lock_guard lock(mu_);
  garbage_[segment_id] = count;
}

void MockMllmClient::script_transport_failures(const std::string& segment_id, int count) {
  std::lock_guard lock(mu_);
  transport_[segment_id] = count;
}

int MockMllmClient::calls(const std::string& segment_id) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(segment_id);
  return it == calls_.end() ? 0 : it->second;
}

ResponseFields MockMllmClient::expected_fields(const PromptBundle& p) {
  const std::string key = p.segment_id + "\n" + p.user_transcript;
  const std::string root = sha256_hex(key);
  ResponseFields f;
  const auto n = 1 + digest_seed(root + ":n") % 3;
  std::vector<std::size_t> picked;
  for (std::uint64_t k = 0; picked.size() < n; ++k) {
    const auto c = digest_seed(root + ":c" + std::to_string(k)) % kNumCategories;
    if (std::find(picked.begin(), picked.end(), c) != picked.end()) continue;
    picked.push_back(c);
    const auto steps = 1 + digest_seed(root + ":v" + std::to_string(k)) % 20;
    f.emotions.set(EmotionCategory::at(c), static_cast<double>(steps) * 0.05);
  }
  const auto dom = dominant_emotion(f.emotions);
  const bool has_face = p.user_media.find("crops/") != std::string::npos;
  f.facial_assessment = has_face ? "Face track " + p.user_media + " reviewed." : "No face track supplied.";
  f.audio_assessment = "Voice energy consistent with " + to_lower(dom.name()) + ".";
  f.text_assessment = "Transcript of " + std::to_string(split(p.user_transcript, ' ').size()) + " words.";
  f.rationale = "Strongest cue points to " + to_lower(dom.name()) + " (" + root.substr(0, 8) + ").";
  return f;
}

MllmReply MockMllmClient::send(const PromptBundle& prompt) {
  bool transport_fail = false;
  bool garbage = false;
  {
    std::lock_guard lock(mu_);
    ++calls_[prompt.segment_id];
    if (auto it = transport_.find(prompt.segment_id); it != transport_.end() && it->second > 0) {
      --it->second;
      transport_fail = true;
    } else if (auto g = garbage_.find(prompt.segment_id); g != garbage_.end() && g->second > 0) {
      --g->second;
      garbage = true;
    }
  }
  if (delay_s_ > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay_s_));
  if (transport_fail) throw Error(ErrorKind::kTransport, "scripted transport failure", prompt.segment_id);
  MllmReply r;
  r.text = garbage ? "I am not able to answer in the requested format." : render_response(expected_fields(prompt));
  r.usage.input_tokens = estimate_tokens(prompt.system_prompt()) + estimate_tokens(prompt.user_prompt());
  r.usage.output_tokens = estimate_tokens(r.text);
  return r;
}

void CommandMllmClient::check() const {
  if (!find_executable(command_)) throw Error(ErrorKind::kConfig, "mllm command not found: " + command_, "mllm");
}

MllmReply CommandMllmClient::send(const PromptBundle& prompt) {
  const json req{{"system", prompt.system_prompt()}, {"user", prompt.user_prompt()}, {"media", prompt.user_media}};
  ProcessResult res;
  try {
    res = run_process({command_}, req.dump());
  } catch (const Error& e) {
    throw Error(ErrorKind::kTransport, e.what(), prompt.segment_id);
  }
  if (res.exit_code != 0) {
    throw Error(ErrorKind::kTransport, "mllm command exited with " + std::to_string(res.exit_code), prompt.segment_id);
  }
  MllmReply r;
  r.text = std::move(res.out);
  r.usage.input_tokens = estimate_tokens(prompt.system_prompt()) + estimate_tokens(prompt.user_prompt());
  r.usage.output_tokens = estimate_tokens(r.text);
  return r;
}

RateCard RateCard::load(const fs::path& path) {
  auto kv = KvConfig::load(path);
  RateCard r;
  r.input_usd_per_token = kv.get_double("input_usd_per_token", 0.0);
  r.output_usd_per_token = kv.get_double("output_usd_per_token", 0.0);
  if (r.input_usd_per_token < 0 || r.output_usd_per_token < 0) {
    throw Error(ErrorKind::kConfig, "rates must be non-negative", path.string());
  }
  return r;
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw Error(ErrorKind::kConfig, "must be >= 1", "retry.max_attempts");
  for (double b : backoff_s) {
    if (!(b >= 0)) throw Error(ErrorKind::kConfig, "must be >= 0", "retry.backoff_s");
  }
}

double RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1 || backoff_s.empty()) return 0.0;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(attempt - 2), backoff_s.size() - 1);
  return backoff_s[k];
}

AnnotateResult annotate(const PromptBundle& prompt, MllmClient& client, const RetryPolicy& policy,
                        const RateCard& rates, const Sleeper& sleep) {
  policy.validate();
  AnnotateResult out;
  const std::string digest = prompt.digest();
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (const double d = policy.delay_before(attempt); d > 0) {
      if (sleep) {
        sleep(d);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(d));
      }
    }
    out.attempts = attempt;
    MllmReply reply;
    try {
      reply = client.send(prompt);
    } catch (const std::exception& e) {
      out.drop = DropReason::kTransportFailed;
      out.message = e.what();
      continue;
    }
    out.usage.input_tokens += reply.usage.input_tokens;
    out.usage.output_tokens += reply.usage.output_tokens;
    out.cost_usd = rates.cost(out.usage);
    try {
      ResponseFields f = parse_response(reply.text);
      AnnotationRecord r;
      r.segment_id = prompt.segment_id;
      r.schema_version = f.schema_version;
      r.facial_assessment = std::move(f.facial_assessment);
      r.audio_assessment = std::move(f.audio_assessment);
      r.text_assessment = std::move(f.text_assessment);
      r.emotions = f.emotions;
      r.rationale = std::move(f.rationale);
      r.model_id = client.model_id();
      r.prompt_digest = digest;
      r.token_usage = out.usage;
      r.cost_usd = out.cost_usd;
      r.attempts = attempt;
      out.record = std::move(r);
      out.drop.reset();
      out.message.clear();
      return out;
    } catch (const Error& e) {
      out.drop = DropReason::kUnparseableResponse;
      out.message = e.what();
    }
  }
  return out;
}

}  // namespace emocurate
