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

#include <random>

#include "emocurate/analysis.hpp"
#include "emocurate/digest.hpp"
#include "support.hpp"

using namespace emocurate;

namespace {

SpeechSegment segment(const std::string& transcript, double start = 12.5) {
  SpeechSegment s;
  s.span = {"asset01", start, start + 3.0};
  s.transcript = transcript;
  return s;
}

std::size_t count_occurrences(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

using testing::kind_of;

const char* kGood = R"({"schema_version":"v1","facial_assessment":"smiling","audio_assessment":"bright",
  "text_assessment":"thanks","emotions":{"Joy":0.8,"Amusement":0.3},"rationale":"all three agree"})";

}  // namespace

TEST_CASE("system prompt names every category once") {
  const auto b = build_prompt(segment("hello there"), "crops/a/");
  const auto sys = b.system_prompt();
  for (auto c : canonical_categories()) {
    // Each description block starts with "Name:".
    CHECK(count_occurrences(sys, std::string(c.name()) + ":") == 1);
  }
  CHECK(b.emotion_descriptions.size() == kNumCategories);
  CHECK(sys.find(b.mission) == 0);
  CHECK(sys.find(b.output_structure) != std::string::npos);
}

TEST_CASE("prompt digest is deterministic and input-sensitive") {
  const auto a = build_prompt(segment("hello there"), "crops/a/");
  const auto b = build_prompt(segment("hello there"), "crops/a/");
  CHECK(a.digest() == b.digest());
  CHECK(a.digest().size() == 64);
  CHECK(a.digest() != build_prompt(segment("hello there!"), "crops/a/").digest());
  CHECK(a.digest() != build_prompt(segment("hello there"), "crops/b/").digest());

  auto t = PromptTemplates::builtin();
  t.mission += " ";
  CHECK(a.digest() != build_prompt(segment("hello there"), "crops/a/", t).digest());
}

TEST_CASE("templates load from disk and validate") {
  const auto dir = testing::data_dir().parent_path() / "templates" / "v1";
  REQUIRE(std::filesystem::exists(dir / "emotions.txt"));
  const auto t = PromptTemplates::load(dir);
  CHECK(t.emotion_descriptions.size() == kNumCategories);

  auto bad = PromptTemplates::builtin();
  bad.emotion_descriptions.pop_back();
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::kSchema);
  CHECK(kind_of([] { build_prompt(segment(""), "x"); }) == ErrorKind::kPrecondition);
}

TEST_CASE("transcript escaping round trips") {
  const std::vector<std::string> cases = {
      "plain", "a < b & c > d", "</transcript> injected", "quote \" and &amp; literal", "&&&<<<>>>\"\"", ""};
  for (const auto& s : cases) {
    CHECK(unescape_markup(escape_markup(s)) == s);
    const auto b = build_prompt(segment(s.empty() ? "x" : s), "m");
    CHECK(extract_transcript(b.user_prompt()) == (s.empty() ? "x" : s));
  }
  std::mt19937_64 rng(3);
  const std::string alphabet = "ab <>&\";x/";
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (int k = 0; k < 20; ++k) s += alphabet[rng() % alphabet.size()];
    CHECK(unescape_markup(escape_markup(s)) == s);
  }
  CHECK(escape_markup("a<b").find('<') == std::string::npos);
}

TEST_CASE("parse_response accepts wrapped objects") {
  const auto f = parse_response(kGood);
  CHECK(f.emotions.at(EmotionCategory::named("Joy")) == doctest::Approx(0.8));
  CHECK(f.emotions.at(EmotionCategory::named("Amusement")) == doctest::Approx(0.3));
  CHECK(f.emotions.at(EmotionCategory::named("Anger")) == 0.0);
  CHECK(f.rationale == "all three agree");

  CHECK(parse_response(std::string("```json\n") + kGood + "\n```") == f);
  CHECK(parse_response(std::string("Sure, here it is:\n") + kGood + "\nHope that helps.") == f);
  CHECK(parse_response(render_response(f)) == f);
}

TEST_CASE("parse_response rejects bad replies naming the field") {
  auto field_of = [](const std::string& raw) {
    try {
      parse_response(raw);
    } catch (const Error& e) {
      return std::make_pair(e.kind(), e.field());
    }
    return std::make_pair(ErrorKind::kIo, std::string("no error"));
  };
  CHECK(field_of("").first == ErrorKind::kParse);
  CHECK(field_of("I refuse").first == ErrorKind::kParse);
  CHECK(field_of("{not json}").first == ErrorKind::kParse);

  nlohmann::json j = nlohmann::json::parse(kGood);
  auto with = [&](auto mutate) {
    auto k = j;
    mutate(k);
    return field_of(k.dump());
  };
  auto r = with([](auto& k) { k.erase("rationale"); });
  CHECK(r.first == ErrorKind::kSchema);
  CHECK(r.second == "rationale");
  r = with([](auto& k) { k["schema_version"] = "v0"; });
  CHECK(r.second == "schema_version");
  r = with([](auto& k) { k["emotions"]["Joy"] = 1.5; });
  CHECK(r.first == ErrorKind::kRange);
  CHECK(r.second == "emotions.Joy");
  r = with([](auto& k) { k["emotions"]["Happiness"] = 0.2; });
  CHECK(r.first == ErrorKind::kSchema);
  CHECK(r.second == "emotions.Happiness");
  r = with([](auto& k) { k["emotions"] = nlohmann::json::object(); });
  CHECK(r.first == ErrorKind::kInvalidVector);
  r = with([](auto& k) { k["emotions"]["Joy"] = -0.1; });
  CHECK(r.first == ErrorKind::kRange);
  r = with([](auto& k) { k["text_assessment"] = "  "; });
  CHECK(r.second == "text_assessment");
}

TEST_CASE("annotate retries garbage then succeeds") {
  const auto p = build_prompt(segment("we did it"), "crops/x/");
  MockMllmClient client;
  client.script_garbage(p.segment_id, 2);
  RetryPolicy policy{3, {0.5, 1.0}};
  std::vector<double> slept;
  const RateCard rates{2e-6, 8e-6};
  const auto r = annotate(p, client, policy, rates, [&](double s) { slept.push_back(s); });
  REQUIRE(r.record.has_value());
  CHECK_FALSE(r.drop.has_value());
  CHECK(r.attempts == 3);
  CHECK(r.record->attempts == 3);
  CHECK(client.calls(p.segment_id) == 3);
  CHECK(slept == std::vector<double>{0.5, 1.0});
  CHECK(r.record->prompt_digest == p.digest());
  CHECK(r.record->emotions == MockMllmClient::expected_fields(p).emotions);

  // Usage sums every attempt: two garbage replies plus the good one.
  const auto in = estimate_tokens(p.system_prompt()) + estimate_tokens(p.user_prompt());
  const auto garbage_out = estimate_tokens("I am not able to answer in the requested format.");
  const auto good_out = estimate_tokens(render_response(MockMllmClient::expected_fields(p)));
  CHECK(r.usage.input_tokens == 3 * in);
  CHECK(r.usage.output_tokens == 2 * garbage_out + good_out);
  CHECK(r.cost_usd == doctest::Approx(3.0 * in * 2e-6 + (2.0 * garbage_out + good_out) * 8e-6));
  CHECK(r.record->cost_usd == r.cost_usd);
}

TEST_CASE("annotate drops after the last attempt") {
  const auto p = build_prompt(segment("no luck"), "asset:0");
  MockMllmClient client;
  client.script_garbage(p.segment_id, 5);
  auto r = annotate(p, client, RetryPolicy{1, {}}, RateCard{});
  CHECK_FALSE(r.record.has_value());
  CHECK(r.drop == DropReason::kUnparseableResponse);
  CHECK(client.calls(p.segment_id) == 1);

  MockMllmClient flaky;
  flaky.script_transport_failures(p.segment_id, 3);
  r = annotate(p, flaky, RetryPolicy{3, {}}, RateCard{});
  CHECK(r.drop == DropReason::kTransportFailed);
  CHECK(r.usage.input_tokens == 0);

  MockMllmClient recovers;
  recovers.script_transport_failures(p.segment_id, 1);
  r = annotate(p, recovers, RetryPolicy{2, {}}, RateCard{});
  CHECK(r.record.has_value());
  CHECK(r.attempts == 2);

  CHECK(kind_of([&] { annotate(p, recovers, RetryPolicy{0, {}}, RateCard{}); }) == ErrorKind::kConfig);
}

TEST_CASE("cost is tokens times rate") {
  const RateCard rates{3e-6, 1.5e-5};
  CHECK(rates.cost({1000, 200}) == doctest::Approx(0.003 + 0.003));
  CHECK(RateCard{}.cost({123456, 654321}) == 0.0);
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("mock replies are valid and deterministic") {
  for (int i = 0; i < 200; ++i) {
    const auto p = build_prompt(segment("utterance " + std::to_string(i), i), "crops/s/");
    const auto f = MockMllmClient::expected_fields(p);
    CHECK(f == MockMllmClient::expected_fields(p));
    std::size_t nonzero = 0;
    for (double v : f.emotions.values()) {
      if (v == 0) continue;
      ++nonzero;
      CHECK(v >= 0.05);
      CHECK(v <= 1.0);
      CHECK(std::abs(v / 0.05 - std::round(v / 0.05)) < 1e-9);
    }
    CHECK(nonzero >= 1);
    CHECK(nonzero <= 3);
  }
}

TEST_CASE("annotation records round trip") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    AnnotationRecord r;
    r.segment_id = make_segment_id("asset" + std::to_string(i % 7), i * 1.25);
    r.facial_assessment = "face \"quoted\" " + std::to_string(i);
    r.audio_assessment = "audio\nline";
    r.text_assessment = "text <" + std::to_string(rng() % 1000) + ">";
    r.emotions = testing::random_vector(rng, 1 + i % 4);
    r.rationale = "because";
    r.model_id = "mock-mllm-v1";
    r.prompt_digest = sha256_hex(r.segment_id);
    r.token_usage = {static_cast<std::int64_t>(rng() % 5000), static_cast<std::int64_t>(rng() % 500)};
    r.cost_usd = static_cast<double>(rng() % 100000) / 1e7;
    r.attempts = 1 + i % 3;
    const auto line = render_record(r);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(parse_record(line) == r);
  }
  CHECK(kind_of([] { parse_record("[1,2]"); }) == ErrorKind::kParse);
}

TEST_CASE("prompts carry no reference labels") {
  // Segment metadata other than transcript and media never reaches the model.
  auto s = segment("what a day");
  s.words = {{"what", 0, 0.2}, {"a", 0.2, 0.3}, {"day", 0.3, 0.6}};
  s.snr_db = 21.0;
  const auto b = build_prompt(s, "crops/c/");
  const auto user = b.user_prompt();
  for (const char* gold : {"neutral", "joy", "surprise", "sadness", "anger", "disgust", "fear", "label"}) {
    CHECK(user.find(gold) == std::string::npos);
  }
  CHECK(user.find("what a day") != std::string::npos);
}
