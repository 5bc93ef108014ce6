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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emocurate/audio.hpp"
#include "emocurate/error.hpp"
#include "emocurate/taxonomy.hpp"

namespace emocurate {

inline constexpr const char* kSchemaVersion = "v1";

/// The three system-prompt parts. Emotion descriptions are one block per
/// canonical category, in canonical order.
struct PromptTemplates {
  std::string version;
  std::string mission;
  std::vector<std::string> emotion_descriptions;
  std::string output_structure;

  /// Templates compiled into the library.
  static PromptTemplates builtin();
  /// Reads mission.txt, emotions.txt and output_structure.txt from `dir`;
  /// emotions.txt has one `Name: description` line per category.
  static PromptTemplates load(const std::filesystem::path& dir);
  /// Throws Error(kSchema).
  void validate() const;
};

struct PromptBundle {
  std::string segment_id;
  std::string mission;
  std::vector<std::string> emotion_descriptions;
  std::string output_structure;
  std::string user_media;
  std::string user_transcript;

  std::string system_prompt() const;
  std::string user_prompt() const;
  /// Hex SHA-256 over system and user prompt.
  std::string digest() const;
};

/// XML-style escaping of & < > ".
std::string escape_markup(std::string_view text);
std::string unescape_markup(std::string_view text);
/// Recovers the transcript from a rendered user prompt.
std::string extract_transcript(const std::string& user_prompt);

/// Throws Error(kPrecondition) when the segment has no transcript.
PromptBundle build_prompt(const SpeechSegment& seg, const std::string& media_ref,
                          const PromptTemplates& templates = PromptTemplates::builtin());

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// Fields a model response carries.
struct ResponseFields {
  std::string schema_version = kSchemaVersion;
  std::string facial_assessment;
  std::string audio_assessment;
  std::string text_assessment;
  EmotionVector emotions;
  std::string rationale;
  friend bool operator==(const ResponseFields&, const ResponseFields&) = default;
};

/// JSON object with the fields of ResponseFields; emotions as
/// `{"Name": intensity}` with zero entries omitted.
std::string render_response(const ResponseFields& f);

/// Accepts the object bare, inside a code fence, or surrounded by prose.
/// Throws Error(kParse) for unreadable text and Error(kSchema),
/// Error(kRange) or Error(kInvalidVector) naming the offending field.
ResponseFields parse_response(const std::string& raw, const std::string& schema_version = kSchemaVersion);

struct AnnotationRecord {
  std::string segment_id;
  std::string schema_version = kSchemaVersion;
  std::string facial_assessment;
  std::string audio_assessment;
  std::string text_assessment;
  EmotionVector emotions;
  std::string rationale;
  std::string model_id;
  std::string prompt_digest;
  TokenUsage token_usage;
  double cost_usd = 0;
  int attempts = 1;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

void to_json(nlohmann::json& j, const AnnotationRecord& r);
void from_json(const nlohmann::json& j, AnnotationRecord& r);
/// One compact JSON line.
std::string render_record(const AnnotationRecord& r);
AnnotationRecord parse_record(const std::string& line);

struct MllmReply {
  std::string text;
  TokenUsage usage;
};

/// Multimodal model client. `send` throws Error(kTransport) for delivery
/// failures; a reply with unusable text is returned normally.
class MllmClient {
 public:
  virtual ~MllmClient() = default;
  virtual std::string model_id() const = 0;
  virtual AdapterCaps caps() const { return {}; }
  virtual void check() const {}
  virtual MllmReply send(const PromptBundle& prompt) = 0;
};

/// Deterministic stand-in. Intensities come from a SHA-256 chain over
/// (segment_id, transcript): 1 to 3 distinct categories, each a multiple of
/// 0.05 in [0.05, 1]. Token counts are characters / 4, rounded up.
/// Per-segment scripts inject garbage replies or transport failures before
/// the first valid reply.
class MockMllmClient final : public MllmClient {
 public:
  MockMllmClient() = default;
  std::string model_id() const override { return "mock-mllm-v1"; }

  void script_garbage(const std::string& segment_id, int count);
  void script_transport_failures(const std::string& segment_id, int count);
  void set_caps(AdapterCaps caps) { caps_ = caps; }
  /// Simulated model latency per call.
  void set_delay(double seconds) { delay_s_ = seconds; }
  AdapterCaps caps() const override { return caps_; }

  MllmReply send(const PromptBundle& prompt) override;
  /// The fields the mock answers with for `prompt` once scripts are spent.
  static ResponseFields expected_fields(const PromptBundle& prompt);
  int calls(const std::string& segment_id) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, int> garbage_;
  std::map<std::string, int> transport_;
  std::map<std::string, int> calls_;
  AdapterCaps caps_;
  double delay_s_ = 0;
};

/// Out-of-process backend: the command reads
/// `{"system": ..., "user": ..., "media": ...}` on stdin and prints the
/// model's reply on stdout. Token counts are estimated as characters / 4.
class CommandMllmClient final : public MllmClient {
 public:
  explicit CommandMllmClient(std::string command, std::size_t max_concurrency = 1)
      : command_(std::move(command)), max_concurrency_(max_concurrency) {}
  std::string model_id() const override { return "command:" + command_; }
  AdapterCaps caps() const override { return {true, max_concurrency_}; }
  void check() const override;
  MllmReply send(const PromptBundle& prompt) override;

 private:
  std::string command_;
  std::size_t max_concurrency_;
};

std::int64_t estimate_tokens(std::string_view text);

/// USD per token.
struct RateCard {
  double input_usd_per_token = 0;
  double output_usd_per_token = 0;

  double cost(const TokenUsage& u) const {
    return static_cast<double>(u.input_tokens) * input_usd_per_token +
           static_cast<double>(u.output_tokens) * output_usd_per_token;
  }
  /// Key/value file with `input_usd_per_token` and `output_usd_per_token`.
  static RateCard load(const std::filesystem::path& path);
};

struct RetryPolicy {
  int max_attempts = 3;
  /// Seconds to wait before attempt k+2 (the last entry repeats).
  std::vector<double> backoff_s;

  void validate() const;
  double delay_before(int attempt) const;
};

struct AnnotateResult {
  std::optional<AnnotationRecord> record;
  std::optional<DropReason> drop;
  std::string message;  ///< last failure, when dropped
  int attempts = 0;
  TokenUsage usage;     ///< summed over every attempt
  double cost_usd = 0;
};

using Sleeper = std::function<void(double seconds)>;

/// Sends the same prompt until a reply parses or attempts run out. Parse and
/// validation failures drop with unparseable-response; a transport failure
/// on the final attempt drops with transport-failed.
AnnotateResult annotate(const PromptBundle& prompt, MllmClient& client, const RetryPolicy& policy,
                        const RateCard& rates, const Sleeper& sleep = {});

}  // namespace emocurate
