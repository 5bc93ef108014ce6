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

#include "emocurate/error.hpp"

namespace emocurate {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kMissingStream: return "missing-stream";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kInvalidVector: return "invalid-vector";
    case ErrorKind::kUnknownLabel: return "unknown-label";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kDegeneracy: return "degeneracy";
    case ErrorKind::kDegenerateAgreement: return "degenerate-agreement";
    case ErrorKind::kTable: return "table";
    case ErrorKind::kCoverage: return "coverage";
    case ErrorKind::kUndefinedScore: return "undefined-score";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kAuth: return "auth";
    case ErrorKind::kEmptySet: return "empty-set";
    case ErrorKind::kStage: return "stage";
    case ErrorKind::kTransport: return "transport";
  }
  return "unknown";
}

static std::string decorate(ErrorKind kind, const std::string& message,
                            const std::string& field) {
  std::string out = std::string(to_string(kind)) + " error";
  if (!field.empty()) out += " [" + field + "]";
  out += ": " + message;
  return out;
}

Error::Error(ErrorKind kind, const std::string& message, std::string field)
    : std::runtime_error(decorate(kind, message, field)),
      kind_(kind),
      field_(std::move(field)) {}

const char* to_string(DropReason reason) noexcept {
  switch (reason) {
    case DropReason::kTooShort: return "too-short";
    case DropReason::kSeparationFailed: return "separation-failed";
    case DropReason::kTranscriptionFailed: return "transcription-failed";
    case DropReason::kDetectionFailed: return "detection-failed";
    case DropReason::kNoFace: return "no-face";
    case DropReason::kBelowThreshold: return "below-threshold";
    case DropReason::kMultiAmbiguous: return "multi-ambiguous";
    case DropReason::kScoringFailed: return "scoring-failed";
    case DropReason::kUnparseableResponse: return "unparseable-response";
    case DropReason::kTransportFailed: return "transport-failed";
    case DropReason::kIoFailed: return "io-failed";
  }
  return "unknown";
}

DropReason drop_reason_from_string(const std::string& text) {
  for (int i = 0; i <= static_cast<int>(DropReason::kIoFailed); ++i) {
    auto r = static_cast<DropReason>(i);
    if (text == to_string(r)) return r;
  }
  throw Error(ErrorKind::kParse, "unknown drop reason '" + text + "'");
}

}  // namespace emocurate
