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

#include <stdexcept>
#include <string>

namespace emocurate {

enum class ErrorKind {
  kIo,
  kMissingStream,
  kRange,
  kInvalidVector,
  kUnknownLabel,
  kSchema,
  kParse,
  kPrecondition,
  kDomain,
  kDegeneracy,
  kDegenerateAgreement,
  kTable,
  kCoverage,
  kUndefinedScore,
  kIntegrity,
  kConfig,
  kConflict,
  kAuth,
  kEmptySet,
  kStage,
  kTransport,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. `field()` names the offending input
/// element (a response field, a config key, a file) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

/// Why a segment left the pipeline without an annotation.
enum class DropReason {
  kTooShort,
  kSeparationFailed,
  kTranscriptionFailed,
  kDetectionFailed,
  kNoFace,
  kBelowThreshold,
  kMultiAmbiguous,
  kScoringFailed,
  kUnparseableResponse,
  kTransportFailed,
  kIoFailed,
};

const char* to_string(DropReason reason) noexcept;
DropReason drop_reason_from_string(const std::string& text);

/// A per-segment stage failure: the orchestrator records the reason and
/// carries on with the rest of the run.
class StageError : public Error {
 public:
  StageError(DropReason reason, const std::string& message, std::string context = {})
      : Error(ErrorKind::kStage, message, std::move(context)), reason_(reason) {}
  DropReason reason() const noexcept { return reason_; }

 private:
  DropReason reason_;
};

}  // namespace emocurate
