// Copyright (c) 2026, The idlike Authors. All rights reserved.
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

#ifndef IDLIKE_ERRORS_HPP_
#define IDLIKE_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace idlike {

enum class ErrorCode {
  // embedcore
  ZeroVector,
  DimensionMismatch,
  NotNormalized,
  EmptyInput,
  NonPositiveTemperature,
  // encoder
  BackendUnavailable,
  InvalidImage,
  GradientUnsupported,
  UnknownToken,
  // miner
  DegenerateImage,
  InsufficientCrops,
  InvalidConfig,
  // promptlearn
  LabelOutOfRange,
  NoOodPrompts,
  TooFewPrompts,
  DivergenceDetected,
  // detect / metrics
  EmptyScores,
  LengthMismatch,
  // harness
  MissingFile,
  UnknownLabel,
  EmptyManifest,
  InsufficientSamples,
  FormatError,
  UsageError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::GradientUnsupported: return "GradientUnsupported";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::InsufficientCrops: return "InsufficientCrops";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NoOodPrompts: return "NoOodPrompts";
    case ErrorCode::TooFewPrompts: return "TooFewPrompts";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::EmptyScores: return "EmptyScores";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

inline void enforce(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace idlike

#endif  // IDLIKE_ERRORS_HPP_
