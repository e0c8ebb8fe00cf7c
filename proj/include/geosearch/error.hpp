// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace geosearch {

enum class ErrorCode {
  kZeroVector,
  kDegenerateSample,
  kInvalidDims,
  kInvalidArgument,
  kShapeMismatch,
  kEmptyTrace,
  kInvalidContext,
  kBackendUnavailable,
  kProtocol,
  kKExceedsN,
  kInsufficientTrials,
  kSinglePoint,
  kTooFewAnchors,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);
/// Inverse of to_string; nullopt for unknown names.
std::optional<ErrorCode> error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace geosearch
