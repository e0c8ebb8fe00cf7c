// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/error.hpp"

namespace geosearch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDegenerateSample: return "DegenerateSample";
    case ErrorCode::kInvalidDims: return "InvalidDims";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyTrace: return "EmptyTrace";
    case ErrorCode::kInvalidContext: return "InvalidContext";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kProtocol: return "ProtocolError";
    case ErrorCode::kKExceedsN: return "KExceedsN";
    case ErrorCode::kInsufficientTrials: return "InsufficientTrials";
    case ErrorCode::kSinglePoint: return "SinglePoint";
    case ErrorCode::kTooFewAnchors: return "TooFewAnchors";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kIo); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace geosearch
