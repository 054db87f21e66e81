// Copyright 2026 The GTFC Authors
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

#include "core/error.hpp"

namespace gtfc {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kInvalidAxis: return "InvalidAxis";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kTapeAlreadyConsumed: return "TapeAlreadyConsumed";
    case ErrorCode::kNonFiniteOutput: return "NonFiniteOutput";
    case ErrorCode::kEmptySignal: return "EmptySignal";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kUnknownOperator: return "UnknownOperator";
    case ErrorCode::kGroupMismatch: return "GroupMismatch";
    case ErrorCode::kBatchTooSmall: return "BatchTooSmall";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDegenerateSet: return "DegenerateSet";
    case ErrorCode::kTrialMismatch: return "TrialMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kMissingUtterance: return "MissingUtterance";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kFormat: return "FormatError";
  }
  return "UnknownError";
}

}  // namespace gtfc
