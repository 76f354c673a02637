// Copyright 2026 The RepBNN Authors. All Rights Reserved.
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

#include "repbnn/error.h"

namespace repbnn {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonDivisibleChannels: return "NonDivisibleChannels";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kUnsupportedNode: return "UnsupportedNode";
    case ErrorCode::kVerificationFailed: return "VerificationFailed";
    case ErrorCode::kDatasetError: return "DatasetError";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kNotRepGraph: return "NotRepGraph";
    case ErrorCode::kUnknownLayer: return "UnknownLayer";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace repbnn
