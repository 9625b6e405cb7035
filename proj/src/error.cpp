// Copyright 2026 The embserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "error.hpp"

namespace embserve {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kRoutingViolation: return "routing-violation";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kInvariant: return "invariant";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kArgument: return "argument";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace embserve
