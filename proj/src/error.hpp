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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace embserve {

// Mirrors embserve_status in the C header; values are part of the ABI.
enum class ErrorCode : int {
  kOk = 0,
  kConfig = 1,
  kValidation = 2,
  kRoutingViolation = 3,
  kCapacity = 4,
  kParse = 5,
  kInvariant = 6,
  kIo = 7,
  kArgument = 8,
  kInternal = 9,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, std::string message) {
  throw Error(code, std::move(message));
}

}  // namespace embserve
