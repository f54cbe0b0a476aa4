// Copyright 2026 The CATT Simulator Authors
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

#ifndef CATT_ERROR_H_
#define CATT_ERROR_H_

#include <stdexcept>
#include <string>

namespace catt {

enum class ErrorCode {
  kInvalidArgument,
  kAddressOutOfRange,
  kLocationOutOfRange,
  kPfnOutOfRange,
  kParseError,
  kDigestMismatch,
  kGeometryMismatch,
  kDoubleFree,
  kNotAllocated,
};

const char* ErrorCodeName(ErrorCode code);

// All recoverable failures in the simulator are reported with this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace catt

#endif  // CATT_ERROR_H_
