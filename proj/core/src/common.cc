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

#include <cstdio>
#include <fstream>
#include <sstream>

#include "catt/digest.h"
#include "catt/error.h"
#include "catt/io.h"

namespace catt {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kAddressOutOfRange: return "address-out-of-range";
    case ErrorCode::kLocationOutOfRange: return "location-out-of-range";
    case ErrorCode::kPfnOutOfRange: return "pfn-out-of-range";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kDigestMismatch: return "digest-mismatch";
    case ErrorCode::kGeometryMismatch: return "geometry-mismatch";
    case ErrorCode::kDoubleFree: return "double-free";
    case ErrorCode::kNotAllocated: return "range-not-allocated";
  }
  return "unknown";
}

std::string HexDigest(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  out << contents;
  if (!out) throw Error(ErrorCode::kInvalidArgument, "write failed: " + path);
}

}  // namespace catt
