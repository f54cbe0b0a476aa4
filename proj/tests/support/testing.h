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

#ifndef CATT_TESTS_TESTING_H_
#define CATT_TESTS_TESTING_H_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "catt/dram_model.h"
#include "catt/error.h"
#include "catt/fault_model.h"

namespace catt::testing {

inline std::string DataPath(const std::string& rel) {
  return std::string(CATT_DATA_DIR) + "/" + rel;
}

// Code of the catt::Error thrown by `fn`, or nullopt if none was thrown.
inline std::optional<ErrorCode> ErrorOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("catt-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

// G0 with fewer rows; small enough to build allocators quickly.
inline DramGeometry SmallGeometry(uint64_t rows) {
  DramGeometry g;
  g.rows_per_bank = rows;
  return g;
}

inline VulnerableCell Cell(uint64_t bank, uint64_t row, uint64_t byte_offset,
                           unsigned bit, uint64_t threshold = 1'000'000,
                           double reliability = 1.0,
                           Sidedness sidedness = Sidedness::kDoubleRequired) {
  VulnerableCell c;
  c.location = RowCoord{BankCoord{0, 0, bank}, row};
  c.byte_offset = byte_offset;
  c.bit = bit;
  c.threshold = threshold;
  c.reliability = reliability;
  c.sidedness = sidedness;
  return c;
}

inline VulnerabilityProfile BoundProfile(const AddressMapper& mapper,
                                         std::vector<VulnerableCell> cells) {
  VulnerabilityProfile p;
  p.geometry_digest = mapper.Digest();
  p.cells = std::move(cells);
  NormalizeProfile(p);
  return p;
}

}  // namespace catt::testing

#endif  // CATT_TESTS_TESTING_H_
