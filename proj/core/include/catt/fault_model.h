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

// Rowhammer fault model: vulnerable cells, per-epoch activation counters and
// the flip rule.
//
// A cell flips when its aggressor rows reach the cell's activation threshold
// inside one refresh epoch. Double-sided cells need an aggressor on both
// sides, single-sided cells need either one. Aggressors may sit up to
// blast_radius rows away. Once a cell qualifies in an epoch it gets exactly
// one Bernoulli draw with probability `reliability`; the draw is a pure hash
// of (seed, cell, epoch), so the outcome does not depend on the order in
// which rows were activated.

#ifndef CATT_FAULT_MODEL_H_
#define CATT_FAULT_MODEL_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "catt/dram_model.h"

namespace catt {

inline constexpr uint64_t kDefaultHammerThreshold = 1'000'000;
inline constexpr unsigned kMaxBlastRadius = 2;

enum class Sidedness { kDoubleRequired, kSingleSufficient };

std::string_view SidednessName(Sidedness s);

struct VulnerableCell {
  RowCoord location;
  uint64_t byte_offset = 0;  // inside the row
  unsigned bit = 0;
  uint64_t threshold = kDefaultHammerThreshold;
  double reliability = 1.0;
  Sidedness sidedness = Sidedness::kDoubleRequired;

  auto key() const { return std::tie(location, byte_offset, bit); }
  bool operator==(const VulnerableCell&) const = default;
};

struct VulnerabilityProfile {
  std::string geometry_digest;
  // Sorted by key(), no duplicates.
  std::vector<VulnerableCell> cells;

  bool operator==(const VulnerabilityProfile&) const = default;
};

// Sorts cells and checks the per-cell invariants. Throws kParseError on
// duplicates or out-of-range values.
void NormalizeProfile(VulnerabilityProfile& profile);

// Throws kDigestMismatch if the profile was made for another machine and
// kGeometryMismatch if a cell lies outside the geometry.
void CheckProfileBinding(const VulnerabilityProfile& profile,
                         const AddressMapper& mapper);

VulnerabilityProfile ParseProfile(std::string_view json_text);
std::string ProfileToJson(const VulnerabilityProfile& profile);
std::string ProfileDigest(const VulnerabilityProfile& profile);

// Loading also verifies the binding to `mapper`.
VulnerabilityProfile LoadProfile(const std::string& path,
                                 const AddressMapper& mapper);
void StoreProfile(const VulnerabilityProfile& profile, const std::string& path);

// Multiplies every threshold by num/den (rounded down, at least 1).
VulnerabilityProfile ScaleThresholds(const VulnerabilityProfile& profile,
                                     uint64_t num, uint64_t den);

struct ProfileRecipe {
  uint64_t victim_frames = 0;
  uint64_t seed = 0;
  uint64_t threshold = kDefaultHammerThreshold;
  double reliability = 1.0;
  Sidedness sidedness = Sidedness::kDoubleRequired;
  // Frames below this PFN are never chosen.
  Pfn min_frame = 0;
};

// Places one cell in each of `victim_frames` distinct frames, chosen at
// random. Rows at the bank edges are skipped so every victim can be hammered
// from both sides.
VulnerabilityProfile GenerateProfile(const AddressMapper& mapper,
                                     const ProfileRecipe& recipe);

struct FaultParams {
  uint64_t seed = 0;
  unsigned blast_radius = 1;
};

// Immutable, shareable view of a profile indexed by row.
class FaultModel {
 public:
  // Throws like CheckProfileBinding, or kInvalidArgument for a bad radius.
  FaultModel(AddressMapper mapper, VulnerabilityProfile profile,
             FaultParams params);

  const AddressMapper& mapper() const { return mapper_; }
  const VulnerabilityProfile& profile() const { return profile_; }
  const FaultParams& params() const { return params_; }

  uint64_t RowKey(const RowCoord& row) const;
  RowCoord RowFromKey(uint64_t key) const;
  std::span<const uint32_t> CellsInRow(uint64_t row_key) const;
  PhysAddr CellAddress(size_t cell_index) const;

 private:
  AddressMapper mapper_;
  VulnerabilityProfile profile_;
  FaultParams params_;
  std::unordered_map<uint64_t, std::vector<uint32_t>> by_row_;
  std::vector<PhysAddr> cell_addr_;
};

struct FlipEvent {
  PhysAddr pa = 0;
  unsigned bit = 0;
  uint64_t epoch = 0;

  bool operator==(const FlipEvent&) const = default;
};

// The mutable DRAM world: memory contents, activation counters of the
// current epoch and the flip log. Not thread-safe.
class DramState {
 public:
  explicit DramState(std::shared_ptr<const FaultModel> model);

  const FaultModel& model() const { return *model_; }

  // Equivalent to `count` single activations of `row`.
  void Activate(const RowCoord& row, uint64_t count = 1);
  // Ends the epoch: counters drop to zero, memory is kept.
  void Refresh();
  // Evaluates every cell against the current counters. Activate already does
  // this for the affected neighborhood, so this only reports flips that were
  // not realized yet.
  std::vector<FlipEvent> EvaluateFlips();

  uint8_t ReadByte(PhysAddr pa) const;
  void WriteByte(PhysAddr pa, uint8_t value);
  // Constant fills are stored lazily, so this is O(1).
  void FillFrame(Pfn pfn, uint8_t pattern);
  // True if every byte of the frame equals `pattern`.
  bool FrameMatches(Pfn pfn, uint8_t pattern) const;
  // Bytes of the frame; untouched memory reads as zero.
  std::vector<uint8_t> ReadFrame(Pfn pfn) const;
  void WriteFrame(Pfn pfn, std::span<const uint8_t> data);

  uint64_t ActivationCount(const RowCoord& row) const;
  uint64_t epoch() const { return epoch_; }
  const std::vector<FlipEvent>& flip_log() const { return log_; }

 private:
  bool Qualifies(const VulnerableCell& cell) const;
  uint64_t Counter(uint64_t bank_base, int64_t row) const;
  void EvaluateRow(uint64_t row_key, std::vector<FlipEvent>* fresh);
  void EvaluateCell(uint32_t index, std::vector<FlipEvent>* fresh);
  std::vector<uint8_t>& Page(Pfn pfn);

  std::shared_ptr<const FaultModel> model_;
  uint64_t page_size_;
  // Frames with individual byte contents.
  std::unordered_map<Pfn, std::vector<uint8_t>> pages_;
  // Frames holding one repeated byte; a frame is in at most one of the maps.
  std::unordered_map<Pfn, uint8_t> fills_;
  std::unordered_map<uint64_t, uint64_t> counters_;
  std::unordered_set<uint32_t> drawn_this_epoch_;
  uint64_t epoch_ = 0;
  std::vector<FlipEvent> log_;
};

}  // namespace catt

#endif  // CATT_FAULT_MODEL_H_
