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

// Blacklisting of vulnerable frames through the firmware memory map.
//
// The offline scan yields victim frames. They are turned into a Blacklist,
// folded into the memory map as reserved regions (the map may grow past the
// classic 128-entry limit) and the map is then applied to produce the frame
// availability consumed by the physical allocator.

#ifndef CATT_BCATT_H_
#define CATT_BCATT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "catt/dram_model.h"
#include "catt/fault_model.h"

namespace catt {

// Entry limit of the original firmware interface. Maps built here may exceed
// it.
inline constexpr size_t kLegacyMemoryMapEntries = 128;

enum class RegionKind { kUsable, kReserved };

std::string_view RegionKindName(RegionKind kind);

struct MemoryRegion {
  PhysAddr base = 0;
  uint64_t length = 0;
  RegionKind kind = RegionKind::kUsable;

  PhysAddr end() const { return base + length; }
  bool operator==(const MemoryRegion&) const = default;
};

struct Blacklist {
  // Sorted, unique.
  std::vector<Pfn> pfns;

  size_t size() const { return pfns.size(); }
  bool Contains(Pfn pfn) const;
  // Scan runs are combined by union.
  void Merge(const Blacklist& other);

  bool operator==(const Blacklist&) const = default;
};

// Sorted, non-overlapping and fully coalesced regions covering exactly
// [0, total_bytes).
class MemoryMap {
 public:
  static MemoryMap AllUsable(const DramGeometry& g);
  // Sorts and coalesces. Throws kInvalidArgument on empty regions, overlaps,
  // gaps or regions past total_bytes.
  static MemoryMap FromRegions(std::vector<MemoryRegion> regions,
                               uint64_t total_bytes);

  const std::vector<MemoryRegion>& regions() const { return regions_; }
  size_t entry_count() const { return regions_.size(); }
  // Entry count of the map this one was extended from.
  size_t original_entries() const { return original_entries_; }
  uint64_t total_bytes() const { return total_bytes_; }
  uint64_t BytesOfKind(RegionKind kind) const;

  bool operator==(const MemoryMap& other) const {
    return regions_ == other.regions_ && total_bytes_ == other.total_bytes_;
  }

 private:
  friend MemoryMap ExtendMap(const MemoryMap&, const Blacklist&,
                             const DramGeometry&);

  std::vector<MemoryRegion> regions_;
  uint64_t total_bytes_ = 0;
  size_t original_entries_ = 0;
};

// Sorts and deduplicates; throws kPfnOutOfRange for pfn >= total_frames.
Blacklist MakeBlacklist(std::vector<Pfn> pfns, uint64_t total_frames);

// Frames holding at least one vulnerable cell. With whole_rows every frame
// of a victim row is listed instead.
Blacklist DeriveBlacklist(const VulnerabilityProfile& profile,
                          const AddressMapper& mapper, bool whole_rows = false);

// Marks every blacklisted frame reserved. Throws kPfnOutOfRange.
MemoryMap ExtendMap(const MemoryMap& map, const Blacklist& blacklist,
                    const DramGeometry& g);

struct OverheadReport {
  uint64_t blacklisted = 0;
  uint64_t total_frames = 0;
  double fraction = 0.0;

  // Percentage with four decimals, e.g. "0.0063%".
  std::string Percent() const;
};

OverheadReport MakeOverheadReport(const Blacklist& blacklist,
                                  const DramGeometry& g);

// fraction * 100 with `decimals` digits and a trailing '%'.
std::string FormatPercent(double fraction, int decimals);
// 2097152 -> "2,097,152".
std::string FormatThousands(uint64_t value);

// Fixed-width table in the layout of the blacklisting overhead table.
std::string OverheadTable(const std::vector<std::pair<std::string,
                                                      OverheadReport>>& rows);

class FrameAvailability {
 public:
  FrameAvailability() = default;
  FrameAvailability(uint64_t frames, bool available)
      : bits_(frames, available) {}

  uint64_t frames() const { return bits_.size(); }
  bool available(Pfn pfn) const { return pfn < bits_.size() && bits_[pfn]; }
  void set(Pfn pfn, bool available) { bits_.at(pfn) = available; }
  uint64_t CountAvailable() const;

 private:
  std::vector<bool> bits_;
};

// A frame is available iff it lies entirely inside a usable region.
FrameAvailability ApplyMap(const MemoryMap& map, const DramGeometry& g);

// Memory-map file: JSON array of {"base": "0x...", "length": "0x...",
// "kind": "usable"|"reserved"}.
std::string MemoryMapToJson(const MemoryMap& map);
MemoryMap ParseMemoryMap(std::string_view json_text, const DramGeometry& g);

// Blacklist / victim file: ascending decimal PFNs, one per line.
std::string BlacklistToText(const Blacklist& blacklist);
// Throws kParseError on malformed lines and kPfnOutOfRange on large PFNs.
Blacklist ParseBlacklist(std::string_view text, uint64_t total_frames);

}  // namespace catt

#endif  // CATT_BCATT_H_
