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

// Simulated DRAM organization and the translation between physical addresses
// and (dimm, rank, bank, row, offset) coordinates.
//
// The default "linear-rowgroup" scheme places rows in the most significant
// position: one row group holds the same row index of every bank of every
// rank and DIMM, so the row of an address is
//
//   row = pa / (page_size * pages_per_dimm * dimms)
//
// with pages_per_dimm = pages_per_row * banks_per_rank * ranks_per_dimm.
// Below the row, consecutive row-sized chunks walk banks first, then ranks,
// then DIMMs.

#ifndef CATT_DRAM_MODEL_H_
#define CATT_DRAM_MODEL_H_

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace catt {

using PhysAddr = uint64_t;
using Pfn = uint64_t;

struct DramGeometry {
  uint64_t page_size = 4096;
  uint64_t pages_per_row = 2;
  uint64_t banks_per_rank = 8;
  uint64_t ranks_per_dimm = 2;
  uint64_t dimms = 1;
  uint64_t rows_per_bank = uint64_t{1} << 15;
  // Reserved; only a single channel is modeled.
  uint64_t channels = 1;

  // Common DDR3 layout on x86: 4 KiB pages, 2 pages per row, 8 banks per
  // rank, 2 ranks per DIMM, 2^15 rows per bank.
  static DramGeometry Ddr3(uint64_t dimms = 1);
  // Same as Ddr3 with twice the banks per rank.
  static DramGeometry Ddr4(uint64_t dimms = 1);

  uint64_t pages_per_dimm() const {
    return pages_per_row * banks_per_rank * ranks_per_dimm;
  }
  uint64_t row_bytes() const { return page_size * pages_per_row; }
  // Bytes covering one row index across all banks, ranks and DIMMs.
  uint64_t rowgroup_bytes() const {
    return page_size * pages_per_dimm() * dimms;
  }
  uint64_t total_banks() const {
    return banks_per_rank * ranks_per_dimm * dimms;
  }
  uint64_t total_bytes() const { return rowgroup_bytes() * rows_per_bank; }
  uint64_t total_frames() const { return total_bytes() / page_size; }

  // Throws Error(kInvalidArgument) on zero fields, non power-of-two page
  // size, channels != 1 or overflow of total_bytes.
  void Validate() const;

  bool operator==(const DramGeometry&) const = default;
};

struct BankCoord {
  uint64_t dimm = 0;
  uint64_t rank = 0;
  uint64_t bank = 0;

  auto operator<=>(const BankCoord&) const = default;
};

struct RowCoord {
  BankCoord bank;
  uint64_t row = 0;

  auto operator<=>(const RowCoord&) const = default;
};

struct DramLocation {
  uint64_t dimm = 0;
  uint64_t rank = 0;
  uint64_t bank = 0;
  uint64_t row = 0;
  // Byte offset inside the row.
  uint64_t offset = 0;

  BankCoord bank_coord() const { return {dimm, rank, bank}; }
  RowCoord row_coord() const { return {bank_coord(), row}; }

  auto operator<=>(const DramLocation&) const = default;
};

enum class SchemeId { kLinearRowgroup, kCustomBitSwizzle };

std::string_view SchemeName(SchemeId id);

class MappingScheme {
 public:
  static MappingScheme LinearRowgroup() { return MappingScheme(); }

  // Bit i of the linear-rowgroup address is taken from physical address bit
  // table[i]. The table must be a permutation of [0, log2(total_bytes)) that
  // leaves the page-offset bits in place.
  static MappingScheme BitSwizzle(std::vector<unsigned> table);

  // Puts physical bit 20 in the rank position of the linear layout (and the
  // displaced bit where bit 20 was), the behavior known from Ivy Bridge
  // memory controllers. Requires a power-of-two geometry with more than one
  // rank.
  static MappingScheme IvyBridgeRank20(const DramGeometry& g);

  SchemeId id() const { return id_; }
  const std::vector<unsigned>& table() const { return table_; }

  bool operator==(const MappingScheme&) const = default;

 private:
  MappingScheme() = default;

  SchemeId id_ = SchemeId::kLinearRowgroup;
  std::vector<unsigned> table_;
};

// Floor of pa / (page_size * pages_per_dimm * dimms). Throws
// Error(kAddressOutOfRange) if pa >= total_bytes.
uint64_t RowIndex(PhysAddr pa, const DramGeometry& g);

// Immutable address translator for one (geometry, scheme) pair. Safe to
// share between threads.
class AddressMapper {
 public:
  explicit AddressMapper(DramGeometry g,
                         MappingScheme scheme = MappingScheme::LinearRowgroup());

  const DramGeometry& geometry() const { return geometry_; }
  const MappingScheme& scheme() const { return scheme_; }

  DramLocation Decode(PhysAddr pa) const;
  PhysAddr Encode(const DramLocation& loc) const;

  // The page frames that make up one row, ascending.
  std::vector<Pfn> FramesInRow(const RowCoord& row) const;
  RowCoord RowOfFrame(Pfn pfn) const;

  // Dense bank numbering in [0, total_banks).
  uint64_t BankIndex(const BankCoord& bank) const;
  BankCoord BankFromIndex(uint64_t index) const;

  bool IsValid(const RowCoord& row) const;
  bool IsValid(const DramLocation& loc) const;

  // Binds profiles and results to this exact machine layout.
  std::string Digest() const;

 private:
  PhysAddr ToLinear(PhysAddr pa) const;
  PhysAddr FromLinear(PhysAddr linear) const;

  DramGeometry geometry_;
  MappingScheme scheme_;
  // Inverse of scheme_.table(); empty for the linear scheme.
  std::vector<unsigned> inverse_;
};

// Geometry config file: a JSON object with the seven geometry fields and
// scheme_id ("linear-rowgroup" or "custom-bit-swizzle"). The swizzle scheme
// additionally needs "swizzle_table". Unknown fields are rejected.
AddressMapper ParseGeometryConfig(std::string_view json_text);
AddressMapper LoadGeometryConfig(const std::string& path);
std::string GeometryConfigToJson(const AddressMapper& mapper);

}  // namespace catt

#endif  // CATT_DRAM_MODEL_H_
