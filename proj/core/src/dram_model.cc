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

#include "catt/dram_model.h"

#include <algorithm>
#include <bit>
#include <set>

#include <nlohmann/json.hpp>

#include "catt/digest.h"
#include "catt/error.h"
#include "catt/io.h"

namespace catt {
namespace {

using nlohmann::json;

constexpr const char* kGeometryFields[] = {
    "page_size",      "pages_per_row", "banks_per_rank", "ranks_per_dimm",
    "dimms",          "rows_per_bank", "channels",
};

unsigned Log2Exact(uint64_t v) { return std::countr_zero(v); }

}  // namespace

DramGeometry DramGeometry::Ddr3(uint64_t dimms) {
  DramGeometry g;
  g.dimms = dimms;
  return g;
}

DramGeometry DramGeometry::Ddr4(uint64_t dimms) {
  DramGeometry g = Ddr3(dimms);
  g.banks_per_rank *= 2;
  return g;
}

void DramGeometry::Validate() const {
  const uint64_t fields[] = {page_size,      pages_per_row, banks_per_rank,
                             ranks_per_dimm, dimms,         rows_per_bank,
                             channels};
  for (uint64_t f : fields) {
    if (f == 0) throw Error(ErrorCode::kInvalidArgument, "geometry field is 0");
  }
  if (!std::has_single_bit(page_size)) {
    throw Error(ErrorCode::kInvalidArgument, "page_size not a power of two");
  }
  if (channels != 1) {
    throw Error(ErrorCode::kInvalidArgument, "only one channel is modeled");
  }
  uint64_t product = 1;
  for (uint64_t f : fields) {
    if (__builtin_mul_overflow(product, f, &product)) {
      throw Error(ErrorCode::kInvalidArgument, "total_bytes overflows");
    }
  }
}

std::string_view SchemeName(SchemeId id) {
  switch (id) {
    case SchemeId::kLinearRowgroup: return "linear-rowgroup";
    case SchemeId::kCustomBitSwizzle: return "custom-bit-swizzle";
  }
  return "unknown";
}

MappingScheme MappingScheme::BitSwizzle(std::vector<unsigned> table) {
  MappingScheme m;
  m.id_ = SchemeId::kCustomBitSwizzle;
  m.table_ = std::move(table);
  return m;
}

MappingScheme MappingScheme::IvyBridgeRank20(const DramGeometry& g) {
  g.Validate();
  const uint64_t total = g.total_bytes();
  if (!std::has_single_bit(total) || !std::has_single_bit(g.row_bytes()) ||
      !std::has_single_bit(g.banks_per_rank) || g.ranks_per_dimm < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "rank-bit-20 preset needs a power-of-two multi-rank geometry");
  }
  const unsigned bits = Log2Exact(total);
  const unsigned rank_bit = Log2Exact(g.row_bytes() * g.banks_per_rank);
  if (bits <= 20 || rank_bit == 20) {
    throw Error(ErrorCode::kInvalidArgument,
                "geometry too small for the rank-bit-20 preset");
  }
  std::vector<unsigned> table(bits);
  for (unsigned i = 0; i < bits; ++i) table[i] = i;
  std::swap(table[rank_bit], table[20]);
  return BitSwizzle(std::move(table));
}

uint64_t RowIndex(PhysAddr pa, const DramGeometry& g) {
  if (pa >= g.total_bytes()) {
    throw Error(ErrorCode::kAddressOutOfRange, "physical address beyond memory");
  }
  return pa / (g.page_size * g.pages_per_dimm() * g.dimms);
}

AddressMapper::AddressMapper(DramGeometry g, MappingScheme scheme)
    : geometry_(g), scheme_(std::move(scheme)) {
  geometry_.Validate();
  if (scheme_.id() == SchemeId::kLinearRowgroup) return;

  const uint64_t total = geometry_.total_bytes();
  if (!std::has_single_bit(total)) {
    throw Error(ErrorCode::kInvalidArgument,
                "bit swizzle requires a power-of-two memory size");
  }
  const unsigned bits = Log2Exact(total);
  const auto& table = scheme_.table();
  if (table.size() != bits) {
    throw Error(ErrorCode::kInvalidArgument,
                "swizzle table must have one entry per address bit");
  }
  inverse_.assign(bits, bits);
  for (unsigned i = 0; i < bits; ++i) {
    if (table[i] >= bits || inverse_[table[i]] != bits) {
      throw Error(ErrorCode::kInvalidArgument,
                  "swizzle table is not a permutation");
    }
    inverse_[table[i]] = i;
  }
  const unsigned page_bits = Log2Exact(geometry_.page_size);
  for (unsigned i = 0; i < page_bits; ++i) {
    if (table[i] != i) {
      throw Error(ErrorCode::kInvalidArgument,
                  "swizzle table must keep page-offset bits in place");
    }
  }
}

PhysAddr AddressMapper::ToLinear(PhysAddr pa) const {
  if (scheme_.id() == SchemeId::kLinearRowgroup) return pa;
  const auto& table = scheme_.table();
  PhysAddr out = 0;
  for (unsigned i = 0; i < table.size(); ++i) {
    out |= ((pa >> table[i]) & 1) << i;
  }
  return out;
}

PhysAddr AddressMapper::FromLinear(PhysAddr linear) const {
  if (scheme_.id() == SchemeId::kLinearRowgroup) return linear;
  const auto& table = scheme_.table();
  PhysAddr out = 0;
  for (unsigned i = 0; i < table.size(); ++i) {
    out |= ((linear >> i) & 1) << table[i];
  }
  return out;
}

DramLocation AddressMapper::Decode(PhysAddr pa) const {
  const DramGeometry& g = geometry_;
  if (pa >= g.total_bytes()) {
    throw Error(ErrorCode::kAddressOutOfRange, "physical address beyond memory");
  }
  const PhysAddr lin = ToLinear(pa);
  const uint64_t rem = lin % g.rowgroup_bytes();
  const uint64_t bank_linear = rem / g.row_bytes();
  DramLocation loc;
  loc.row = lin / g.rowgroup_bytes();
  loc.offset = rem % g.row_bytes();
  loc.bank = bank_linear % g.banks_per_rank;
  loc.rank = (bank_linear / g.banks_per_rank) % g.ranks_per_dimm;
  loc.dimm = bank_linear / (g.banks_per_rank * g.ranks_per_dimm);
  return loc;
}

PhysAddr AddressMapper::Encode(const DramLocation& loc) const {
  if (!IsValid(loc)) {
    throw Error(ErrorCode::kLocationOutOfRange, "DRAM location out of range");
  }
  const DramGeometry& g = geometry_;
  const PhysAddr lin = loc.row * g.rowgroup_bytes() +
                       BankIndex(loc.bank_coord()) * g.row_bytes() + loc.offset;
  return FromLinear(lin);
}

std::vector<Pfn> AddressMapper::FramesInRow(const RowCoord& row) const {
  if (!IsValid(row)) {
    throw Error(ErrorCode::kLocationOutOfRange, "row coordinates out of range");
  }
  std::vector<Pfn> frames;
  frames.reserve(geometry_.pages_per_row);
  for (uint64_t i = 0; i < geometry_.pages_per_row; ++i) {
    DramLocation loc{row.bank.dimm, row.bank.rank, row.bank.bank, row.row,
                     i * geometry_.page_size};
    frames.push_back(Encode(loc) / geometry_.page_size);
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

RowCoord AddressMapper::RowOfFrame(Pfn pfn) const {
  if (pfn >= geometry_.total_frames()) {
    throw Error(ErrorCode::kPfnOutOfRange, "frame beyond memory");
  }
  return Decode(pfn * geometry_.page_size).row_coord();
}

uint64_t AddressMapper::BankIndex(const BankCoord& b) const {
  return (b.dimm * geometry_.ranks_per_dimm + b.rank) *
             geometry_.banks_per_rank +
         b.bank;
}

BankCoord AddressMapper::BankFromIndex(uint64_t index) const {
  const DramGeometry& g = geometry_;
  return {index / (g.banks_per_rank * g.ranks_per_dimm),
          (index / g.banks_per_rank) % g.ranks_per_dimm,
          index % g.banks_per_rank};
}

bool AddressMapper::IsValid(const RowCoord& row) const {
  const DramGeometry& g = geometry_;
  return row.bank.dimm < g.dimms && row.bank.rank < g.ranks_per_dimm &&
         row.bank.bank < g.banks_per_rank && row.row < g.rows_per_bank;
}

bool AddressMapper::IsValid(const DramLocation& loc) const {
  return IsValid(loc.row_coord()) && loc.offset < geometry_.row_bytes();
}

std::string AddressMapper::Digest() const {
  return HexDigest(Fnv1a64(GeometryConfigToJson(*this)));
}

AddressMapper ParseGeometryConfig(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("geometry: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kParseError, "geometry: expected an object");
  }
  std::set<std::string> known(std::begin(kGeometryFields),
                              std::end(kGeometryFields));
  known.insert("scheme_id");
  known.insert("swizzle_table");
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) {
      throw Error(ErrorCode::kParseError, "geometry: unknown field " + key);
    }
  }
  auto field = [&](const char* name) -> uint64_t {
    if (!doc.contains(name) || !doc[name].is_number_unsigned()) {
      throw Error(ErrorCode::kParseError,
                  std::string("geometry: missing or invalid ") + name);
    }
    return doc[name].get<uint64_t>();
  };
  DramGeometry g;
  g.page_size = field("page_size");
  g.pages_per_row = field("pages_per_row");
  g.banks_per_rank = field("banks_per_rank");
  g.ranks_per_dimm = field("ranks_per_dimm");
  g.dimms = field("dimms");
  g.rows_per_bank = field("rows_per_bank");
  g.channels = field("channels");

  if (!doc.contains("scheme_id") || !doc["scheme_id"].is_string()) {
    throw Error(ErrorCode::kParseError, "geometry: missing scheme_id");
  }
  const std::string scheme_id = doc["scheme_id"].get<std::string>();
  MappingScheme scheme = MappingScheme::LinearRowgroup();
  if (scheme_id == SchemeName(SchemeId::kCustomBitSwizzle)) {
    if (!doc.contains("swizzle_table") || !doc["swizzle_table"].is_array()) {
      throw Error(ErrorCode::kParseError, "geometry: missing swizzle_table");
    }
    std::vector<unsigned> table;
    for (const auto& v : doc["swizzle_table"]) {
      if (!v.is_number_unsigned()) {
        throw Error(ErrorCode::kParseError, "geometry: bad swizzle entry");
      }
      table.push_back(v.get<unsigned>());
    }
    scheme = MappingScheme::BitSwizzle(std::move(table));
  } else if (scheme_id != SchemeName(SchemeId::kLinearRowgroup)) {
    throw Error(ErrorCode::kParseError, "geometry: unknown scheme " + scheme_id);
  } else if (doc.contains("swizzle_table")) {
    throw Error(ErrorCode::kParseError,
                "geometry: swizzle_table given for linear scheme");
  }
  try {
    return AddressMapper(g, std::move(scheme));
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

AddressMapper LoadGeometryConfig(const std::string& path) {
  return ParseGeometryConfig(ReadTextFile(path));
}

std::string GeometryConfigToJson(const AddressMapper& mapper) {
  const DramGeometry& g = mapper.geometry();
  // ordered_json keeps the field order stable for digests and golden files.
  nlohmann::ordered_json doc;
  doc["page_size"] = g.page_size;
  doc["pages_per_row"] = g.pages_per_row;
  doc["banks_per_rank"] = g.banks_per_rank;
  doc["ranks_per_dimm"] = g.ranks_per_dimm;
  doc["dimms"] = g.dimms;
  doc["rows_per_bank"] = g.rows_per_bank;
  doc["channels"] = g.channels;
  doc["scheme_id"] = SchemeName(mapper.scheme().id());
  if (mapper.scheme().id() == SchemeId::kCustomBitSwizzle) {
    doc["swizzle_table"] = mapper.scheme().table();
  }
  return doc.dump(2) + "\n";
}

}  // namespace catt
