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

#include "catt/fault_model.h"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "catt/digest.h"
#include "catt/error.h"
#include "catt/io.h"
#include "catt/rng.h"

namespace catt {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kCellFields[] = {
    "dimm",      "rank",        "bank",      "row",       "byte_offset",
    "bit",       "threshold",   "reliability", "sidedness",
};

uint64_t UnsignedField(const json& obj, const char* name) {
  if (!obj.contains(name) || !obj[name].is_number_unsigned()) {
    throw Error(ErrorCode::kParseError,
                std::string("profile: missing or invalid ") + name);
  }
  return obj[name].get<uint64_t>();
}

Sidedness ParseSidedness(const std::string& s) {
  if (s == SidednessName(Sidedness::kDoubleRequired)) {
    return Sidedness::kDoubleRequired;
  }
  if (s == SidednessName(Sidedness::kSingleSufficient)) {
    return Sidedness::kSingleSufficient;
  }
  throw Error(ErrorCode::kParseError, "profile: unknown sidedness " + s);
}

}  // namespace

std::string_view SidednessName(Sidedness s) {
  switch (s) {
    case Sidedness::kDoubleRequired: return "double-required";
    case Sidedness::kSingleSufficient: return "single-sufficient";
  }
  return "unknown";
}

void NormalizeProfile(VulnerabilityProfile& profile) {
  auto& cells = profile.cells;
  for (const auto& c : cells) {
    if (c.bit > 7) throw Error(ErrorCode::kParseError, "profile: bit > 7");
    if (c.threshold == 0) {
      throw Error(ErrorCode::kParseError, "profile: threshold must be >= 1");
    }
    if (!(c.reliability > 0.0 && c.reliability <= 1.0)) {
      throw Error(ErrorCode::kParseError,
                  "profile: reliability must be in (0, 1]");
    }
  }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.key() < b.key(); });
  auto dup = std::adjacent_find(
      cells.begin(), cells.end(),
      [](const auto& a, const auto& b) { return a.key() == b.key(); });
  if (dup != cells.end()) {
    throw Error(ErrorCode::kParseError, "profile: duplicate cell");
  }
}

void CheckProfileBinding(const VulnerabilityProfile& profile,
                         const AddressMapper& mapper) {
  if (profile.geometry_digest != mapper.Digest()) {
    throw Error(ErrorCode::kDigestMismatch,
                "profile digest " + profile.geometry_digest +
                    " does not match geometry " + mapper.Digest());
  }
  for (const auto& c : profile.cells) {
    if (!mapper.IsValid(c.location) ||
        c.byte_offset >= mapper.geometry().row_bytes()) {
      throw Error(ErrorCode::kGeometryMismatch,
                  "profile cell outside the geometry");
    }
  }
}

VulnerabilityProfile ParseProfile(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("profile: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("geometry_digest") ||
      !doc["geometry_digest"].is_string() || !doc.contains("cells") ||
      !doc["cells"].is_array() || doc.size() != 2) {
    throw Error(ErrorCode::kParseError,
                "profile: expected {geometry_digest, cells}");
  }
  VulnerabilityProfile p;
  p.geometry_digest = doc["geometry_digest"].get<std::string>();
  const std::set<std::string> known(std::begin(kCellFields),
                                    std::end(kCellFields));
  for (const auto& c : doc["cells"]) {
    if (!c.is_object()) throw Error(ErrorCode::kParseError, "profile: cell");
    for (const auto& [key, value] : c.items()) {
      if (!known.count(key)) {
        throw Error(ErrorCode::kParseError, "profile: unknown field " + key);
      }
    }
    VulnerableCell cell;
    cell.location.bank.dimm = UnsignedField(c, "dimm");
    cell.location.bank.rank = UnsignedField(c, "rank");
    cell.location.bank.bank = UnsignedField(c, "bank");
    cell.location.row = UnsignedField(c, "row");
    cell.byte_offset = UnsignedField(c, "byte_offset");
    const uint64_t bit = UnsignedField(c, "bit");
    if (bit > 7) throw Error(ErrorCode::kParseError, "profile: bit > 7");
    cell.bit = static_cast<unsigned>(bit);
    cell.threshold = UnsignedField(c, "threshold");
    if (!c.contains("reliability") || !c["reliability"].is_number()) {
      throw Error(ErrorCode::kParseError, "profile: invalid reliability");
    }
    cell.reliability = c["reliability"].get<double>();
    if (!c.contains("sidedness") || !c["sidedness"].is_string()) {
      throw Error(ErrorCode::kParseError, "profile: invalid sidedness");
    }
    cell.sidedness = ParseSidedness(c["sidedness"].get<std::string>());
    p.cells.push_back(cell);
  }
  NormalizeProfile(p);
  return p;
}

std::string ProfileToJson(const VulnerabilityProfile& profile) {
  ordered_json doc;
  doc["geometry_digest"] = profile.geometry_digest;
  doc["cells"] = ordered_json::array();
  for (const auto& c : profile.cells) {
    ordered_json j;
    j["dimm"] = c.location.bank.dimm;
    j["rank"] = c.location.bank.rank;
    j["bank"] = c.location.bank.bank;
    j["row"] = c.location.row;
    j["byte_offset"] = c.byte_offset;
    j["bit"] = c.bit;
    j["threshold"] = c.threshold;
    j["reliability"] = c.reliability;
    j["sidedness"] = SidednessName(c.sidedness);
    doc["cells"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string ProfileDigest(const VulnerabilityProfile& profile) {
  return HexDigest(Fnv1a64(ProfileToJson(profile)));
}

VulnerabilityProfile LoadProfile(const std::string& path,
                                 const AddressMapper& mapper) {
  VulnerabilityProfile p = ParseProfile(ReadTextFile(path));
  CheckProfileBinding(p, mapper);
  return p;
}

void StoreProfile(const VulnerabilityProfile& profile,
                  const std::string& path) {
  WriteTextFile(path, ProfileToJson(profile));
}

VulnerabilityProfile ScaleThresholds(const VulnerabilityProfile& profile,
                                     uint64_t num, uint64_t den) {
  if (den == 0) throw Error(ErrorCode::kInvalidArgument, "zero denominator");
  VulnerabilityProfile out = profile;
  for (auto& c : out.cells) {
    c.threshold = std::max<uint64_t>(
        1, static_cast<uint64_t>(
               static_cast<unsigned __int128>(c.threshold) * num / den));
  }
  return out;
}

VulnerabilityProfile GenerateProfile(const AddressMapper& mapper,
                                     const ProfileRecipe& recipe) {
  const DramGeometry& g = mapper.geometry();
  if (g.rows_per_bank < 3) {
    throw Error(ErrorCode::kInvalidArgument, "need at least 3 rows per bank");
  }
  const uint64_t total = g.total_frames();
  const uint64_t eligible_upper =
      total > recipe.min_frame ? total - recipe.min_frame : 0;
  if (recipe.victim_frames > eligible_upper) {
    throw Error(ErrorCode::kInvalidArgument, "too many victim frames");
  }
  VulnerabilityProfile p;
  p.geometry_digest = mapper.Digest();
  Rng rng(recipe.seed);
  std::set<Pfn> chosen;
  // Bounded so an impossible request cannot spin forever.
  uint64_t budget = 64 * (recipe.victim_frames + 16);
  while (chosen.size() < recipe.victim_frames) {
    if (budget-- == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "could not place the requested victim frames");
    }
    const Pfn pfn = recipe.min_frame + rng.Uniform(eligible_upper);
    const DramLocation loc = mapper.Decode(pfn * g.page_size);
    if (loc.row == 0 || loc.row + 1 == g.rows_per_bank) continue;
    if (!chosen.insert(pfn).second) continue;
    VulnerableCell cell;
    cell.location = loc.row_coord();
    cell.byte_offset = loc.offset + rng.Uniform(g.page_size);
    cell.bit = static_cast<unsigned>(rng.Uniform(8));
    cell.threshold = recipe.threshold;
    cell.reliability = recipe.reliability;
    cell.sidedness = recipe.sidedness;
    p.cells.push_back(cell);
  }
  NormalizeProfile(p);
  return p;
}

FaultModel::FaultModel(AddressMapper mapper, VulnerabilityProfile profile,
                       FaultParams params)
    : mapper_(std::move(mapper)),
      profile_(std::move(profile)),
      params_(params) {
  if (params_.blast_radius < 1 || params_.blast_radius > kMaxBlastRadius) {
    throw Error(ErrorCode::kInvalidArgument, "blast radius must be 1 or 2");
  }
  NormalizeProfile(profile_);
  CheckProfileBinding(profile_, mapper_);
  cell_addr_.reserve(profile_.cells.size());
  for (uint32_t i = 0; i < profile_.cells.size(); ++i) {
    const auto& c = profile_.cells[i];
    by_row_[RowKey(c.location)].push_back(i);
    const DramLocation loc{c.location.bank.dimm, c.location.bank.rank,
                           c.location.bank.bank, c.location.row,
                           c.byte_offset};
    cell_addr_.push_back(mapper_.Encode(loc));
  }
}

uint64_t FaultModel::RowKey(const RowCoord& row) const {
  return mapper_.BankIndex(row.bank) * mapper_.geometry().rows_per_bank +
         row.row;
}

RowCoord FaultModel::RowFromKey(uint64_t key) const {
  const uint64_t rows = mapper_.geometry().rows_per_bank;
  return {mapper_.BankFromIndex(key / rows), key % rows};
}

std::span<const uint32_t> FaultModel::CellsInRow(uint64_t row_key) const {
  auto it = by_row_.find(row_key);
  if (it == by_row_.end()) return {};
  return it->second;
}

PhysAddr FaultModel::CellAddress(size_t cell_index) const {
  return cell_addr_.at(cell_index);
}

DramState::DramState(std::shared_ptr<const FaultModel> model)
    : model_(std::move(model)),
      page_size_(model_->mapper().geometry().page_size) {}

void DramState::Activate(const RowCoord& row, uint64_t count) {
  if (!model_->mapper().IsValid(row)) {
    throw Error(ErrorCode::kLocationOutOfRange, "row coordinates out of range");
  }
  if (count == 0) return;
  const uint64_t key = model_->RowKey(row);
  counters_[key] += count;
  const int64_t radius = model_->params().blast_radius;
  const int64_t rows = static_cast<int64_t>(model_->mapper().geometry().rows_per_bank);
  const int64_t r = static_cast<int64_t>(row.row);
  std::vector<FlipEvent> fresh;
  for (int64_t d = -radius; d <= radius; ++d) {
    if (d == 0 || r + d < 0 || r + d >= rows) continue;
    EvaluateRow(key + d, &fresh);
  }
}

void DramState::Refresh() {
  counters_.clear();
  drawn_this_epoch_.clear();
  ++epoch_;
}

std::vector<FlipEvent> DramState::EvaluateFlips() {
  std::vector<FlipEvent> fresh;
  const auto& cells = model_->profile().cells;
  for (uint32_t i = 0; i < cells.size(); ++i) EvaluateCell(i, &fresh);
  return fresh;
}

uint64_t DramState::Counter(uint64_t bank_base, int64_t row) const {
  const int64_t rows = static_cast<int64_t>(model_->mapper().geometry().rows_per_bank);
  if (row < 0 || row >= rows) return 0;
  auto it = counters_.find(bank_base + static_cast<uint64_t>(row));
  return it == counters_.end() ? 0 : it->second;
}

bool DramState::Qualifies(const VulnerableCell& cell) const {
  const uint64_t base = model_->RowKey({cell.location.bank, 0});
  const int64_t r = static_cast<int64_t>(cell.location.row);
  const int64_t radius = model_->params().blast_radius;
  bool below = false;
  bool above = false;
  for (int64_t d = 1; d <= radius; ++d) {
    below = below || Counter(base, r - d) >= cell.threshold;
    above = above || Counter(base, r + d) >= cell.threshold;
  }
  if (cell.sidedness == Sidedness::kDoubleRequired) return below && above;
  return below || above;
}

void DramState::EvaluateRow(uint64_t row_key, std::vector<FlipEvent>* fresh) {
  for (uint32_t index : model_->CellsInRow(row_key)) EvaluateCell(index, fresh);
}

void DramState::EvaluateCell(uint32_t index, std::vector<FlipEvent>* fresh) {
  if (drawn_this_epoch_.count(index)) return;
  const VulnerableCell& cell = model_->profile().cells[index];
  if (!Qualifies(cell)) return;
  drawn_this_epoch_.insert(index);
  const uint64_t draw = HashWords(model_->params().seed, index, epoch_);
  if (ToUnitInterval(draw) >= cell.reliability) return;
  const PhysAddr pa = model_->CellAddress(index);
  WriteByte(pa, ReadByte(pa) ^ static_cast<uint8_t>(1u << cell.bit));
  FlipEvent ev{pa, cell.bit, epoch_};
  log_.push_back(ev);
  fresh->push_back(ev);
}

std::vector<uint8_t>& DramState::Page(Pfn pfn) {
  auto [it, inserted] = pages_.try_emplace(pfn);
  if (inserted) {
    uint8_t fill = 0;
    if (auto f = fills_.find(pfn); f != fills_.end()) {
      fill = f->second;
      fills_.erase(f);
    }
    it->second.assign(page_size_, fill);
  }
  return it->second;
}

uint8_t DramState::ReadByte(PhysAddr pa) const {
  const Pfn pfn = pa / page_size_;
  if (auto it = pages_.find(pfn); it != pages_.end()) {
    return it->second[pa % page_size_];
  }
  auto f = fills_.find(pfn);
  return f == fills_.end() ? 0 : f->second;
}

void DramState::WriteByte(PhysAddr pa, uint8_t value) {
  if (pa >= model_->mapper().geometry().total_bytes()) {
    throw Error(ErrorCode::kAddressOutOfRange, "write beyond memory");
  }
  Page(pa / page_size_)[pa % page_size_] = value;
}

void DramState::FillFrame(Pfn pfn, uint8_t pattern) {
  if (pfn >= model_->mapper().geometry().total_frames()) {
    throw Error(ErrorCode::kPfnOutOfRange, "frame beyond memory");
  }
  pages_.erase(pfn);
  if (pattern == 0) {
    fills_.erase(pfn);
  } else {
    fills_[pfn] = pattern;
  }
}

bool DramState::FrameMatches(Pfn pfn, uint8_t pattern) const {
  if (auto it = pages_.find(pfn); it != pages_.end()) {
    return std::all_of(it->second.begin(), it->second.end(),
                       [&](uint8_t b) { return b == pattern; });
  }
  auto f = fills_.find(pfn);
  return (f == fills_.end() ? 0 : f->second) == pattern;
}

std::vector<uint8_t> DramState::ReadFrame(Pfn pfn) const {
  if (auto it = pages_.find(pfn); it != pages_.end()) return it->second;
  auto f = fills_.find(pfn);
  return std::vector<uint8_t>(page_size_, f == fills_.end() ? 0 : f->second);
}

void DramState::WriteFrame(Pfn pfn, std::span<const uint8_t> data) {
  if (pfn >= model_->mapper().geometry().total_frames()) {
    throw Error(ErrorCode::kPfnOutOfRange, "frame beyond memory");
  }
  if (data.size() != page_size_) {
    throw Error(ErrorCode::kInvalidArgument, "frame data must be one page");
  }
  auto& page = Page(pfn);
  std::copy(data.begin(), data.end(), page.begin());
}

uint64_t DramState::ActivationCount(const RowCoord& row) const {
  auto it = counters_.find(model_->RowKey(row));
  return it == counters_.end() ? 0 : it->second;
}

}  // namespace catt
