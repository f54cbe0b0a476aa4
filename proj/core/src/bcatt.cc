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

#include "catt/bcatt.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "catt/error.h"

namespace catt {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string Hex(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t ParseHex(const json& v, const char* what) {
  if (!v.is_string()) {
    throw Error(ErrorCode::kParseError, std::string("memory map: ") + what);
  }
  const std::string s = v.get<std::string>();
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) {
    throw Error(ErrorCode::kParseError, "memory map: expected hex " + s);
  }
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), out, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError, "memory map: bad hex " + s);
  }
  return out;
}

struct Interval {
  uint64_t begin;
  uint64_t end;
};

// Sorted, merged union of intervals.
std::vector<Interval> MergeIntervals(std::vector<Interval> in) {
  std::sort(in.begin(), in.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::vector<Interval> out;
  for (const auto& iv : in) {
    if (!out.empty() && iv.begin <= out.back().end) {
      out.back().end = std::max(out.back().end, iv.end);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

}  // namespace

std::string_view RegionKindName(RegionKind kind) {
  return kind == RegionKind::kUsable ? "usable" : "reserved";
}

MemoryMap MemoryMap::AllUsable(const DramGeometry& g) {
  return FromRegions({{0, g.total_bytes(), RegionKind::kUsable}},
                     g.total_bytes());
}

MemoryMap MemoryMap::FromRegions(std::vector<MemoryRegion> regions,
                                 uint64_t total_bytes) {
  std::sort(regions.begin(), regions.end(),
            [](const auto& a, const auto& b) { return a.base < b.base; });
  MemoryMap map;
  map.total_bytes_ = total_bytes;
  map.original_entries_ = regions.size();
  uint64_t cursor = 0;
  for (const auto& r : regions) {
    if (r.length == 0) {
      throw Error(ErrorCode::kInvalidArgument, "empty memory region");
    }
    if (r.base != cursor) {
      throw Error(ErrorCode::kInvalidArgument,
                  r.base < cursor ? "overlapping memory regions"
                                  : "gap in memory map at " + Hex(cursor));
    }
    if (r.length > total_bytes - r.base) {
      throw Error(ErrorCode::kInvalidArgument, "region beyond memory");
    }
    if (!map.regions_.empty() && map.regions_.back().kind == r.kind) {
      map.regions_.back().length += r.length;
    } else {
      map.regions_.push_back(r);
    }
    cursor = r.end();
  }
  if (cursor != total_bytes) {
    throw Error(ErrorCode::kInvalidArgument, "memory map does not cover memory");
  }
  return map;
}

uint64_t MemoryMap::BytesOfKind(RegionKind kind) const {
  uint64_t sum = 0;
  for (const auto& r : regions_) {
    if (r.kind == kind) sum += r.length;
  }
  return sum;
}

bool Blacklist::Contains(Pfn pfn) const {
  return std::binary_search(pfns.begin(), pfns.end(), pfn);
}

void Blacklist::Merge(const Blacklist& other) {
  std::vector<Pfn> out;
  out.reserve(pfns.size() + other.pfns.size());
  std::set_union(pfns.begin(), pfns.end(), other.pfns.begin(),
                 other.pfns.end(), std::back_inserter(out));
  pfns = std::move(out);
}

Blacklist MakeBlacklist(std::vector<Pfn> pfns, uint64_t total_frames) {
  std::sort(pfns.begin(), pfns.end());
  pfns.erase(std::unique(pfns.begin(), pfns.end()), pfns.end());
  if (!pfns.empty() && pfns.back() >= total_frames) {
    throw Error(ErrorCode::kPfnOutOfRange,
                "pfn " + std::to_string(pfns.back()) + " beyond memory");
  }
  return Blacklist{std::move(pfns)};
}

Blacklist DeriveBlacklist(const VulnerabilityProfile& profile,
                          const AddressMapper& mapper, bool whole_rows) {
  CheckProfileBinding(profile, mapper);
  const DramGeometry& g = mapper.geometry();
  std::vector<Pfn> pfns;
  for (const auto& c : profile.cells) {
    if (whole_rows) {
      for (Pfn f : mapper.FramesInRow(c.location)) pfns.push_back(f);
    } else {
      const DramLocation loc{c.location.bank.dimm, c.location.bank.rank,
                             c.location.bank.bank, c.location.row,
                             c.byte_offset};
      pfns.push_back(mapper.Encode(loc) / g.page_size);
    }
  }
  return MakeBlacklist(std::move(pfns), g.total_frames());
}

MemoryMap ExtendMap(const MemoryMap& map, const Blacklist& blacklist,
                    const DramGeometry& g) {
  if (map.total_bytes() != g.total_bytes()) {
    throw Error(ErrorCode::kGeometryMismatch, "memory map size != geometry");
  }
  std::vector<Interval> reserved;
  for (const auto& r : map.regions()) {
    if (r.kind == RegionKind::kReserved) reserved.push_back({r.base, r.end()});
  }
  for (Pfn pfn : blacklist.pfns) {
    if (pfn >= g.total_frames()) {
      throw Error(ErrorCode::kPfnOutOfRange,
                  "pfn " + std::to_string(pfn) + " beyond memory");
    }
    reserved.push_back({pfn * g.page_size, (pfn + 1) * g.page_size});
  }
  std::vector<MemoryRegion> regions;
  uint64_t cursor = 0;
  for (const auto& iv : MergeIntervals(std::move(reserved))) {
    if (iv.begin > cursor) {
      regions.push_back({cursor, iv.begin - cursor, RegionKind::kUsable});
    }
    regions.push_back({iv.begin, iv.end - iv.begin, RegionKind::kReserved});
    cursor = iv.end;
  }
  if (cursor < g.total_bytes()) {
    regions.push_back({cursor, g.total_bytes() - cursor, RegionKind::kUsable});
  }
  MemoryMap out = MemoryMap::FromRegions(std::move(regions), g.total_bytes());
  out.original_entries_ = map.entry_count();
  return out;
}

std::string FormatPercent(double fraction, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f%%", decimals, fraction * 100.0);
  return buf;
}

std::string FormatThousands(uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  for (size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string OverheadReport::Percent() const { return FormatPercent(fraction, 4); }

OverheadReport MakeOverheadReport(const Blacklist& blacklist,
                                  const DramGeometry& g) {
  OverheadReport r;
  r.blacklisted = blacklist.size();
  r.total_frames = g.total_frames();
  r.fraction = static_cast<double>(r.blacklisted) /
               static_cast<double>(r.total_frames);
  return r;
}

std::string OverheadTable(
    const std::vector<std::pair<std::string, OverheadReport>>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %18s %14s %10s\n", "System",
                "Blacklisted pages", "Total pages", "Overhead");
  out += line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof(line), "%-10s %18llu %14s %10s\n", name.c_str(),
                  static_cast<unsigned long long>(r.blacklisted),
                  FormatThousands(r.total_frames).c_str(), r.Percent().c_str());
    out += line;
  }
  return out;
}

uint64_t FrameAvailability::CountAvailable() const {
  return static_cast<uint64_t>(std::count(bits_.begin(), bits_.end(), true));
}

FrameAvailability ApplyMap(const MemoryMap& map, const DramGeometry& g) {
  if (map.total_bytes() != g.total_bytes()) {
    throw Error(ErrorCode::kGeometryMismatch, "memory map size != geometry");
  }
  FrameAvailability avail(g.total_frames(), false);
  for (const auto& r : map.regions()) {
    if (r.kind != RegionKind::kUsable) continue;
    const Pfn first = (r.base + g.page_size - 1) / g.page_size;
    const Pfn last = r.end() / g.page_size;  // exclusive
    for (Pfn p = first; p < last; ++p) avail.set(p, true);
  }
  return avail;
}

std::string MemoryMapToJson(const MemoryMap& map) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : map.regions()) {
    ordered_json j;
    j["base"] = Hex(r.base);
    j["length"] = Hex(r.length);
    j["kind"] = RegionKindName(r.kind);
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

MemoryMap ParseMemoryMap(std::string_view json_text, const DramGeometry& g) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("memory map: ") + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::kParseError, "memory map: expected an array");
  }
  std::vector<MemoryRegion> regions;
  for (const auto& e : doc) {
    if (!e.is_object() || e.size() != 3 || !e.contains("base") ||
        !e.contains("length") || !e.contains("kind") || !e["kind"].is_string()) {
      throw Error(ErrorCode::kParseError,
                  "memory map: entries are {base, length, kind}");
    }
    MemoryRegion r;
    r.base = ParseHex(e["base"], "base");
    r.length = ParseHex(e["length"], "length");
    const std::string kind = e["kind"].get<std::string>();
    if (kind == "usable") {
      r.kind = RegionKind::kUsable;
    } else if (kind == "reserved") {
      r.kind = RegionKind::kReserved;
    } else {
      throw Error(ErrorCode::kParseError, "memory map: unknown kind " + kind);
    }
    regions.push_back(r);
  }
  try {
    return MemoryMap::FromRegions(std::move(regions), g.total_bytes());
  } catch (const Error& e) {
    throw Error(ErrorCode::kGeometryMismatch, e.what());
  }
}

std::string BlacklistToText(const Blacklist& blacklist) {
  std::string out;
  for (Pfn p : blacklist.pfns) {
    out += std::to_string(p);
    out += '\n';
  }
  return out;
}

Blacklist ParseBlacklist(std::string_view text, uint64_t total_frames) {
  std::vector<Pfn> pfns;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw Error(ErrorCode::kParseError,
                  "blacklist: bad line '" + std::string(line) + "'");
    }
    pfns.push_back(v);
  }
  return MakeBlacklist(std::move(pfns), total_frames);
}

}  // namespace catt
