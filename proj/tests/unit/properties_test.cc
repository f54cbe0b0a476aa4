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

// Randomized invariant checks. Every generator is seeded, so failures
// reproduce.

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "catt/attack_harness.h"
#include "catt/bcatt.h"
#include "catt/gcatt_allocator.h"
#include "testing.h"

namespace catt {
namespace {

using testing::BoundProfile;
using testing::Cell;

// 2^20 bytes: 2 banks x 2 ranks x 32 rows of 8 KiB.
DramGeometry MiniGeometry() {
  DramGeometry g;
  g.banks_per_rank = 2;
  g.rows_per_bank = 32;
  return g;
}

// Random permutation of the non-offset address bits.
MappingScheme RandomSwizzle(const DramGeometry& g, uint64_t seed) {
  unsigned bits = 0;
  while ((uint64_t{1} << bits) < g.total_bytes()) ++bits;
  unsigned offset_bits = 0;
  while ((uint64_t{1} << offset_bits) < g.page_size) ++offset_bits;
  std::vector<unsigned> table(bits);
  std::iota(table.begin(), table.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(table.begin() + offset_bits, table.end(), rng);
  return MappingScheme::BitSwizzle(table);
}

void CheckRandomBijection(const AddressMapper& m, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint64_t> pick(0, m.geometry().total_bytes() - 1);
  for (int i = 0; i < 100'000; ++i) {
    const uint64_t pa = pick(rng);
    const DramLocation loc = m.Decode(pa);
    ASSERT_TRUE(m.IsValid(loc));
    ASSERT_EQ(m.Encode(loc), pa);
    if (m.scheme().id() == SchemeId::kLinearRowgroup) {
      ASSERT_EQ(loc.row, RowIndex(pa, m.geometry()));
    }
  }
}

TEST(MappingProperty, RandomBijectionLinear) {
  CheckRandomBijection(AddressMapper{DramGeometry{}}, 1);
  CheckRandomBijection(AddressMapper{DramGeometry::Ddr4(2)}, 2);
  DramGeometry odd;
  odd.rows_per_bank = 1000;
  odd.banks_per_rank = 6;
  CheckRandomBijection(AddressMapper{odd}, 3);
}

TEST(MappingProperty, RandomBijectionIvyBridge) {
  const DramGeometry g0;
  CheckRandomBijection(AddressMapper{g0, MappingScheme::IvyBridgeRank20(g0)}, 4);
}

TEST(MappingProperty, RandomBijectionSwizzle) {
  const DramGeometry g = DramGeometry::Ddr3(2);
  CheckRandomBijection(AddressMapper{g, RandomSwizzle(g, 5)}, 6);
}

TEST(MappingProperty, ExhaustiveMiniGeometry) {
  const DramGeometry g = MiniGeometry();
  ASSERT_EQ(g.total_bytes(), uint64_t{1} << 20);
  for (const AddressMapper& m : {AddressMapper{g}, AddressMapper{g, RandomSwizzle(g, 7)}}) {
    std::vector<uint8_t> seen(g.total_bytes(), 0);
    for (uint64_t pa = 0; pa < g.total_bytes(); ++pa) {
      const DramLocation loc = m.Decode(pa);
      if (m.scheme().id() == SchemeId::kLinearRowgroup) {
        ASSERT_EQ(loc.row, RowIndex(pa, g));
      }
      const uint64_t back = m.Encode(loc);
      ASSERT_EQ(back, pa);
      seen[back] = 1;
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](uint8_t s) { return s; }));
  }
}

TEST(MappingProperty, RowsBelongToOneBank) {
  const DramGeometry g0;
  const AddressMapper m{g0, MappingScheme::IvyBridgeRank20(g0)};
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<uint64_t> pick(0, g0.total_frames() - 1);
  for (int i = 0; i < 2000; ++i) {
    const RowCoord rc = m.RowOfFrame(pick(rng));
    for (int64_t d : {-1, 1}) {
      const int64_t r = static_cast<int64_t>(rc.row) + d;
      if (r < 0 || r >= static_cast<int64_t>(g0.rows_per_bank)) continue;
      for (Pfn p : m.FramesInRow({rc.bank, static_cast<uint64_t>(r)})) {
        const DramLocation loc = m.Decode(p * g0.page_size);
        ASSERT_EQ(loc.bank_coord(), rc.bank);
        ASSERT_EQ(loc.row, static_cast<uint64_t>(r));
      }
    }
  }
}

struct Step {
  bool refresh = false;
  RowCoord row;
  uint64_t count = 0;
};

std::vector<Step> RandomSchedule(const DramGeometry& g, uint64_t banks, uint64_t rows,
                                 uint64_t max_count, int steps, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Step> out;
  for (int i = 0; i < steps; ++i) {
    Step s;
    if (rng() % 10 == 0) {
      s.refresh = true;
    } else {
      s.row = {{0, 0, rng() % std::min(banks, g.banks_per_rank)}, rng() % rows};
      s.count = 1 + rng() % max_count;
    }
    out.push_back(s);
  }
  return out;
}

void Replay(DramState& s, const std::vector<Step>& schedule) {
  for (const Step& st : schedule) {
    if (st.refresh) {
      s.Refresh();
    } else {
      s.Activate(st.row, st.count);
    }
  }
}

TEST(FaultProperty, NoSpontaneousFlips) {
  const AddressMapper m{testing::SmallGeometry(16)};
  auto model = std::make_shared<const FaultModel>(m, BoundProfile(m, {}), FaultParams{});
  DramState s(model);
  for (Pfn p = 0; p < 64; ++p) s.FillFrame(p, static_cast<uint8_t>(p));
  Replay(s, RandomSchedule(m.geometry(), 8, 16, 5'000'000, 2000, 9));
  EXPECT_TRUE(s.flip_log().empty());
  for (Pfn p = 0; p < 64; ++p) EXPECT_TRUE(s.FrameMatches(p, static_cast<uint8_t>(p)));
  EXPECT_TRUE(s.FrameMatches(100, 0));
}

std::shared_ptr<const FaultModel> RandomModel(uint64_t seed, unsigned radius,
                                              double reliability) {
  const AddressMapper m{testing::SmallGeometry(16)};
  std::mt19937_64 rng(seed);
  std::vector<VulnerableCell> cells;
  std::set<std::tuple<uint64_t, uint64_t, uint64_t, unsigned>> used;
  while (cells.size() < 12) {
    const uint64_t bank = rng() % 2, row = rng() % 16, off = rng() % 8192;
    const unsigned bit = rng() % 8;
    if (!used.insert({bank, row, off, bit}).second) continue;
    cells.push_back(Cell(bank, row, off, bit, 1 + rng() % 50, reliability,
                         rng() % 2 ? Sidedness::kSingleSufficient
                                   : Sidedness::kDoubleRequired));
  }
  return std::make_shared<const FaultModel>(m, BoundProfile(m, cells),
                                            FaultParams{seed, radius});
}

TEST(FaultProperty, Determinism) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto model = RandomModel(seed, 1 + seed % 2, 0.5);
    const auto schedule = RandomSchedule(model->mapper().geometry(), 2, 16, 60, 3000, seed);
    DramState a(model), b(model);
    Replay(a, schedule);
    Replay(b, schedule);
    EXPECT_FALSE(a.flip_log().empty());
    EXPECT_EQ(a.flip_log(), b.flip_log());
  }
}

TEST(FaultProperty, Locality) {
  for (uint64_t seed = 10; seed < 15; ++seed) {
    const unsigned radius = 1 + seed % 2;
    auto model = RandomModel(seed, radius, 1.0);
    const AddressMapper& m = model->mapper();
    DramState s(model);
    size_t seen = 0;
    for (const Step& st : RandomSchedule(m.geometry(), 2, 16, 60, 3000, seed)) {
      if (st.refresh) {
        s.Refresh();
        continue;
      }
      s.Activate(st.row, st.count);
      for (; seen < s.flip_log().size(); ++seen) {
        const FlipEvent& f = s.flip_log()[seen];
        const DramLocation loc = m.Decode(f.pa);
        uint64_t threshold = 0;
        for (const auto& c : model->profile().cells) {
          if (c.location == loc.row_coord() && c.byte_offset == loc.offset && c.bit == f.bit) {
            threshold = c.threshold;
          }
        }
        ASSERT_GT(threshold, 0u);
        bool hot = false;
        for (int64_t d = -static_cast<int64_t>(radius); d <= static_cast<int64_t>(radius); ++d) {
          const int64_t r = static_cast<int64_t>(loc.row) + d;
          if (d == 0 || r < 0 || r >= 16) continue;
          hot = hot || s.ActivationCount({loc.bank_coord(), static_cast<uint64_t>(r)}) >= threshold;
        }
        ASSERT_TRUE(hot);
      }
    }
  }
}

// Step-by-step counters for reliable double-sided cells at radius 1.
TEST(FaultProperty, MatchesCounterOracle) {
  for (uint64_t seed = 20; seed < 30; ++seed) {
    const AddressMapper m{testing::SmallGeometry(16)};
    std::mt19937_64 rng(seed);
    std::map<uint64_t, uint64_t> thresholds;  // victim row in bank 0
    std::vector<VulnerableCell> cells;
    for (uint64_t row = 1; row < 15; row += 3) {
      thresholds[row] = 1 + rng() % 40;
      cells.push_back(Cell(0, row, 0, 0, thresholds[row]));
    }
    auto model = std::make_shared<const FaultModel>(m, BoundProfile(m, cells), FaultParams{});
    DramState s(model);
    std::map<uint64_t, uint64_t> counters;
    std::set<uint64_t> flipped;
    std::multiset<uint64_t> oracle_flips;
    for (const Step& st : RandomSchedule(m.geometry(), 1, 16, 8, 4000, seed)) {
      if (st.refresh) {
        s.Refresh();
        counters.clear();
        flipped.clear();
        continue;
      }
      s.Activate(st.row, st.count);
      for (uint64_t i = 0; i < st.count; ++i) {
        ++counters[st.row.row];
        for (const auto& [victim, t] : thresholds) {
          if (!flipped.count(victim) && counters[victim - 1] >= t &&
              counters[victim + 1] >= t) {
            flipped.insert(victim);
            oracle_flips.insert(victim);
          }
        }
      }
    }
    std::multiset<uint64_t> got;
    for (const auto& f : s.flip_log()) got.insert(m.Decode(f.pa).row);
    EXPECT_EQ(got, oracle_flips) << "seed " << seed;
  }
}

// Frame-by-frame isolation check kept separate from Allocator::AuditIsolation.
bool GuardRowsHold(const Allocator& a, uint64_t guard) {
  const DramGeometry& g = a.mapper().geometry();
  std::map<std::pair<uint64_t, uint64_t>, std::set<uint32_t>> owners;
  for (Pfn p = 0; p < a.frames(); ++p) {
    if (a.meta(p).domain) owners[{a.BankOf(p), a.RowOf(p)}].insert(a.meta(p).domain->id);
  }
  for (const auto& [key, doms] : owners) {
    const auto [bank, row] = key;
    if (doms.size() > 1) return false;
    for (uint64_t r = row + 1; r <= row + guard && r < g.rows_per_bank; ++r) {
      auto it = owners.find({bank, r});
      if (it != owners.end() && it->second != doms) return false;
    }
  }
  return true;
}

// Free lists must partition exactly the free frames.
bool FreeListsPartition(const Allocator& a) {
  std::vector<int> cover(a.frames(), 0);
  for (unsigned o = 0; o <= a.max_order(); ++o) {
    for (Pfn head : a.FreeList(o)) {
      if (head % (uint64_t{1} << o)) return false;
      for (Pfn p = head; p < head + (uint64_t{1} << o); ++p) ++cover[p];
    }
  }
  for (Pfn p = 0; p < a.frames(); ++p) {
    const bool free = a.meta(p).state == FrameState::kFree;
    if (cover[p] != (free ? 1 : 0)) return false;
    const bool allocated = a.meta(p).state == FrameState::kAllocated;
    if (a.meta(p).domain.has_value() != allocated) return false;
  }
  return true;
}

void RandomWorkload(Allocator& a, uint64_t ops, uint64_t seed, bool with_pids) {
  std::mt19937_64 rng(seed);
  std::vector<Block> live;
  const uint64_t guard = a.policy().guard_rows;
  for (uint64_t i = 0; i < ops; ++i) {
    if (live.empty() || rng() % 100 < 55) {
      AllocRequest req;
      req.order = rng() % 4 == 0 ? static_cast<unsigned>(rng() % 5) : 0;
      if (rng() % 3 == 0) {
        req.flags = {Requester::kKernel, std::nullopt};
      } else {
        req.flags = {Requester::kUser,
                     with_pids ? std::optional<uint32_t>(rng() % 5) : std::nullopt};
      }
      if (auto b = a.Alloc(req)) live.push_back(*b);
    } else {
      const size_t k = rng() % live.size();
      a.Free(live[k]);
      live[k] = live.back();
      live.pop_back();
    }
    if ((i + 1) % 1000 == 0) {
      ASSERT_TRUE(a.AuditBuddy().empty()) << "op " << i;
      ASSERT_TRUE(FreeListsPartition(a)) << "op " << i;
      if (a.policy().kind != PolicyKind::kNone) {
        ASSERT_TRUE(a.AuditIsolation().empty()) << "op " << i;
        ASSERT_TRUE(GuardRowsHold(a, guard)) << "op " << i;
      }
    }
  }
  for (const Block& b : live) a.Free(b);
  EXPECT_TRUE(a.AuditBuddy().empty());
}

TEST(AllocatorProperty, BuddySoundnessNoPolicy) {
  const DramGeometry g = testing::SmallGeometry(64);
  FrameAvailability avail(g.total_frames(), true);
  for (Pfn p = 5; p < g.total_frames(); p += 97) avail.set(p, false);
  Allocator a(avail, AddressMapper{g}, PartitionPolicy::None());
  const Allocator fresh = a;
  RandomWorkload(a, 100'000, 31, false);
  EXPECT_TRUE(a.SameState(fresh));
}

TEST(AllocatorProperty, SplitPolicyIsolation) {
  const DramGeometry g = testing::SmallGeometry(64);
  for (uint64_t guard : {1u, 2u}) {
    Allocator a(FrameAvailability(g.total_frames(), true), AddressMapper{g},
                PartitionPolicy::KernelUserSplit(guard));
    RandomWorkload(a, 100'000, 32 + guard, false);
  }
}

TEST(AllocatorProperty, DynamicPolicyIsolation) {
  const DramGeometry g = testing::SmallGeometry(64);
  for (uint64_t guard : {1u, 2u}) {
    Allocator a(FrameAvailability(g.total_frames(), true), AddressMapper{g},
                PartitionPolicy::DynamicAdjacency(guard), guard);
    const Allocator fresh = a;
    RandomWorkload(a, 100'000, 40 + guard, true);
    EXPECT_TRUE(a.SameState(fresh));
  }
}

TEST(AllocatorProperty, UnavailableFramesNeverHandedOut) {
  const DramGeometry g = testing::SmallGeometry(32);
  std::mt19937_64 rng(50);
  FrameAvailability avail(g.total_frames(), true);
  std::set<Pfn> holes;
  for (int i = 0; i < 60; ++i) holes.insert(rng() % g.total_frames());
  for (Pfn p : holes) avail.set(p, false);
  Allocator a(avail, AddressMapper{g}, PartitionPolicy::DynamicAdjacency(1));
  for (int i = 0; i < 5000; ++i) {
    const unsigned order = static_cast<unsigned>(rng() % 3);
    auto b = a.AllocForDomain(order, SecurityDomain{static_cast<uint32_t>(rng() % 4)});
    if (!b) continue;
    for (Pfn p = b->first; p < b->first + b->frames(); ++p) ASSERT_FALSE(holes.count(p));
    if (rng() % 2) a.Free(*b);
  }
}

TEST(BcattProperty, MapInvariants) {
  const DramGeometry g = testing::SmallGeometry(64);
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Pfn> pfns;
    const int n = static_cast<int>(rng() % 300);
    for (int i = 0; i < n; ++i) pfns.push_back(rng() % g.total_frames());
    const Blacklist bl = MakeBlacklist(pfns, g.total_frames());
    const MemoryMap once = ExtendMap(MemoryMap::AllUsable(g), bl, g);
    EXPECT_EQ(ExtendMap(once, bl, g), once);
    EXPECT_EQ(once.BytesOfKind(RegionKind::kUsable) + once.BytesOfKind(RegionKind::kReserved),
              g.total_bytes());
    EXPECT_EQ(once.BytesOfKind(RegionKind::kReserved), bl.size() * g.page_size);
    EXPECT_EQ(ParseMemoryMap(MemoryMapToJson(once), g), once);
    for (size_t i = 1; i < once.regions().size(); ++i) {
      EXPECT_NE(once.regions()[i].kind, once.regions()[i - 1].kind);
      EXPECT_EQ(once.regions()[i].base, once.regions()[i - 1].end());
    }
    const FrameAvailability avail = ApplyMap(once, g);
    for (Pfn p = 0; p < g.total_frames(); ++p) ASSERT_EQ(avail.available(p), !bl.Contains(p));
  }
}

TEST(BcattProperty, ScanOfBlacklistedMachineIsClean) {
  const AddressMapper m{testing::SmallGeometry(64)};
  for (uint64_t seed = 0; seed < 5; ++seed) {
    ProfileRecipe r;
    r.victim_frames = 40;
    r.seed = seed;
    r.threshold = 1000;
    auto model = std::make_shared<const FaultModel>(m, GenerateProfile(m, r), FaultParams{});
    MachineTemplate t(model, {Defense::kBcatt});
    Machine machine = t.Instantiate();
    ScanConfig cfg;
    cfg.hammer_count = 1000;
    EXPECT_TRUE(Scan(machine, cfg).empty());
    // Hammering may still disturb reserved frames, never available ones.
    for (const FlipEvent& f : machine.dram().flip_log()) {
      EXPECT_FALSE(t.availability().available(f.pa / m.geometry().page_size));
    }
  }
}

TEST(AttackProperty, GcattNeverCrossesDomains) {
  const AddressMapper m{testing::SmallGeometry(128)};
  std::mt19937_64 rng(70);
  for (int trial = 0; trial < 6; ++trial) {
    ProfileRecipe r;
    r.victim_frames = 4 + rng() % 40;
    r.seed = rng();
    r.threshold = 1000;
    r.reliability = trial % 2 ? 1.0 : 0.5;
    r.sidedness = trial % 3 == 0 ? Sidedness::kSingleSufficient : Sidedness::kDoubleRequired;
    auto model = std::make_shared<const FaultModel>(m, GenerateProfile(m, r),
                                                    FaultParams{rng(), 1});
    ExploitConfig cfg;
    cfg.attempts = 30;
    cfg.seed = rng();
    cfg.hammer_count = 1000;
    cfg.spray_fraction = 0.2 + 0.8 * (static_cast<double>(rng() % 100) / 100);
    cfg.background_fraction = static_cast<double>(rng() % 90) / 100;
    cfg.mode = trial % 2 ? HammerMode::kSingleSided : HammerMode::kDoubleSided;
    for (Defense d : {Defense::kGcattSplit, Defense::kGcattDynamic}) {
      auto tmpl = std::make_shared<const MachineTemplate>(model, DefenseConfig{d});
      const AttackResult res = RunCampaign([tmpl] { return tmpl->Instantiate(); }, cfg);
      EXPECT_EQ(res.cross_domain_flips, 0u) << "trial " << trial;
      EXPECT_EQ(res.successes, 0u) << "trial " << trial;
    }
  }
}

}  // namespace
}  // namespace catt
