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

#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <set>

#include "catt/error.h"
#include "catt/fault_model.h"
#include "catt/io.h"
#include "testing.h"

namespace catt {
namespace {

using testing::BoundProfile;
using testing::Cell;
using testing::ErrorOf;

constexpr RowCoord Row(uint64_t bank, uint64_t row) {
  return RowCoord{BankCoord{0, 0, bank}, row};
}

std::shared_ptr<const FaultModel> Model(std::vector<VulnerableCell> cells,
                                        FaultParams params = {},
                                        uint64_t rows = 64) {
  AddressMapper m{testing::SmallGeometry(rows)};
  auto profile = BoundProfile(m, std::move(cells));
  return std::make_shared<const FaultModel>(m, std::move(profile), params);
}

// Counter-per-row simulation of one reliable double-sided cell. Each step is
// either an activation of a row or a refresh.
struct CounterOracle {
  uint64_t victim_row;
  uint64_t threshold;
  std::map<uint64_t, uint64_t> counters;
  bool flipped_this_epoch = false;
  int flips = 0;

  void Activate(uint64_t row) {
    ++counters[row];
    if (!flipped_this_epoch && counters[victim_row - 1] >= threshold &&
        counters[victim_row + 1] >= threshold) {
      flipped_this_epoch = true;
      ++flips;
    }
  }
  void Refresh() {
    counters.clear();
    flipped_this_epoch = false;
  }
};

TEST(ActivateTest, NoCellsNoFlips) {
  DramState s(Model({}));
  s.Activate(Row(0, 5));
  EXPECT_EQ(s.ActivationCount(Row(0, 5)), 1u);
  EXPECT_TRUE(s.flip_log().empty());
  EXPECT_EQ(s.ReadByte(0), 0);
}

TEST(ActivateTest, DoubleSidedFlipsOnce) {
  auto model = Model({Cell(0, 2, 100, 3)});
  DramState s(model);
  s.Activate(Row(0, 1), 1'000'000);
  EXPECT_TRUE(s.flip_log().empty());
  s.Activate(Row(0, 3), 1'000'000);
  ASSERT_EQ(s.flip_log().size(), 1u);
  const PhysAddr pa = model->mapper().Encode({0, 0, 0, 2, 100});
  EXPECT_EQ(s.flip_log()[0], (FlipEvent{pa, 3, 0}));
  EXPECT_EQ(s.ReadByte(pa), 0x08);
  // Still qualifying in the same epoch: no second flip.
  s.Activate(Row(0, 1), 10);
  s.Activate(Row(0, 3), 10);
  EXPECT_EQ(s.flip_log().size(), 1u);
  EXPECT_TRUE(s.EvaluateFlips().empty());
}

TEST(ActivateTest, EpochSplitPreventsFlip) {
  DramState s(Model({Cell(0, 2, 100, 3)}));
  CounterOracle oracle{2, 1'000'000, {}};
  for (int half = 0; half < 2; ++half) {
    s.Activate(Row(0, 1), 500'000);
    s.Activate(Row(0, 3), 500'000);
    s.Refresh();
  }
  for (int half = 0; half < 2; ++half) {
    for (int i = 0; i < 500'000; ++i) oracle.Activate(1);
    for (int i = 0; i < 500'000; ++i) oracle.Activate(3);
    oracle.Refresh();
  }
  EXPECT_EQ(oracle.flips, 0);
  EXPECT_TRUE(s.flip_log().empty());
}

TEST(ActivateTest, OneAggressorIsNotEnoughForDoubleRequired) {
  DramState s(Model({Cell(0, 2, 100, 3)}));
  s.Activate(Row(0, 1), 2'000'000);
  EXPECT_TRUE(s.EvaluateFlips().empty());
  EXPECT_TRUE(s.flip_log().empty());
}

TEST(ActivateTest, SingleSufficientFlipsFromEitherSide) {
  auto cell = Cell(0, 2, 100, 3, 1000, 1.0, Sidedness::kSingleSufficient);
  DramState below(Model({cell}));
  below.Activate(Row(0, 1), 1000);
  EXPECT_EQ(below.flip_log().size(), 1u);
  DramState above(Model({cell}));
  above.Activate(Row(0, 3), 1000);
  EXPECT_EQ(above.flip_log().size(), 1u);
}

TEST(ActivateTest, OtherBankDoesNotDisturb) {
  DramState s(Model({Cell(0, 2, 100, 3, 1000)}));
  s.Activate(Row(1, 1), 1000);
  s.Activate(Row(1, 3), 1000);
  EXPECT_TRUE(s.flip_log().empty());
}

TEST(ActivateTest, EdgeRowCannotBeDoubleSided) {
  DramState s(Model({Cell(0, 0, 0, 0, 1000)}));
  s.Activate(Row(0, 1), 5000);
  EXPECT_TRUE(s.flip_log().empty());
  DramState t(Model({Cell(0, 0, 0, 0, 1000, 1.0, Sidedness::kSingleSufficient)}));
  t.Activate(Row(0, 1), 1000);
  EXPECT_EQ(t.flip_log().size(), 1u);
}

TEST(ActivateTest, BlastRadiusTwo) {
  const auto cell = Cell(0, 4, 0, 0, 1000);
  DramState r1(Model({cell}, {0, 1}));
  r1.Activate(Row(0, 2), 1000);
  r1.Activate(Row(0, 6), 1000);
  EXPECT_TRUE(r1.flip_log().empty());
  DramState r2(Model({cell}, {0, 2}));
  r2.Activate(Row(0, 2), 1000);
  r2.Activate(Row(0, 6), 1000);
  EXPECT_EQ(r2.flip_log().size(), 1u);
  EXPECT_EQ(ErrorOf([&] { Model({cell}, {0, 3}); }), ErrorCode::kInvalidArgument);
}

TEST(ActivateTest, RejectsInvalidRow) {
  DramState s(Model({}));
  EXPECT_EQ(ErrorOf([&] { s.Activate(Row(0, 64)); }), ErrorCode::kLocationOutOfRange);
  EXPECT_EQ(ErrorOf([&] { s.Activate(Row(8, 0)); }), ErrorCode::kLocationOutOfRange);
}

TEST(ActivateTest, BulkEqualsRepeated) {
  auto model = Model({Cell(0, 2, 7, 1, 5), Cell(0, 3, 9, 6, 4, 1.0,
                                                Sidedness::kSingleSufficient)});
  DramState bulk(model);
  DramState single(model);
  bulk.Activate(Row(0, 1), 7);
  bulk.Activate(Row(0, 3), 7);
  bulk.Activate(Row(0, 2), 7);
  for (uint64_t r : {1, 3, 2})
    for (int i = 0; i < 7; ++i) single.Activate(Row(0, r));
  EXPECT_EQ(bulk.flip_log(), single.flip_log());
  EXPECT_EQ(bulk.flip_log().size(), 2u);
}

TEST(RefreshTest, ResetsCountersKeepsMemory) {
  DramState s(Model({}));
  s.Refresh();
  EXPECT_EQ(s.epoch(), 1u);
  EXPECT_EQ(s.ActivationCount(Row(0, 3)), 0u);
  s.Activate(Row(0, 3), 500'000);
  s.WriteByte(42, 0xab);
  EXPECT_EQ(s.ActivationCount(Row(0, 3)), 500'000u);
  s.Refresh();
  EXPECT_EQ(s.ActivationCount(Row(0, 3)), 0u);
  EXPECT_EQ(s.ReadByte(42), 0xab);
  EXPECT_EQ(s.epoch(), 2u);
}

TEST(RefreshTest, ThresholdIsPerEpoch) {
  DramState s(Model({Cell(0, 2, 0, 0)}));
  s.Activate(Row(0, 3), 1'000'000);
  s.Activate(Row(0, 1), 999'999);
  s.Refresh();
  s.Activate(Row(0, 1), 1);
  EXPECT_TRUE(s.flip_log().empty());
}

TEST(EvaluateFlipsTest, ReliableCellFlipsEveryQualifyingEpoch) {
  DramState s(Model({Cell(0, 2, 0, 0, 10)}));
  for (int e = 0; e < 5; ++e) {
    s.Activate(Row(0, 1), 10);
    s.Activate(Row(0, 3), 10);
    s.Refresh();
  }
  ASSERT_EQ(s.flip_log().size(), 5u);
  for (uint64_t e = 0; e < 5; ++e) EXPECT_EQ(s.flip_log()[e].epoch, e);
  // Five XORs of the same bit.
  EXPECT_EQ(s.ReadByte(s.flip_log()[0].pa), 0x01);
}

TEST(EvaluateFlipsTest, HalfReliableCellOverThousandEpochs) {
  // Frozen from an independent splitmix64 transcription (seed 42, cell 0,
  // epochs 0..999): 502 draws fall below 0.5.
  DramState s(Model({Cell(0, 2, 0, 0, 1, 0.5)}, {42, 1}));
  for (int e = 0; e < 1000; ++e) {
    s.Activate(Row(0, 1));
    s.Activate(Row(0, 3));
    s.Refresh();
  }
  const auto n = s.flip_log().size();
  EXPECT_GE(n, 400u);
  EXPECT_LE(n, 600u);
  EXPECT_EQ(n, 502u);
}

TEST(EvaluateFlipsTest, OutcomeIndependentOfActivationOrder) {
  auto model = Model({Cell(0, 2, 0, 0, 3, 0.5), Cell(0, 5, 1, 1, 3, 0.5)}, {9, 1});
  DramState a(model);
  DramState b(model);
  for (int e = 0; e < 50; ++e) {
    a.Activate(Row(0, 1), 3);
    a.Activate(Row(0, 3), 3);
    a.Activate(Row(0, 4), 3);
    a.Activate(Row(0, 6), 3);
    b.Activate(Row(0, 6), 3);
    b.Activate(Row(0, 4), 3);
    b.Activate(Row(0, 3), 3);
    b.Activate(Row(0, 1), 3);
    a.Refresh();
    b.Refresh();
  }
  std::multiset<std::pair<PhysAddr, uint64_t>> fa, fb;
  for (const auto& f : a.flip_log()) fa.insert({f.pa, f.epoch});
  for (const auto& f : b.flip_log()) fb.insert({f.pa, f.epoch});
  EXPECT_EQ(fa, fb);
}

TEST(DramStateTest, FrameContents) {
  auto model = Model({});
  DramState s(model);
  EXPECT_TRUE(s.FrameMatches(3, 0));
  s.FillFrame(3, 0x5a);
  EXPECT_TRUE(s.FrameMatches(3, 0x5a));
  EXPECT_EQ(s.ReadByte(3 * 4096 + 17), 0x5a);
  s.WriteByte(3 * 4096 + 17, 0x00);
  EXPECT_FALSE(s.FrameMatches(3, 0x5a));
  auto bytes = s.ReadFrame(3);
  ASSERT_EQ(bytes.size(), 4096u);
  EXPECT_EQ(bytes[16], 0x5a);
  EXPECT_EQ(bytes[17], 0x00);
  std::vector<uint8_t> data(4096, 0x11);
  s.WriteFrame(4, data);
  EXPECT_TRUE(s.FrameMatches(4, 0x11));
  EXPECT_EQ(ErrorOf([&] { s.WriteFrame(5, std::vector<uint8_t>(10)); }),
            ErrorCode::kInvalidArgument);
  const Pfn past = model->mapper().geometry().total_frames();
  EXPECT_EQ(ErrorOf([&] { s.FillFrame(past, 0); }), ErrorCode::kPfnOutOfRange);
}

TEST(DramStateTest, FlipInFilledFrame) {
  auto model = Model({Cell(0, 2, 10, 7, 1)});
  DramState s(model);
  const PhysAddr pa = model->mapper().Encode({0, 0, 0, 2, 10});
  s.FillFrame(pa / 4096, 0xff);
  s.Activate(Row(0, 1));
  s.Activate(Row(0, 3));
  EXPECT_EQ(s.ReadByte(pa), 0x7f);
  EXPECT_FALSE(s.FrameMatches(pa / 4096, 0xff));
}

TEST(ProfileIoTest, StoreLoadRoundTrip) {
  testing::TempDir dir;
  AddressMapper m{testing::SmallGeometry(64)};
  auto p = BoundProfile(m, {Cell(0, 2, 100, 3), Cell(5, 60, 8191, 7, 10, 0.25,
                                                     Sidedness::kSingleSufficient)});
  StoreProfile(p, dir.File("p.json"));
  EXPECT_EQ(LoadProfile(dir.File("p.json"), m), p);

  auto empty = BoundProfile(m, {});
  StoreProfile(empty, dir.File("e.json"));
  EXPECT_EQ(LoadProfile(dir.File("e.json"), m), empty);
  EXPECT_TRUE(LoadProfile(dir.File("e.json"), m).cells.empty());
}

TEST(ProfileIoTest, RejectsDuplicateCell) {
  AddressMapper m{testing::SmallGeometry(64)};
  VulnerabilityProfile p;
  p.geometry_digest = m.Digest();
  p.cells = {Cell(0, 2, 100, 3), Cell(0, 2, 100, 3, 5)};
  std::string text = ProfileToJson(p);
  EXPECT_EQ(ErrorOf([&] { ParseProfile(text); }), ErrorCode::kParseError);
}

TEST(ProfileIoTest, RejectsBadValues) {
  AddressMapper m{testing::SmallGeometry(64)};
  const std::string ok = ProfileToJson(BoundProfile(m, {Cell(0, 2, 100, 3)}));
  auto mutate = [&](const std::string& from, const std::string& to) {
    std::string t = ok;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_EQ(ErrorOf([&] { ParseProfile(mutate("\"bit\": 3", "\"bit\": 8")); }),
            ErrorCode::kParseError);
  EXPECT_EQ(ErrorOf([&] { ParseProfile(mutate("\"reliability\": 1.0", "\"reliability\": 0.0")); }),
            ErrorCode::kParseError);
  EXPECT_EQ(ErrorOf([&] { ParseProfile(mutate("\"threshold\": 1000000", "\"threshold\": 0")); }),
            ErrorCode::kParseError);
  EXPECT_EQ(ErrorOf([&] { ParseProfile(mutate("double-required", "triple")); }),
            ErrorCode::kParseError);
  EXPECT_EQ(ErrorOf([&] { ParseProfile(mutate("\"bit\": 3", "\"bit\": 3, \"x\": 1")); }),
            ErrorCode::kParseError);
  EXPECT_EQ(ErrorOf([&] { ParseProfile("not json"); }), ErrorCode::kParseError);
}

TEST(ProfileIoTest, BindingChecks) {
  testing::TempDir dir;
  AddressMapper small{testing::SmallGeometry(64)};
  AddressMapper other{testing::SmallGeometry(128)};
  StoreProfile(BoundProfile(small, {Cell(0, 2, 100, 3)}), dir.File("p.json"));
  EXPECT_EQ(ErrorOf([&] { LoadProfile(dir.File("p.json"), other); }),
            ErrorCode::kDigestMismatch);
  // Right digest but a cell outside the geometry.
  VulnerabilityProfile bad;
  bad.geometry_digest = small.Digest();
  bad.cells = {Cell(0, 64, 0, 0)};
  EXPECT_EQ(ErrorOf([&] { CheckProfileBinding(bad, small); }),
            ErrorCode::kGeometryMismatch);
  EXPECT_EQ(ErrorOf([&] { LoadProfile(dir.File("missing.json"), small); }),
            ErrorCode::kParseError);
}

TEST(ProfileTest, ScaleThresholds) {
  AddressMapper m{testing::SmallGeometry(64)};
  auto p = BoundProfile(m, {Cell(0, 2, 0, 0, 1'000'000), Cell(0, 3, 0, 0, 1)});
  auto q = ScaleThresholds(p, 1, 1000);
  EXPECT_EQ(q.cells[0].threshold, 1000u);
  // Never drops below one activation.
  EXPECT_EQ(q.cells[1].threshold, 1u);
  EXPECT_EQ(ErrorOf([&] { ScaleThresholds(p, 1, 0); }), ErrorCode::kInvalidArgument);
}

TEST(ProfileTest, GenerateProfile) {
  AddressMapper m{testing::SmallGeometry(64)};
  ProfileRecipe r;
  r.victim_frames = 50;
  r.seed = 5;
  auto p = GenerateProfile(m, r);
  EXPECT_EQ(p, GenerateProfile(m, r));
  ASSERT_EQ(p.cells.size(), 50u);
  std::set<Pfn> frames;
  for (const auto& c : p.cells) {
    EXPECT_GT(c.location.row, 0u);
    EXPECT_LT(c.location.row, 63u);
    const DramLocation loc{c.location.bank.dimm, c.location.bank.rank,
                           c.location.bank.bank, c.location.row, c.byte_offset};
    frames.insert(m.Encode(loc) / 4096);
  }
  EXPECT_EQ(frames.size(), 50u);
  r.victim_frames = m.geometry().total_frames() + 1;
  EXPECT_EQ(ErrorOf([&] { GenerateProfile(m, r); }), ErrorCode::kInvalidArgument);
}

TEST(ProfileTest, ShippedProfilesBindToTheirGeometry) {
  const AddressMapper s1 = LoadGeometryConfig(testing::DataPath("geometry/s1-ddr3-8g.json"));
  const auto p = LoadProfile(testing::DataPath("profiles/s1-133.json"), s1);
  EXPECT_EQ(p.cells.size(), 133u);
  for (const auto& c : p.cells) {
    EXPECT_EQ(c.reliability, 1.0);
    EXPECT_EQ(c.threshold, kDefaultHammerThreshold);
  }
}

}  // namespace
}  // namespace catt
