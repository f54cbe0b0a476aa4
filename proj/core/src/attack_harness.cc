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

#include "catt/attack_harness.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "catt/error.h"
#include "catt/rng.h"

namespace catt {
namespace {

constexpr uint32_t kBackgroundPid = 1;
constexpr uint32_t kAttackerPid = 2;
constexpr uint32_t kScannerPid = 3;
constexpr uint64_t kPteBytes = 8;
// Present | writable | user in every byte; only used to give page-table
// pages recognizable contents.
constexpr uint8_t kPteFillByte = 0x07;

PartitionPolicy PolicyFor(const DefenseConfig& d) {
  switch (d.defense) {
    case Defense::kNone:
    case Defense::kBcatt:
      return PartitionPolicy::None();
    case Defense::kGcattSplit:
    case Defense::kBoth:
      return PartitionPolicy::KernelUserSplit(d.guard_rows, d.kernel_base);
    case Defense::kGcattDynamic:
      return PartitionPolicy::DynamicAdjacency(d.guard_rows);
  }
  return PartitionPolicy::None();
}

bool UsesBlacklist(Defense d) {
  return d == Defense::kBcatt || d == Defense::kBoth;
}

// True if the process owns at least one frame of the row.
bool OwnsInRow(const Allocator& a, const std::vector<uint8_t>& owned,
               uint64_t bank, uint64_t row) {
  for (Pfn p : a.FramesOfRow(bank, row)) {
    if (owned[p]) return true;
  }
  return false;
}

}  // namespace

std::string_view DefenseName(Defense d) {
  switch (d) {
    case Defense::kNone: return "none";
    case Defense::kBcatt: return "bcatt";
    case Defense::kGcattSplit: return "gcatt-split";
    case Defense::kGcattDynamic: return "gcatt-dynamic";
    case Defense::kBoth: return "both";
  }
  return "unknown";
}

std::optional<Defense> ParseDefense(std::string_view name) {
  for (Defense d : {Defense::kNone, Defense::kBcatt, Defense::kGcattSplit,
                    Defense::kGcattDynamic, Defense::kBoth}) {
    if (DefenseName(d) == name) return d;
  }
  return std::nullopt;
}

MachineTemplate::MachineTemplate(std::shared_ptr<const FaultModel> model,
                                 DefenseConfig defense)
    : model_(std::move(model)), defense_(defense) {
  const AddressMapper& mapper = model_->mapper();
  const DramGeometry& g = mapper.geometry();
  map_ = MemoryMap::AllUsable(g);
  if (UsesBlacklist(defense_.defense)) {
    blacklist_ = DeriveBlacklist(model_->profile(), mapper,
                                 defense_.whole_row_blacklist);
    map_ = ExtendMap(map_, blacklist_, g);
  }
  availability_ = ApplyMap(map_, g);
  policy_ = PolicyFor(defense_);
  fresh_allocator_ = std::make_shared<const Allocator>(
      availability_, mapper, policy_, model_->params().blast_radius);
}

double MachineTemplate::MemoryOverhead() const {
  const DramGeometry& g = mapper().geometry();
  return MakeOverheadReport(blacklist_, g).fraction + GcattOverhead(policy_, g);
}

Machine MachineTemplate::Instantiate() const {
  return Machine(*this, *fresh_allocator_);
}

Machine::Machine(const MachineTemplate& tmpl, Allocator allocator)
    : tmpl_(&tmpl), allocator_(std::move(allocator)), dram_(tmpl.model_ptr()) {}

std::vector<Pfn> Scan(Machine& machine, const ScanConfig& cfg) {
  if (cfg.hammer_count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "hammer_count must be >= 1");
  }
  Allocator& a = machine.allocator();
  DramState& dram = machine.dram();
  const AddressMapper& mapper = machine.tmpl().mapper();
  const DramGeometry& g = mapper.geometry();

  std::vector<uint8_t> owned(a.frames(), 0);
  a.RegisterProcess(kScannerPid);
  for (uint64_t vpage = 0;; ++vpage) {
    auto pfn = a.FaultIn(kScannerPid, vpage);
    if (!pfn) break;
    owned[*pfn] = 1;
  }

  std::vector<uint8_t> flipped(a.frames(), 0);
  std::vector<Pfn> victims;
  for (uint64_t run = 0; run < cfg.coverage_runs; ++run) {
    for (uint64_t bank = 0; bank < g.total_banks(); ++bank) {
      const BankCoord bc = mapper.BankFromIndex(bank);
      for (uint64_t row = 1; row + 1 < g.rows_per_bank; ++row) {
        victims.clear();
        for (Pfn p : a.FramesOfRow(bank, row)) {
          if (owned[p]) victims.push_back(p);
        }
        if (victims.empty() || !OwnsInRow(a, owned, bank, row - 1) ||
            !OwnsInRow(a, owned, bank, row + 1)) {
          continue;
        }
        for (Pfn v : victims) dram.FillFrame(v, cfg.pattern);
        dram.Activate({bc, row - 1}, cfg.hammer_count);
        dram.Activate({bc, row + 1}, cfg.hammer_count);
        for (Pfn v : victims) {
          if (!dram.FrameMatches(v, cfg.pattern)) flipped[v] = 1;
          dram.FillFrame(v, 0);
        }
        dram.Refresh();
      }
    }
  }
  std::vector<Pfn> out;
  for (Pfn p = 0; p < flipped.size(); ++p) {
    if (flipped[p]) out.push_back(p);
  }
  return out;
}

void ExploitConfig::Validate() const {
  if (!(spray_fraction > 0.0 && spray_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "spray_fraction must be in (0, 1]");
  }
  if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "background_fraction must be in [0, 1)");
  }
  if (!(pte_fill > 0.0 && pte_fill <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pte_fill must be in (0, 1]");
  }
  if (attempts == 0) {
    throw Error(ErrorCode::kInvalidArgument, "attempts must be >= 1");
  }
  if (hammer_count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "hammer_count must be >= 1");
  }
}

void AttackResult::Add(const AttemptRecord& rec) {
  ++attempts;
  successes += rec.success ? 1 : 0;
  flips_total += rec.flips;
  cross_domain_flips += rec.cross_domain_flips;
  own_domain_flips += rec.own_domain_flips;
  unowned_flips += rec.unowned_flips;
  reserved_flips += rec.reserved_flips;
  log.push_back(rec);
}

bool IsDesignatedPteBit(unsigned bit_in_entry) {
  return bit_in_entry <= 2 || (bit_in_entry >= 12 && bit_in_entry <= 51);
}

AttemptRecord RunExploit(Machine& machine, const ExploitConfig& cfg,
                         uint64_t attempt_seed, uint64_t index) {
  cfg.Validate();
  AttemptRecord rec;
  rec.index = index;
  rec.seed = attempt_seed;

  Rng rng(attempt_seed);
  Allocator& a = machine.allocator();
  DramState& dram = machine.dram();
  const MachineTemplate& tmpl = machine.tmpl();
  const AddressMapper& mapper = tmpl.mapper();
  const DramGeometry& g = mapper.geometry();

  // Background load with a random layout.
  if (cfg.background_fraction > 0.0) {
    a.RegisterProcess(kBackgroundPid);
    uint64_t vpage = 0;
    while (a.FaultIn(kBackgroundPid, vpage)) ++vpage;
    for (uint64_t v = 0; v < vpage; ++v) {
      if (!rng.Bernoulli(cfg.background_fraction)) a.Unmap(kBackgroundPid, v);
    }
  }

  // Attacker spray.
  a.RegisterProcess(kAttackerPid);
  const AllocFlags attacker_flags{Requester::kUser, kAttackerPid};
  const SecurityDomain attacker = DeriveDomain(attacker_flags, a.policy());
  const uint64_t spray = static_cast<uint64_t>(
      cfg.spray_fraction * static_cast<double>(a.FreeFrames()));
  std::vector<uint8_t> owned(a.frames(), 0);
  std::vector<std::pair<uint64_t, Pfn>> attacker_pages;
  for (uint64_t v = 0; v < spray; ++v) {
    auto pfn = a.FaultIn(kAttackerPid, v);
    if (!pfn) break;
    owned[*pfn] = 1;
    attacker_pages.emplace_back(v, *pfn);
  }
  rec.attacker_frames = attacker_pages.size();

  // Victim rows of the chosen parity and the aggressor rows to keep.
  const uint64_t parity = rng.Uniform(2);
  struct Target {
    RowCoord below;
    RowCoord above;
    bool use_below;
    bool use_above;
  };
  std::vector<Target> targets;
  std::vector<uint8_t> keep_row(g.total_banks() * g.rows_per_bank, 0);
  for (uint64_t bank = 0; bank < g.total_banks(); ++bank) {
    const BankCoord bc = mapper.BankFromIndex(bank);
    for (uint64_t row = 1; row + 1 < g.rows_per_bank; ++row) {
      if (row % 2 != parity) continue;
      const bool below = OwnsInRow(a, owned, bank, row - 1);
      const bool above = OwnsInRow(a, owned, bank, row + 1);
      Target t{{bc, row - 1}, {bc, row + 1}, false, false};
      if (cfg.mode == HammerMode::kDoubleSided) {
        if (!(below && above)) continue;
        t.use_below = t.use_above = true;
      } else {
        if (!(below || above)) continue;
        t.use_below = below;
        t.use_above = !below;
      }
      if (t.use_below) keep_row[bank * g.rows_per_bank + row - 1] = 1;
      if (t.use_above) keep_row[bank * g.rows_per_bank + row + 1] = 1;
      targets.push_back(t);
    }
  }
  rec.victim_rows = targets.size();
  for (const auto& [vpage, pfn] : attacker_pages) {
    const uint64_t key = a.BankOf(pfn) * g.rows_per_bank + a.RowOf(pfn);
    if (!keep_row[key]) {
      a.Unmap(kAttackerPid, vpage);
      owned[pfn] = 0;
    }
  }

  // Kernel page-table spray.
  const uint64_t pte_target = static_cast<uint64_t>(
      cfg.pte_fill * static_cast<double>(a.FreeFrames()));
  std::vector<uint8_t> is_pte(a.frames(), 0);
  const AllocRequest pte_request{0, {Requester::kKernel, std::nullopt}};
  for (uint64_t i = 0; i < pte_target; ++i) {
    auto block = a.Alloc(pte_request);
    if (!block) break;
    is_pte[block->first] = 1;
    dram.FillFrame(block->first, kPteFillByte);
    ++rec.pte_pages;
  }

  // Hammer, one refresh epoch per victim row.
  for (const auto& t : targets) {
    if (t.use_below) dram.Activate(t.below, cfg.hammer_count);
    if (t.use_above) dram.Activate(t.above, cfg.hammer_count);
    dram.Refresh();
  }

  for (const FlipEvent& ev : dram.flip_log()) {
    const Pfn pfn = ev.pa / g.page_size;
    if (!tmpl.availability().available(pfn)) {
      ++rec.reserved_flips;
      continue;
    }
    ++rec.flips;
    const FrameMeta& m = a.meta(pfn);
    if (m.state != FrameState::kAllocated) {
      ++rec.unowned_flips;
      continue;
    }
    if (*m.domain == attacker) {
      ++rec.own_domain_flips;
      continue;
    }
    ++rec.cross_domain_flips;
    const unsigned bit_in_entry =
        static_cast<unsigned>(ev.pa % kPteBytes) * 8 + ev.bit;
    if (*m.domain == kKernelDomain && is_pte[pfn] &&
        IsDesignatedPteBit(bit_in_entry)) {
      rec.success = true;
    }
  }
  return rec;
}

uint64_t AttemptSeed(uint64_t campaign_seed, uint64_t index) {
  return HashWords(campaign_seed, index, 0x61747461636bULL);
}

unsigned DefaultThreadCount() {
  if (const char* env = std::getenv("CATT_SIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

AttackResult RunCampaign(const MachineFactory& factory,
                         const ExploitConfig& cfg, unsigned threads) {
  cfg.Validate();
  if (threads == 0) threads = DefaultThreadCount();
  threads = static_cast<unsigned>(
      std::min<uint64_t>(threads, cfg.attempts));

  std::vector<AttemptRecord> records(cfg.attempts);
  std::atomic<uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    try {
      for (uint64_t i = next++; i < cfg.attempts; i = next++) {
        Machine machine = factory();
        records[i] = RunExploit(machine, cfg, AttemptSeed(cfg.seed, i), i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = cfg.attempts;
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  AttackResult result;
  for (const auto& r : records) result.Add(r);
  return result;
}

AttackResult SingleSidedCheck(const MachineFactory& factory,
                              const FaultModel& model, ExploitConfig cfg,
                              unsigned threads) {
  const auto& cells = model.profile().cells;
  const bool any_single = std::any_of(cells.begin(), cells.end(), [](const auto& c) {
    return c.sidedness == Sidedness::kSingleSufficient;
  });
  if (!any_single) {
    throw Error(ErrorCode::kInvalidArgument,
                "profile has no single-sufficient cells");
  }
  cfg.mode = HammerMode::kSingleSided;
  return RunCampaign(factory, cfg, threads);
}

}  // namespace catt
