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

// Attack harness: the offline scan for vulnerable frames and the page-table
// spray privilege-escalation exploit, replayed against a simulated machine.
//
// One exploit attempt:
//   1. A background process grabs all memory it may use and keeps a random
//      background_fraction of it, which randomizes the physical layout.
//   2. The attacker faults in spray_fraction of the remaining free frames.
//   3. Picking a random row parity, the attacker keeps its frames in
//      aggressor rows and releases the frames of the victim rows in between.
//   4. The kernel fills pte_fill of the free memory with page-table pages,
//      each holding 512 eight-byte entries.
//   5. Every victim row is hammered from both sides (or one side in
//      single-sided mode) within one refresh epoch.
//   6. The attempt succeeds if a flip lands in the permission or frame bits
//      of a kernel page-table entry.

#ifndef CATT_ATTACK_HARNESS_H_
#define CATT_ATTACK_HARNESS_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "catt/bcatt.h"
#include "catt/dram_model.h"
#include "catt/fault_model.h"
#include "catt/gcatt_allocator.h"

namespace catt {

enum class Defense { kNone, kBcatt, kGcattSplit, kGcattDynamic, kBoth };

std::string_view DefenseName(Defense d);
std::optional<Defense> ParseDefense(std::string_view name);

struct DefenseConfig {
  Defense defense = Defense::kNone;
  uint64_t guard_rows = 1;
  PhysAddr kernel_base = kDefaultKernelBase;
  bool whole_row_blacklist = false;
};

class Machine;

// Everything about a machine that does not change between attempts.
class MachineTemplate {
 public:
  MachineTemplate(std::shared_ptr<const FaultModel> model,
                  DefenseConfig defense);

  const FaultModel& model() const { return *model_; }
  const AddressMapper& mapper() const { return model_->mapper(); }
  const DefenseConfig& defense() const { return defense_; }
  const Blacklist& blacklist() const { return blacklist_; }
  const MemoryMap& memory_map() const { return map_; }
  const FrameAvailability& availability() const { return availability_; }
  const PartitionPolicy& policy() const { return policy_; }

  // Blacklisted fraction plus the guard-row fraction of the split policy.
  double MemoryOverhead() const;

  std::shared_ptr<const FaultModel> model_ptr() const { return model_; }
  Machine Instantiate() const;

 private:
  std::shared_ptr<const FaultModel> model_;
  DefenseConfig defense_;
  Blacklist blacklist_;
  MemoryMap map_;
  FrameAvailability availability_;
  PartitionPolicy policy_;
  // Built once; machines start from a copy.
  std::shared_ptr<const Allocator> fresh_allocator_;
};

// A simulated machine: allocator plus DRAM contents.
class Machine {
 public:
  Machine(const MachineTemplate& tmpl, Allocator allocator);

  const MachineTemplate& tmpl() const { return *tmpl_; }
  Allocator& allocator() { return allocator_; }
  const Allocator& allocator() const { return allocator_; }
  DramState& dram() { return dram_; }
  const DramState& dram() const { return dram_; }

 private:
  const MachineTemplate* tmpl_;
  Allocator allocator_;
  DramState dram_;
};

struct ScanConfig {
  uint64_t hammer_count = kDefaultHammerThreshold;
  uint8_t pattern = 0xff;
  uint64_t coverage_runs = 1;
};

// Runs the double-sided scan as an unprivileged process that grabs every
// frame it can. Returns the tested frames that showed at least one flip,
// ascending.
std::vector<Pfn> Scan(Machine& machine, const ScanConfig& cfg);

enum class HammerMode { kDoubleSided, kSingleSided };

struct ExploitConfig {
  double spray_fraction = 1.0;
  double background_fraction = 0.0;
  double pte_fill = 1.0;
  uint64_t attempts = 1;
  uint64_t seed = 0;
  uint64_t hammer_count = kDefaultHammerThreshold;
  HammerMode mode = HammerMode::kDoubleSided;

  // Throws kInvalidArgument.
  void Validate() const;
};

struct AttemptRecord {
  uint64_t index = 0;
  uint64_t seed = 0;
  bool success = false;
  uint64_t flips = 0;
  uint64_t cross_domain_flips = 0;
  uint64_t own_domain_flips = 0;
  // Flips in frames nobody owns: free frames and guard rows.
  uint64_t unowned_flips = 0;
  // Flips in memory withheld from the OS; not visible to anyone.
  uint64_t reserved_flips = 0;
  uint64_t attacker_frames = 0;
  uint64_t pte_pages = 0;
  uint64_t victim_rows = 0;

  bool operator==(const AttemptRecord&) const = default;
};

struct AttackResult {
  uint64_t attempts = 0;
  uint64_t successes = 0;
  uint64_t flips_total = 0;
  uint64_t cross_domain_flips = 0;
  uint64_t own_domain_flips = 0;
  uint64_t unowned_flips = 0;
  uint64_t reserved_flips = 0;
  std::vector<AttemptRecord> log;

  double SuccessRate() const {
    return attempts ? static_cast<double>(successes) / attempts : 0.0;
  }
  void Add(const AttemptRecord& rec);

  bool operator==(const AttackResult&) const = default;
};

// PTE bits whose corruption hands control to the attacker: present,
// writable, user (bits 0-2) and the frame number (bits 12-51).
bool IsDesignatedPteBit(unsigned bit_in_entry);

// One attempt on a fresh machine. Allocation failures end the attempt
// early; they are not errors.
AttemptRecord RunExploit(Machine& machine, const ExploitConfig& cfg,
                         uint64_t attempt_seed, uint64_t index = 0);

using MachineFactory = std::function<Machine()>;

// Seed of attempt `index` in a campaign seeded with `campaign_seed`.
uint64_t AttemptSeed(uint64_t campaign_seed, uint64_t index);

// cfg.attempts independent attempts, each on its own machine. Runs on up to
// `threads` workers (0 = CATT_SIM_THREADS or the hardware concurrency); the
// result does not depend on the thread count.
AttackResult RunCampaign(const MachineFactory& factory,
                         const ExploitConfig& cfg, unsigned threads = 0);

// RunCampaign in single-sided mode. Throws kInvalidArgument if the profile
// has no single-sufficient cell.
AttackResult SingleSidedCheck(const MachineFactory& factory,
                              const FaultModel& model, ExploitConfig cfg,
                              unsigned threads = 0);

// Worker count from CATT_SIM_THREADS, else the hardware concurrency.
unsigned DefaultThreadCount();

}  // namespace catt

#endif  // CATT_ATTACK_HARNESS_H_
