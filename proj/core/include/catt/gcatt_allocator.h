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

// Buddy allocator for physical page frames with per-frame security-domain
// metadata.
//
// Every frame has a FrameMeta entry (indexed by PFN) that records whether it
// is free and which security domain owns it. Before a block is handed out it
// has to pass the partitioning policy; a failing block is skipped and the
// search continues, so a request that only non-compliant memory could serve
// fails with out-of-memory instead.
//
// Policies:
//   none                no restriction.
//   kernel-user-split   every bank is cut at split_row. The kernel owns one
//                       part, everyone else the other, and guard_rows rows
//                       above the cut belong to nobody.
//   dynamic-adjacency   a frame may not be handed to a domain if a frame of
//                       a different domain is allocated within guard_rows
//                       rows of it in the same bank.

#ifndef CATT_GCATT_ALLOCATOR_H_
#define CATT_GCATT_ALLOCATOR_H_

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catt/bcatt.h"
#include "catt/dram_model.h"

namespace catt {

inline constexpr unsigned kMaxOrder = 11;
inline constexpr PhysAddr kDefaultKernelBase = PhysAddr{1} << 20;

struct SecurityDomain {
  uint32_t id = 0;

  auto operator<=>(const SecurityDomain&) const = default;
};

inline constexpr SecurityDomain kKernelDomain{0};
inline constexpr SecurityDomain kUserDomain{1};
// Per-process domains are kFirstProcessDomain + pid.
inline constexpr uint32_t kFirstProcessDomain = 2;

enum class Requester { kKernel, kUser };

// What the caller tells the allocator about itself.
struct AllocFlags {
  Requester requester = Requester::kKernel;
  std::optional<uint32_t> pid;
};

struct AllocRequest {
  unsigned order = 0;
  AllocFlags flags;
};

enum class PolicyKind { kNone, kKernelUserSplit, kDynamicAdjacency };

std::string_view PolicyName(PolicyKind kind);

struct PartitionPolicy {
  PolicyKind kind = PolicyKind::kNone;
  uint64_t guard_rows = 1;
  // Only used by the split policy.
  PhysAddr kernel_base = kDefaultKernelBase;
  // Defaults to rows_per_bank / 2.
  std::optional<uint64_t> split_row;

  static PartitionPolicy None() { return {}; }
  static PartitionPolicy KernelUserSplit(
      uint64_t guard_rows = 1, PhysAddr kernel_base = kDefaultKernelBase,
      std::optional<uint64_t> split_row = std::nullopt) {
    return {PolicyKind::kKernelUserSplit, guard_rows, kernel_base, split_row};
  }
  static PartitionPolicy DynamicAdjacency(uint64_t guard_rows = 1) {
    return {PolicyKind::kDynamicAdjacency, guard_rows, kDefaultKernelBase,
            std::nullopt};
  }
};

// Kernel requests map to the kernel domain. User requests map to the user
// domain, or to a per-process domain under dynamic-adjacency when a pid is
// given.
SecurityDomain DeriveDomain(const AllocFlags& flags,
                            const PartitionPolicy& policy);

// Fraction of memory the policy withholds permanently: guard_rows /
// rows_per_bank for the split policy, 0 otherwise.
double GcattOverhead(const PartitionPolicy& policy, const DramGeometry& g);
// Three decimals, e.g. "0.003%".
std::string FormatGuardOverhead(double fraction);

struct Block {
  Pfn first = 0;
  unsigned order = 0;

  uint64_t frames() const { return uint64_t{1} << order; }
  auto operator<=>(const Block&) const = default;
};

enum class FrameState : uint8_t { kFree, kAllocated, kUnavailable };

struct FrameMeta {
  FrameState state = FrameState::kUnavailable;
  std::optional<SecurityDomain> domain;
  // Order of the block this frame heads, or -1 inside a block.
  int8_t head_order = -1;

  bool operator==(const FrameMeta&) const = default;
};

// Row split resolved against a geometry.
struct SplitLayout {
  uint64_t split_row = 0;
  uint64_t guard_rows = 0;
  uint64_t rows_per_bank = 0;
  bool kernel_in_lower_part = true;

  bool Allowed(uint64_t row, SecurityDomain domain) const;
  bool IsGuard(uint64_t row) const {
    return row >= split_row && row < split_row + guard_rows;
  }
};

struct ReplayStats {
  uint64_t operations = 0;
  uint64_t mismatches = 0;
  std::vector<std::string> audit_failures;
};

class Allocator {
 public:
  // Throws kInvalidArgument if the policy is inconsistent with the geometry
  // or guard_rows < blast_radius, kGeometryMismatch if the availability does
  // not match the geometry.
  Allocator(const FrameAvailability& availability, AddressMapper mapper,
            PartitionPolicy policy, unsigned blast_radius = 1,
            unsigned max_order = kMaxOrder);

  const AddressMapper& mapper() const { return mapper_; }
  const PartitionPolicy& policy() const { return policy_; }
  const std::optional<SplitLayout>& split() const { return split_; }
  unsigned max_order() const { return max_order_; }

  // nullopt means out of memory.
  std::optional<Block> Alloc(const AllocRequest& request);
  std::optional<Block> AllocForDomain(unsigned order, SecurityDomain domain);
  // Throws kDoubleFree or kNotAllocated.
  void Free(const Block& block);

  // Whether `candidate` may be handed to `domain`. Does not look at the
  // candidate's own state.
  bool PolicyCheck(const Block& candidate, SecurityDomain domain) const;

  // Simulated page-fault path: maps a fresh order-0 frame for a registered
  // process. Repeated faults on the same page return the existing frame.
  void RegisterProcess(uint32_t pid);
  std::optional<Pfn> FaultIn(uint32_t pid, uint64_t virtual_page);
  void Unmap(uint32_t pid, uint64_t virtual_page);
  const std::map<uint64_t, Pfn>& PageTable(uint32_t pid) const;

  uint64_t frames() const { return meta_.size(); }
  const FrameMeta& meta(Pfn pfn) const { return meta_.at(pfn); }
  const std::set<Pfn>& FreeList(unsigned order) const {
    return free_.at(order);
  }
  uint64_t FreeFrames() const;
  uint64_t RowOf(Pfn pfn) const { return row_of_[pfn]; }
  uint64_t BankOf(Pfn pfn) const { return bank_of_[pfn]; }
  // Frames of the row `row` in dense bank `bank`.
  std::span<const Pfn> FramesOfRow(uint64_t bank, uint64_t row) const;

  // Empty when the buddy structure is consistent.
  std::vector<std::string> AuditBuddy() const;
  // Empty when no two frames of different domains are within guard_rows
  // rows of each other (and, for the split policy, every frame is in its
  // domain's part). Always empty for policy none.
  std::vector<std::string> AuditIsolation() const;

  // Free lists, frame metadata and page tables are identical.
  bool SameState(const Allocator& other) const;

  // Appends "alloc <order> <domain> -> <pfn>|OOM" and "free <pfn> <order>"
  // lines. Pass nullptr to stop tracing.
  void set_trace(std::ostream* trace) { trace_ = trace; }

 private:
  void AddFreeRange(Pfn first, unsigned order,
                    const std::vector<uint64_t>& prefix);
  void TakeFromFreeBlock(Pfn head, unsigned head_order, Pfn target,
                         unsigned order);
  // Same partition class: both kernel or both non-kernel under the split
  // policy; identical domain otherwise.
  bool Compatible(SecurityDomain a, SecurityDomain b) const;
  bool FramePasses(Pfn pfn, SecurityDomain domain) const;

  AddressMapper mapper_;
  PartitionPolicy policy_;
  std::optional<SplitLayout> split_;
  unsigned max_order_;
  std::vector<FrameMeta> meta_;
  std::vector<std::set<Pfn>> free_;
  std::vector<uint32_t> row_of_;
  std::vector<uint32_t> bank_of_;
  std::vector<Pfn> row_frames_;
  std::map<uint32_t, std::map<uint64_t, Pfn>> page_tables_;
  std::ostream* trace_ = nullptr;
};

// Re-executes a trace against `allocator`, counting operations whose outcome
// differs from the logged one, and audits every `audit_every` operations and
// at the end.
ReplayStats ReplayTrace(std::istream& trace, Allocator& allocator,
                        uint64_t audit_every = 1000);

}  // namespace catt

#endif  // CATT_GCATT_ALLOCATOR_H_
