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

#include "catt/gcatt_allocator.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "catt/error.h"

namespace catt {
namespace {

std::string DomainText(const std::optional<SecurityDomain>& d) {
  return d ? std::to_string(d->id) : "none";
}

}  // namespace

std::string_view PolicyName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kNone: return "none";
    case PolicyKind::kKernelUserSplit: return "kernel-user-split";
    case PolicyKind::kDynamicAdjacency: return "dynamic-adjacency";
  }
  return "unknown";
}

SecurityDomain DeriveDomain(const AllocFlags& flags,
                            const PartitionPolicy& policy) {
  if (flags.requester == Requester::kKernel) return kKernelDomain;
  if (policy.kind == PolicyKind::kDynamicAdjacency && flags.pid) {
    return SecurityDomain{kFirstProcessDomain + *flags.pid};
  }
  return kUserDomain;
}

double GcattOverhead(const PartitionPolicy& policy, const DramGeometry& g) {
  if (policy.kind != PolicyKind::kKernelUserSplit) return 0.0;
  return static_cast<double>(policy.guard_rows) /
         static_cast<double>(g.rows_per_bank);
}

std::string FormatGuardOverhead(double fraction) {
  return FormatPercent(fraction, 3);
}

bool SplitLayout::Allowed(uint64_t row, SecurityDomain domain) const {
  const bool lower = row < split_row;
  const bool upper = row >= split_row + guard_rows && row < rows_per_bank;
  const bool kernel = domain == kKernelDomain;
  return kernel == kernel_in_lower_part ? lower : upper;
}

Allocator::Allocator(const FrameAvailability& availability,
                     AddressMapper mapper, PartitionPolicy policy,
                     unsigned blast_radius, unsigned max_order)
    : mapper_(std::move(mapper)), policy_(policy), max_order_(max_order) {
  const DramGeometry& g = mapper_.geometry();
  if (availability.frames() != g.total_frames()) {
    throw Error(ErrorCode::kGeometryMismatch,
                "frame availability does not match the geometry");
  }
  if (max_order_ > 30) {
    throw Error(ErrorCode::kInvalidArgument, "max_order too large");
  }
  if (policy_.kind != PolicyKind::kNone) {
    if (policy_.guard_rows < 1 || policy_.guard_rows < blast_radius) {
      throw Error(ErrorCode::kInvalidArgument,
                  "guard_rows must be >= 1 and >= the blast radius");
    }
  }
  if (policy_.kind == PolicyKind::kKernelUserSplit) {
    SplitLayout s;
    s.rows_per_bank = g.rows_per_bank;
    s.guard_rows = policy_.guard_rows;
    s.split_row = policy_.split_row.value_or(g.rows_per_bank / 2);
    if (s.split_row == 0 || s.split_row + s.guard_rows >= g.rows_per_bank) {
      throw Error(ErrorCode::kInvalidArgument,
                  "split leaves one part of the bank empty");
    }
    if (policy_.kernel_base >= g.total_bytes()) {
      throw Error(ErrorCode::kInvalidArgument, "kernel_base beyond memory");
    }
    s.kernel_in_lower_part = mapper_.Decode(policy_.kernel_base).row < s.split_row;
    split_ = s;
  }

  const uint64_t n = g.total_frames();
  meta_.assign(n, FrameMeta{});
  free_.assign(max_order_ + 1, {});
  row_of_.resize(n);
  bank_of_.resize(n);
  row_frames_.assign(n, 0);
  std::vector<uint32_t> fill(g.total_banks() * g.rows_per_bank, 0);
  for (Pfn p = 0; p < n; ++p) {
    const DramLocation loc = mapper_.Decode(p * g.page_size);
    row_of_[p] = static_cast<uint32_t>(loc.row);
    bank_of_[p] = static_cast<uint32_t>(mapper_.BankIndex(loc.bank_coord()));
    const uint64_t key = bank_of_[p] * g.rows_per_bank + loc.row;
    row_frames_[key * g.pages_per_row + fill[key]++] = p;
  }

  std::vector<uint64_t> prefix(n + 1, 0);
  for (Pfn p = 0; p < n; ++p) {
    const bool ok = availability.available(p);
    prefix[p + 1] = prefix[p] + (ok ? 1 : 0);
    if (ok) meta_[p].state = FrameState::kFree;
  }
  const uint64_t top = uint64_t{1} << max_order_;
  for (Pfn start = 0; start < n; start += top) {
    AddFreeRange(start, max_order_, prefix);
  }
}

void Allocator::AddFreeRange(Pfn first, unsigned order,
                             const std::vector<uint64_t>& prefix) {
  const uint64_t n = meta_.size();
  if (first >= n) return;
  const uint64_t size = uint64_t{1} << order;
  if (first + size <= n && prefix[first + size] - prefix[first] == size) {
    free_[order].insert(first);
    meta_[first].head_order = static_cast<int8_t>(order);
    return;
  }
  if (order == 0) return;
  AddFreeRange(first, order - 1, prefix);
  AddFreeRange(first + size / 2, order - 1, prefix);
}

std::span<const Pfn> Allocator::FramesOfRow(uint64_t bank, uint64_t row) const {
  const DramGeometry& g = mapper_.geometry();
  const uint64_t key = bank * g.rows_per_bank + row;
  return std::span<const Pfn>(row_frames_).subspan(key * g.pages_per_row,
                                                   g.pages_per_row);
}

bool Allocator::Compatible(SecurityDomain a, SecurityDomain b) const {
  if (policy_.kind == PolicyKind::kKernelUserSplit) {
    return (a == kKernelDomain) == (b == kKernelDomain);
  }
  return a == b;
}

bool Allocator::FramePasses(Pfn pfn, SecurityDomain domain) const {
  switch (policy_.kind) {
    case PolicyKind::kNone:
      return true;
    case PolicyKind::kKernelUserSplit:
      return split_->Allowed(row_of_[pfn], domain);
    case PolicyKind::kDynamicAdjacency: {
      const int64_t rows = static_cast<int64_t>(mapper_.geometry().rows_per_bank);
      const int64_t r = row_of_[pfn];
      const int64_t guard = static_cast<int64_t>(policy_.guard_rows);
      for (int64_t nr = std::max<int64_t>(0, r - guard);
           nr <= std::min(rows - 1, r + guard); ++nr) {
        for (Pfn other : FramesOfRow(bank_of_[pfn], nr)) {
          const FrameMeta& m = meta_[other];
          if (m.state == FrameState::kAllocated && *m.domain != domain) {
            return false;
          }
        }
      }
      return true;
    }
  }
  return false;
}

bool Allocator::PolicyCheck(const Block& candidate,
                            SecurityDomain domain) const {
  if (candidate.first + candidate.frames() > meta_.size()) return false;
  for (Pfn p = candidate.first; p < candidate.first + candidate.frames(); ++p) {
    if (!FramePasses(p, domain)) return false;
  }
  return true;
}

void Allocator::TakeFromFreeBlock(Pfn head, unsigned head_order, Pfn target,
                                  unsigned order) {
  free_[head_order].erase(head);
  meta_[head].head_order = -1;
  unsigned o = head_order;
  while (o > order) {
    --o;
    const uint64_t half = uint64_t{1} << o;
    if (target < head + half) {
      free_[o].insert(head + half);
      meta_[head + half].head_order = static_cast<int8_t>(o);
    } else {
      free_[o].insert(head);
      meta_[head].head_order = static_cast<int8_t>(o);
      head += half;
    }
  }
}

std::optional<Block> Allocator::Alloc(const AllocRequest& request) {
  return AllocForDomain(request.order, DeriveDomain(request.flags, policy_));
}

std::optional<Block> Allocator::AllocForDomain(unsigned order,
                                               SecurityDomain domain) {
  if (order > max_order_) {
    throw Error(ErrorCode::kInvalidArgument, "order above max_order");
  }
  std::optional<Block> found;
  const uint64_t want = uint64_t{1} << order;
  for (unsigned o = order; o <= max_order_ && !found; ++o) {
    for (Pfn head : free_[o]) {
      const uint64_t size = uint64_t{1} << o;
      for (Pfn sub = head; sub < head + size; sub += want) {
        if (PolicyCheck({sub, order}, domain)) {
          TakeFromFreeBlock(head, o, sub, order);
          found = Block{sub, order};
          break;
        }
      }
      if (found) break;
    }
  }
  if (found) {
    for (Pfn p = found->first; p < found->first + want; ++p) {
      meta_[p].state = FrameState::kAllocated;
      meta_[p].domain = domain;
      meta_[p].head_order = -1;
    }
    meta_[found->first].head_order = static_cast<int8_t>(order);
  }
  if (trace_) {
    *trace_ << "alloc " << order << ' ' << domain.id << " -> ";
    if (found) {
      *trace_ << found->first << '\n';
    } else {
      *trace_ << "OOM\n";
    }
  }
  return found;
}

void Allocator::Free(const Block& block) {
  const uint64_t size = block.frames();
  if (block.order > max_order_ || block.first % size != 0 ||
      block.first + size > meta_.size()) {
    throw Error(ErrorCode::kNotAllocated, "not a valid block");
  }
  FrameMeta& head = meta_[block.first];
  if (head.state == FrameState::kFree) {
    throw Error(ErrorCode::kDoubleFree,
                "frame " + std::to_string(block.first) + " is already free");
  }
  if (head.state != FrameState::kAllocated ||
      head.head_order != static_cast<int8_t>(block.order)) {
    throw Error(ErrorCode::kNotAllocated,
                "no allocated block of order " + std::to_string(block.order) +
                    " at frame " + std::to_string(block.first));
  }
  for (Pfn p = block.first; p < block.first + size; ++p) {
    meta_[p].state = FrameState::kFree;
    meta_[p].domain.reset();
    meta_[p].head_order = -1;
  }
  Pfn first = block.first;
  unsigned o = block.order;
  while (o < max_order_) {
    const Pfn buddy = first ^ (Pfn{1} << o);
    if (buddy >= meta_.size() || meta_[buddy].state != FrameState::kFree ||
        meta_[buddy].head_order != static_cast<int8_t>(o)) {
      break;
    }
    free_[o].erase(buddy);
    meta_[buddy].head_order = -1;
    first = std::min(first, buddy);
    ++o;
  }
  free_[o].insert(first);
  meta_[first].head_order = static_cast<int8_t>(o);
  if (trace_) *trace_ << "free " << block.first << ' ' << block.order << '\n';
}

void Allocator::RegisterProcess(uint32_t pid) { page_tables_[pid]; }

std::optional<Pfn> Allocator::FaultIn(uint32_t pid, uint64_t virtual_page) {
  auto it = page_tables_.find(pid);
  if (it == page_tables_.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "process " + std::to_string(pid) + " is not registered");
  }
  auto mapped = it->second.find(virtual_page);
  if (mapped != it->second.end()) return mapped->second;
  const AllocFlags flags{Requester::kUser, pid};
  auto block = AllocForDomain(0, DeriveDomain(flags, policy_));
  if (!block) return std::nullopt;
  it->second.emplace(virtual_page, block->first);
  return block->first;
}

void Allocator::Unmap(uint32_t pid, uint64_t virtual_page) {
  auto it = page_tables_.find(pid);
  if (it == page_tables_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown process");
  }
  auto mapped = it->second.find(virtual_page);
  if (mapped == it->second.end()) {
    throw Error(ErrorCode::kNotAllocated, "virtual page not mapped");
  }
  const Pfn pfn = mapped->second;
  it->second.erase(mapped);
  Free({pfn, 0});
}

const std::map<uint64_t, Pfn>& Allocator::PageTable(uint32_t pid) const {
  auto it = page_tables_.find(pid);
  if (it == page_tables_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown process");
  }
  return it->second;
}

uint64_t Allocator::FreeFrames() const {
  uint64_t sum = 0;
  for (unsigned o = 0; o <= max_order_; ++o) {
    sum += free_[o].size() << o;
  }
  return sum;
}

std::vector<std::string> Allocator::AuditBuddy() const {
  std::vector<std::string> issues;
  auto report = [&](const std::string& s) {
    if (issues.size() < 32) issues.push_back(s);
  };
  const uint64_t n = meta_.size();
  std::vector<uint8_t> covered(n, 0);
  for (unsigned o = 0; o <= max_order_; ++o) {
    const uint64_t size = uint64_t{1} << o;
    for (Pfn head : free_[o]) {
      if (head % size != 0 || head + size > n) {
        report("free block " + std::to_string(head) + " misaligned");
        continue;
      }
      if (meta_[head].head_order != static_cast<int8_t>(o)) {
        report("free block " + std::to_string(head) + " head order mismatch");
      }
      for (Pfn p = head; p < head + size; ++p) {
        if (covered[p]++) report("frame " + std::to_string(p) + " in two blocks");
        if (meta_[p].state != FrameState::kFree) {
          report("frame " + std::to_string(p) + " listed free but not free");
        }
      }
      if (o < max_order_) {
        const Pfn buddy = head ^ size;
        if (buddy < n && free_[o].count(buddy)) {
          report("buddies " + std::to_string(head) + "/" +
                 std::to_string(buddy) + " not coalesced");
        }
      }
    }
  }
  for (Pfn p = 0; p < n; ++p) {
    const FrameMeta& m = meta_[p];
    switch (m.state) {
      case FrameState::kFree:
        if (!covered[p]) report("free frame " + std::to_string(p) + " unlisted");
        if (m.domain) report("free frame " + std::to_string(p) + " has a domain");
        break;
      case FrameState::kAllocated:
        if (!m.domain) {
          report("allocated frame " + std::to_string(p) + " without domain");
        }
        if (m.head_order >= 0) {
          const uint64_t size = uint64_t{1} << m.head_order;
          if (p % size != 0 || p + size > n) {
            report("allocated block " + std::to_string(p) + " misaligned");
            break;
          }
          for (Pfn q = p; q < p + size; ++q) {
            if (meta_[q].state != FrameState::kAllocated ||
                meta_[q].domain != m.domain || (q != p && meta_[q].head_order >= 0)) {
              report("allocated block " + std::to_string(p) + " inconsistent");
              break;
            }
          }
        }
        break;
      case FrameState::kUnavailable:
        if (covered[p]) report("unavailable frame " + std::to_string(p) + " listed");
        if (m.domain) report("unavailable frame " + std::to_string(p) + " owned");
        break;
    }
  }
  return issues;
}

std::vector<std::string> Allocator::AuditIsolation() const {
  std::vector<std::string> issues;
  if (policy_.kind == PolicyKind::kNone) return issues;
  const int64_t rows = static_cast<int64_t>(mapper_.geometry().rows_per_bank);
  const int64_t guard = static_cast<int64_t>(policy_.guard_rows);
  for (Pfn p = 0; p < meta_.size() && issues.size() < 32; ++p) {
    const FrameMeta& m = meta_[p];
    if (m.state != FrameState::kAllocated) continue;
    if (split_ && !split_->Allowed(row_of_[p], *m.domain)) {
      issues.push_back("frame " + std::to_string(p) + " of domain " +
                       DomainText(m.domain) + " outside its part");
    }
    const int64_t r = row_of_[p];
    for (int64_t nr = std::max<int64_t>(0, r - guard);
         nr <= std::min(rows - 1, r + guard); ++nr) {
      for (Pfn q : FramesOfRow(bank_of_[p], nr)) {
        const FrameMeta& o = meta_[q];
        if (o.state == FrameState::kAllocated &&
            !Compatible(*o.domain, *m.domain)) {
          issues.push_back("frames " + std::to_string(p) + " and " +
                           std::to_string(q) + " of domains " +
                           DomainText(m.domain) + "/" + DomainText(o.domain) +
                           " within guard distance");
        }
      }
    }
  }
  return issues;
}

bool Allocator::SameState(const Allocator& other) const {
  return meta_ == other.meta_ && free_ == other.free_ &&
         page_tables_ == other.page_tables_;
}

ReplayStats ReplayTrace(std::istream& trace, Allocator& allocator,
                        uint64_t audit_every) {
  ReplayStats stats;
  auto audit = [&] {
    for (auto& s : allocator.AuditBuddy()) stats.audit_failures.push_back(s);
    for (auto& s : allocator.AuditIsolation()) stats.audit_failures.push_back(s);
  };
  std::string line;
  while (std::getline(trace, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string op;
    in >> op;
    if (op == "alloc") {
      unsigned order = 0;
      uint32_t domain = 0;
      std::string arrow, result;
      if (!(in >> order >> domain >> arrow >> result) || arrow != "->") {
        throw Error(ErrorCode::kParseError, "trace: bad line '" + line + "'");
      }
      auto got = allocator.AllocForDomain(order, SecurityDomain{domain});
      const std::string got_text = got ? std::to_string(got->first) : "OOM";
      if (got_text != result) ++stats.mismatches;
    } else if (op == "free") {
      Pfn pfn = 0;
      unsigned order = 0;
      if (!(in >> pfn >> order)) {
        throw Error(ErrorCode::kParseError, "trace: bad line '" + line + "'");
      }
      try {
        allocator.Free({pfn, order});
      } catch (const Error&) {
        ++stats.mismatches;
      }
    } else {
      throw Error(ErrorCode::kParseError, "trace: unknown op '" + op + "'");
    }
    ++stats.operations;
    if (audit_every && stats.operations % audit_every == 0) audit();
  }
  audit();
  return stats;
}

}  // namespace catt
