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

#include "cli.h"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "catt/attack_harness.h"
#include "catt/bcatt.h"
#include "catt/digest.h"
#include "catt/error.h"
#include "catt/gcatt_allocator.h"
#include "catt/io.h"
#include "catt/rng.h"
#include "catt/scenario.h"

namespace catt::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string geometry;
  std::string profile;
  std::string scenario;
  std::string map;
  std::string out;
  std::string replay;
  std::vector<std::string> scan_files;
  std::vector<std::string> results;
  std::optional<uint64_t> seed;
  std::optional<std::string> defense;
  std::optional<uint64_t> guard_rows;
  std::optional<uint64_t> hammer_count;
  std::optional<uint64_t> attempts;
  uint64_t ops = 100000;
};

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
      return kExitParse;
    case ErrorCode::kDigestMismatch:
    case ErrorCode::kGeometryMismatch:
    case ErrorCode::kPfnOutOfRange:
      return kExitMismatch;
    default:
      return kExitFailure;
  }
}

void RequireInput(const std::string& path, const char* flag) {
  if (path.empty()) {
    throw Error(ErrorCode::kParseError, std::string(flag) + " is required");
  }
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kParseError, "cannot read " + path);
  }
}

void RequireOutput(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::kParseError, "--out is required");
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec)) {
    throw Error(ErrorCode::kParseError,
                "output directory does not exist: " + parent.string());
  }
}

std::string ManifestPath(const std::string& out) {
  return out + ".manifest.json";
}

Defense DefenseFromFlag(const std::string& name) {
  auto d = ParseDefense(name);
  if (!d) throw Error(ErrorCode::kParseError, "unknown defense " + name);
  return *d;
}

int CmdScan(const Options& o, std::ostream& out) {
  if (o.scenario.empty()) {
    RequireInput(o.geometry, "--geometry");
    RequireInput(o.profile, "--profile");
  } else {
    RequireInput(o.scenario, "--scenario");
  }
  RequireOutput(o.out);

  std::shared_ptr<const FaultModel> model;
  DefenseConfig defense;
  ScanConfig scan;
  if (!o.scenario.empty()) {
    Scenario s = LoadScenario(o.scenario);
    model = s.model;
    defense = s.defense;
    scan = s.scan;
    if (o.seed) {
      FaultParams p = model->params();
      p.seed = *o.seed;
      model = std::make_shared<const FaultModel>(model->mapper(),
                                                 model->profile(), p);
    }
  } else {
    AddressMapper mapper = LoadGeometryConfig(o.geometry);
    VulnerabilityProfile profile = LoadProfile(o.profile, mapper);
    model = std::make_shared<const FaultModel>(
        mapper, std::move(profile), FaultParams{o.seed.value_or(0), 1});
  }
  if (o.defense) defense.defense = DefenseFromFlag(*o.defense);
  if (o.guard_rows) defense.guard_rows = *o.guard_rows;
  if (o.hammer_count) scan.hammer_count = *o.hammer_count;

  RunManifest manifest;
  manifest.started_at = UtcTimestamp();
  manifest.geometry_digest = model->mapper().Digest();
  manifest.profile_digest = ProfileDigest(model->profile());
  manifest.seed = model->params().seed;
  manifest.defense = std::string(DefenseName(defense.defense));

  MachineTemplate tmpl(model, defense);
  Machine machine = tmpl.Instantiate();
  std::vector<Pfn> victims = Scan(machine, scan);
  manifest.finished_at = UtcTimestamp();

  WriteTextFile(o.out, BlacklistToText(Blacklist{victims}));
  WriteTextFile(ManifestPath(o.out), ManifestToJson(manifest));
  out << victims.size() << " victim frames found (defense "
      << manifest.defense << ")\n";
  return kExitOk;
}

int CmdBlacklist(const Options& o, std::ostream& out) {
  RequireInput(o.geometry, "--geometry");
  if (o.scan_files.empty()) {
    throw Error(ErrorCode::kParseError, "--scan is required");
  }
  for (const auto& f : o.scan_files) RequireInput(f, "--scan");
  if (!o.map.empty()) RequireInput(o.map, "--map");
  RequireOutput(o.out);

  RunManifest manifest;
  manifest.started_at = UtcTimestamp();
  AddressMapper mapper = LoadGeometryConfig(o.geometry);
  const DramGeometry& g = mapper.geometry();
  Blacklist blacklist;
  for (const auto& f : o.scan_files) {
    blacklist.Merge(ParseBlacklist(ReadTextFile(f), g.total_frames()));
  }
  MemoryMap base = o.map.empty() ? MemoryMap::AllUsable(g)
                                 : ParseMemoryMap(ReadTextFile(o.map), g);
  MemoryMap extended = ExtendMap(base, blacklist, g);
  const OverheadReport report = MakeOverheadReport(blacklist, g);

  manifest.geometry_digest = mapper.Digest();
  manifest.profile_digest = HexDigest(Fnv1a64(BlacklistToText(blacklist)));
  manifest.defense = std::string(DefenseName(Defense::kBcatt));
  manifest.finished_at = UtcTimestamp();
  WriteTextFile(o.out, MemoryMapToJson(extended));
  WriteTextFile(ManifestPath(o.out), ManifestToJson(manifest));

  out << OverheadTable({{"this", report}});
  out << "memory map entries: " << extended.original_entries() << " -> "
      << extended.entry_count();
  if (extended.entry_count() > kLegacyMemoryMapEntries) {
    out << " (exceeds the legacy limit of " << kLegacyMemoryMapEntries << ")";
  }
  out << '\n';
  return kExitOk;
}

int CmdAllocSim(const Options& o, std::ostream& out) {
  RequireInput(o.geometry, "--geometry");
  if (!o.map.empty()) RequireInput(o.map, "--map");
  if (!o.replay.empty()) RequireInput(o.replay, "--replay");
  if (!o.out.empty()) RequireOutput(o.out);

  AddressMapper mapper = LoadGeometryConfig(o.geometry);
  const DramGeometry& g = mapper.geometry();
  const FrameAvailability avail =
      o.map.empty() ? FrameAvailability(g.total_frames(), true)
                    : ApplyMap(ParseMemoryMap(ReadTextFile(o.map), g), g);
  const Defense defense = o.defense ? DefenseFromFlag(*o.defense) : Defense::kNone;
  const uint64_t guard = o.guard_rows.value_or(1);
  PartitionPolicy policy = PartitionPolicy::None();
  if (defense == Defense::kGcattSplit || defense == Defense::kBoth) {
    policy = PartitionPolicy::KernelUserSplit(guard);
  } else if (defense == Defense::kGcattDynamic) {
    policy = PartitionPolicy::DynamicAdjacency(guard);
  }
  Allocator alloc(avail, mapper, policy);

  if (!o.replay.empty()) {
    std::istringstream trace(ReadTextFile(o.replay));
    ReplayStats stats = ReplayTrace(trace, alloc);
    out << "replayed " << stats.operations << " operations, "
        << stats.mismatches << " mismatches, " << stats.audit_failures.size()
        << " audit failures\n";
    for (const auto& f : stats.audit_failures) out << "  " << f << '\n';
    return stats.mismatches == 0 && stats.audit_failures.empty() ? kExitOk
                                                                  : kExitFailure;
  }

  std::ostringstream trace;
  alloc.set_trace(&trace);
  Rng rng(o.seed.value_or(0));
  std::vector<Block> live;
  uint64_t allocs = 0, ooms = 0, frees = 0;
  std::vector<std::string> failures;
  for (uint64_t i = 0; i < o.ops; ++i) {
    if (live.empty() || rng.Bernoulli(0.55)) {
      AllocRequest req;
      req.order = rng.Bernoulli(0.7) ? 0 : static_cast<unsigned>(rng.Uniform(4));
      if (rng.Bernoulli(0.3)) {
        req.flags = {Requester::kKernel, std::nullopt};
      } else {
        req.flags = {Requester::kUser, static_cast<uint32_t>(rng.Uniform(4))};
      }
      if (auto b = alloc.Alloc(req)) {
        live.push_back(*b);
        ++allocs;
      } else {
        ++ooms;
      }
    } else {
      const size_t idx = rng.Uniform(live.size());
      alloc.Free(live[idx]);
      live[idx] = live.back();
      live.pop_back();
      ++frees;
    }
    if ((i + 1) % 1000 == 0 || i + 1 == o.ops) {
      for (auto& f : alloc.AuditBuddy()) failures.push_back(f);
      for (auto& f : alloc.AuditIsolation()) failures.push_back(f);
    }
  }
  alloc.set_trace(nullptr);
  if (!o.out.empty()) WriteTextFile(o.out, trace.str());

  out << "policy " << PolicyName(policy.kind) << ": " << allocs << " allocs, "
      << ooms << " OOM, " << frees << " frees, " << alloc.FreeFrames()
      << " free frames\n";
  out << "guard-row overhead " << FormatGuardOverhead(GcattOverhead(policy, g))
      << '\n';
  out << "audit failures: " << failures.size() << '\n';
  for (const auto& f : failures) out << "  " << f << '\n';
  return failures.empty() ? kExitOk : kExitFailure;
}

int CmdAttack(const Options& o, std::ostream& out) {
  RequireInput(o.scenario, "--scenario");
  RequireOutput(o.out);
  Scenario s = LoadScenario(o.scenario);
  if (o.defense) s.defense.defense = DefenseFromFlag(*o.defense);
  if (o.guard_rows) s.defense.guard_rows = *o.guard_rows;
  if (o.seed) s.exploit.seed = *o.seed;
  if (o.attempts) s.exploit.attempts = *o.attempts;
  s.exploit.Validate();

  ScenarioResult r = RunScenario(s);
  const std::string table = AttackTable({r});
  WriteTextFile(o.out, ResultToJson(r));
  WriteTextFile(o.out + ".txt", table);
  out << table;
  return kExitOk;
}

int CmdReport(const Options& o, std::ostream& out) {
  if (o.results.empty()) {
    throw Error(ErrorCode::kParseError, "at least one result file is required");
  }
  for (const auto& f : o.results) RequireInput(f, "result");
  if (!o.out.empty()) RequireOutput(o.out);
  std::vector<ScenarioResult> results;
  for (const auto& f : o.results) results.push_back(ParseResult(ReadTextFile(f)));
  for (const auto& r : results) {
    if (r.manifest.geometry_digest != results.front().manifest.geometry_digest) {
      throw Error(ErrorCode::kGeometryMismatch,
                  "results come from different geometries");
    }
  }
  const std::string table = ComparisonTable(results);
  if (!o.out.empty()) WriteTextFile(o.out, table);
  out << table;
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Rowhammer fault and CATT defense simulator", "catt-sim"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<uint64_t>(
        "--seed", [&](const uint64_t& v) { o.seed = v; }, "Seed");
  };
  auto add_defense = [&](CLI::App* c) {
    c->add_option_function<std::string>(
         "--defense", [&](const std::string& v) { o.defense = v; },
         "none|bcatt|gcatt-split|gcatt-dynamic|both")
        ->check(CLI::IsMember({"none", "bcatt", "gcatt-split", "gcatt-dynamic",
                               "both"}));
    c->add_option_function<uint64_t>(
        "--guard-rows", [&](const uint64_t& v) { o.guard_rows = v; },
        "Guard rows between security domains");
  };

  CLI::App* scan = app.add_subcommand("scan", "Double-sided scan for victim frames");
  scan->add_option("--geometry", o.geometry, "Geometry config (JSON)");
  scan->add_option("--profile", o.profile, "Vulnerability profile (JSON)");
  scan->add_option("--scenario", o.scenario, "Scenario file instead of geometry/profile");
  scan->add_option("--out", o.out, "Victim frame list to write");
  scan->add_option_function<uint64_t>(
      "--hammer-count", [&](const uint64_t& v) { o.hammer_count = v; },
      "Activations per aggressor row");
  add_seed(scan);
  add_defense(scan);

  CLI::App* bl = app.add_subcommand("blacklist", "Reserve victim frames in the memory map");
  bl->add_option("--scan", o.scan_files, "Victim frame list(s); repeated lists are merged");
  bl->add_option("--geometry", o.geometry, "Geometry config (JSON)");
  bl->add_option("--map", o.map, "Base memory map (default: all usable)");
  bl->add_option("--out", o.out, "Extended memory map to write");

  CLI::App* as = app.add_subcommand("alloc-sim", "Random allocation workload with audits");
  as->add_option("--geometry", o.geometry, "Geometry config (JSON)");
  as->add_option("--map", o.map, "Memory map restricting available frames");
  as->add_option("--ops", o.ops, "Number of operations");
  as->add_option("--out", o.out, "Allocation trace to write");
  as->add_option("--replay", o.replay, "Replay and audit a trace instead");
  add_seed(as);
  add_defense(as);

  CLI::App* atk = app.add_subcommand("attack", "Run a scenario's exploit campaign");
  atk->add_option("--scenario", o.scenario, "Scenario file (JSON)");
  atk->add_option("--out", o.out, "Result JSON to write (table goes to <out>.txt)");
  atk->add_option_function<uint64_t>(
      "--attempts", [&](const uint64_t& v) { o.attempts = v; },
      "Override the campaign length");
  add_seed(atk);
  add_defense(atk);

  CLI::App* rep = app.add_subcommand("report", "Compare result files");
  rep->add_option("results", o.results, "Result files")->required();
  rep->add_option("--out", o.out, "Write the table here as well");

  std::vector<const char*> argv{"catt-sim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "catt-sim: " << e.what() << '\n';
    return kExitParse;
  }

  try {
    if (scan->parsed()) return CmdScan(o, out);
    if (bl->parsed()) return CmdBlacklist(o, out);
    if (as->parsed()) return CmdAllocSim(o, out);
    if (atk->parsed()) return CmdAttack(o, out);
    if (rep->parsed()) return CmdReport(o, out);
  } catch (const Error& e) {
    err << "catt-sim: " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "catt-sim: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace catt::cli
