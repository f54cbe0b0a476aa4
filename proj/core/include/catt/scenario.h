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

// Scenario files, run manifests, result files and the fixed-width tables
// printed by the command-line tool.

#ifndef CATT_SCENARIO_H_
#define CATT_SCENARIO_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "catt/attack_harness.h"

namespace catt {

inline constexpr char kToolVersion[] = "0.1.0";

// Scenario file (JSON):
//   name          string
//   geometry      path (relative to the scenario file) or inline object
//   profile       path or inline object
//   defense       {"kind": none|bcatt|gcatt-split|gcatt-dynamic|both,
//                  "guard_rows": n, "kernel_base": "0x...",
//                  "whole_row_blacklist": bool}
//   fault         {"seed": n, "blast_radius": 1|2}
//   scan          {"enabled": bool, "hammer_count": n, "pattern": n,
//                  "coverage_runs": n}
//   exploit       {"spray_fraction": x, "background_fraction": x,
//                  "pte_fill": x, "attempts": n, "seed": n,
//                  "hammer_count": n, "mode": "double-sided"|"single-sided"}
// Only name, geometry and profile are required.
struct Scenario {
  std::string name;
  std::shared_ptr<const FaultModel> model;
  DefenseConfig defense;
  bool scan_enabled = true;
  ScanConfig scan;
  ExploitConfig exploit;
};

// Throws kParseError for malformed files and kDigestMismatch /
// kGeometryMismatch if the profile does not belong to the geometry.
Scenario ParseScenario(std::string_view json_text, const std::string& base_dir);
Scenario LoadScenario(const std::string& path);

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string geometry_digest;
  std::string profile_digest;
  uint64_t seed = 0;
  std::string defense;
  std::string started_at;
  std::string finished_at;

  bool operator==(const RunManifest&) const = default;
};

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string UtcTimestamp();

std::string ManifestToJson(const RunManifest& manifest);
RunManifest ParseManifest(std::string_view json_text);

struct ScenarioResult {
  RunManifest manifest;
  std::string scenario;
  Defense defense = Defense::kNone;
  std::optional<uint64_t> scan_victims;
  double memory_overhead = 0.0;
  AttackResult attack;

  bool operator==(const ScenarioResult&) const = default;
};

// Builds the machine, runs the scan (if enabled) and the exploit campaign.
ScenarioResult RunScenario(const Scenario& scenario, unsigned threads = 0);

std::string ResultToJson(const ScenarioResult& result);
ScenarioResult ParseResult(std::string_view json_text);

// One row per result: scenario, defense, victim pages found by the scan,
// attempts, successes, flips and cross-domain flips.
std::string AttackTable(const std::vector<ScenarioResult>& results);

// Comparison across defenses: defense, flips, cross-domain flips,
// successes/attempts and memory overhead.
std::string ComparisonTable(const std::vector<ScenarioResult>& results);

}  // namespace catt

#endif  // CATT_SCENARIO_H_
