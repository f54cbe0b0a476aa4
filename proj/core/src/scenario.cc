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

#include "catt/scenario.h"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "catt/error.h"
#include "catt/io.h"

namespace catt {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void Fail(const std::string& what) {
  throw Error(ErrorCode::kParseError, "scenario: " + what);
}

void RejectUnknown(const json& obj, std::initializer_list<const char*> names,
                   const std::string& where) {
  if (!obj.is_object()) Fail(where + " must be an object");
  std::set<std::string> known(names.begin(), names.end());
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) Fail("unknown field " + where + "." + key);
  }
}

uint64_t GetU64(const json& obj, const char* name, uint64_t fallback) {
  if (!obj.contains(name)) return fallback;
  if (!obj[name].is_number_unsigned()) Fail(std::string("bad ") + name);
  return obj[name].get<uint64_t>();
}

double GetDouble(const json& obj, const char* name, double fallback) {
  if (!obj.contains(name)) return fallback;
  if (!obj[name].is_number()) Fail(std::string("bad ") + name);
  return obj[name].get<double>();
}

bool GetBool(const json& obj, const char* name, bool fallback) {
  if (!obj.contains(name)) return fallback;
  if (!obj[name].is_boolean()) Fail(std::string("bad ") + name);
  return obj[name].get<bool>();
}

uint64_t ParseHexString(const std::string& s) {
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) {
    Fail("expected hex string, got " + s);
  }
  size_t used = 0;
  uint64_t v = 0;
  try {
    v = std::stoull(s.substr(2), &used, 16);
  } catch (const std::exception&) {
    Fail("bad hex string " + s);
  }
  if (used != s.size() - 2) Fail("bad hex string " + s);
  return v;
}

// A reference is either a path relative to base_dir or an inline object.
std::string ResolveText(const json& ref, const std::string& base_dir,
                        const char* what) {
  if (ref.is_object()) return ref.dump();
  if (!ref.is_string()) Fail(std::string(what) + " must be a path or object");
  std::filesystem::path p(ref.get<std::string>());
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  return ReadTextFile(p.string());
}

ordered_json AttemptToJson(const AttemptRecord& r) {
  ordered_json j;
  j["index"] = r.index;
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["flips"] = r.flips;
  j["cross_domain_flips"] = r.cross_domain_flips;
  j["own_domain_flips"] = r.own_domain_flips;
  j["unowned_flips"] = r.unowned_flips;
  j["reserved_flips"] = r.reserved_flips;
  j["attacker_frames"] = r.attacker_frames;
  j["pte_pages"] = r.pte_pages;
  j["victim_rows"] = r.victim_rows;
  return j;
}

uint64_t ResultU64(const json& obj, const char* name) {
  if (!obj.contains(name) || !obj[name].is_number_unsigned()) {
    throw Error(ErrorCode::kParseError,
                std::string("result: missing or invalid ") + name);
  }
  return obj[name].get<uint64_t>();
}

std::string Cell(const char* fmt, unsigned long long v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

Scenario ParseScenario(std::string_view json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    Fail(e.what());
  }
  RejectUnknown(doc, {"name", "geometry", "profile", "defense", "fault", "scan",
                      "exploit"},
                "scenario");
  if (!doc.contains("name") || !doc["name"].is_string()) Fail("missing name");
  if (!doc.contains("geometry")) Fail("missing geometry");
  if (!doc.contains("profile")) Fail("missing profile");

  Scenario s;
  s.name = doc["name"].get<std::string>();
  AddressMapper mapper =
      ParseGeometryConfig(ResolveText(doc["geometry"], base_dir, "geometry"));
  VulnerabilityProfile profile =
      ParseProfile(ResolveText(doc["profile"], base_dir, "profile"));

  FaultParams fault;
  if (doc.contains("fault")) {
    const json& f = doc["fault"];
    RejectUnknown(f, {"seed", "blast_radius"}, "fault");
    fault.seed = GetU64(f, "seed", 0);
    fault.blast_radius = static_cast<unsigned>(GetU64(f, "blast_radius", 1));
  }

  if (doc.contains("defense")) {
    const json& d = doc["defense"];
    RejectUnknown(d, {"kind", "guard_rows", "kernel_base", "whole_row_blacklist"},
                  "defense");
    if (d.contains("kind")) {
      if (!d["kind"].is_string()) Fail("bad defense.kind");
      auto kind = ParseDefense(d["kind"].get<std::string>());
      if (!kind) Fail("unknown defense " + d["kind"].get<std::string>());
      s.defense.defense = *kind;
    }
    s.defense.guard_rows = GetU64(d, "guard_rows", 1);
    if (d.contains("kernel_base")) {
      if (!d["kernel_base"].is_string()) Fail("bad kernel_base");
      s.defense.kernel_base = ParseHexString(d["kernel_base"].get<std::string>());
    }
    s.defense.whole_row_blacklist = GetBool(d, "whole_row_blacklist", false);
  }

  if (doc.contains("scan")) {
    const json& sc = doc["scan"];
    RejectUnknown(sc, {"enabled", "hammer_count", "pattern", "coverage_runs"},
                  "scan");
    s.scan_enabled = GetBool(sc, "enabled", true);
    s.scan.hammer_count = GetU64(sc, "hammer_count", s.scan.hammer_count);
    const uint64_t pattern = GetU64(sc, "pattern", s.scan.pattern);
    if (pattern > 0xff) Fail("scan.pattern must be a byte");
    s.scan.pattern = static_cast<uint8_t>(pattern);
    s.scan.coverage_runs = GetU64(sc, "coverage_runs", 1);
    if (s.scan.hammer_count == 0) Fail("scan.hammer_count must be >= 1");
  }

  if (doc.contains("exploit")) {
    const json& e = doc["exploit"];
    RejectUnknown(e, {"spray_fraction", "background_fraction", "pte_fill",
                      "attempts", "seed", "hammer_count", "mode"},
                  "exploit");
    ExploitConfig& x = s.exploit;
    x.spray_fraction = GetDouble(e, "spray_fraction", x.spray_fraction);
    x.background_fraction =
        GetDouble(e, "background_fraction", x.background_fraction);
    x.pte_fill = GetDouble(e, "pte_fill", x.pte_fill);
    x.attempts = GetU64(e, "attempts", x.attempts);
    x.seed = GetU64(e, "seed", x.seed);
    x.hammer_count = GetU64(e, "hammer_count", x.hammer_count);
    if (e.contains("mode")) {
      if (!e["mode"].is_string()) Fail("bad exploit.mode");
      const std::string mode = e["mode"].get<std::string>();
      if (mode == "double-sided") {
        x.mode = HammerMode::kDoubleSided;
      } else if (mode == "single-sided") {
        x.mode = HammerMode::kSingleSided;
      } else {
        Fail("unknown exploit.mode " + mode);
      }
    }
    try {
      x.Validate();
    } catch (const Error& err) {
      Fail(err.what());
    }
  }

  try {
    s.model = std::make_shared<const FaultModel>(std::move(mapper),
                                                 std::move(profile), fault);
  } catch (const Error& err) {
    if (err.code() == ErrorCode::kInvalidArgument) Fail(err.what());
    throw;
  }
  return s;
}

Scenario LoadScenario(const std::string& path) {
  const std::string dir =
      std::filesystem::path(path).parent_path().string();
  return ParseScenario(ReadTextFile(path), dir.empty() ? "." : dir);
}

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

static ordered_json ManifestObject(const RunManifest& m) {
  ordered_json j;
  j["tool_version"] = m.tool_version;
  j["geometry_digest"] = m.geometry_digest;
  j["profile_digest"] = m.profile_digest;
  j["seed"] = m.seed;
  j["defense"] = m.defense;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  return j;
}

static RunManifest ManifestFromObject(const json& j) {
  auto str = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_string()) {
      throw Error(ErrorCode::kParseError,
                  std::string("manifest: missing ") + name);
    }
    return j[name].get<std::string>();
  };
  RunManifest m;
  m.tool_version = str("tool_version");
  m.geometry_digest = str("geometry_digest");
  m.profile_digest = str("profile_digest");
  m.seed = ResultU64(j, "seed");
  m.defense = str("defense");
  m.started_at = str("started_at");
  m.finished_at = str("finished_at");
  return m;
}

std::string ManifestToJson(const RunManifest& manifest) {
  return ManifestObject(manifest).dump(2) + "\n";
}

RunManifest ParseManifest(std::string_view json_text) {
  try {
    return ManifestFromObject(json::parse(json_text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("manifest: ") + e.what());
  }
}

ScenarioResult RunScenario(const Scenario& scenario, unsigned threads) {
  ScenarioResult out;
  out.manifest.started_at = UtcTimestamp();
  out.manifest.geometry_digest = scenario.model->mapper().Digest();
  out.manifest.profile_digest = ProfileDigest(scenario.model->profile());
  out.manifest.seed = scenario.exploit.seed;
  out.manifest.defense = std::string(DefenseName(scenario.defense.defense));
  out.scenario = scenario.name;
  out.defense = scenario.defense.defense;

  auto tmpl = std::make_shared<const MachineTemplate>(scenario.model,
                                                      scenario.defense);
  out.memory_overhead = tmpl->MemoryOverhead();
  if (scenario.scan_enabled) {
    Machine m = tmpl->Instantiate();
    out.scan_victims = Scan(m, scenario.scan).size();
  }
  MachineFactory factory = [tmpl] { return tmpl->Instantiate(); };
  out.attack = RunCampaign(factory, scenario.exploit, threads);
  out.manifest.finished_at = UtcTimestamp();
  return out;
}

std::string ResultToJson(const ScenarioResult& r) {
  ordered_json doc;
  doc["manifest"] = ManifestObject(r.manifest);
  doc["scenario"] = r.scenario;
  doc["defense"] = DefenseName(r.defense);
  if (r.scan_victims) {
    doc["scan_victims"] = *r.scan_victims;
  } else {
    doc["scan_victims"] = nullptr;
  }
  doc["memory_overhead"] = r.memory_overhead;
  const AttackResult& a = r.attack;
  ordered_json res;
  res["attempts"] = a.attempts;
  res["successes"] = a.successes;
  res["flips_total"] = a.flips_total;
  res["cross_domain_flips"] = a.cross_domain_flips;
  res["own_domain_flips"] = a.own_domain_flips;
  res["unowned_flips"] = a.unowned_flips;
  res["reserved_flips"] = a.reserved_flips;
  res["log"] = ordered_json::array();
  for (const auto& rec : a.log) res["log"].push_back(AttemptToJson(rec));
  doc["result"] = std::move(res);
  return doc.dump(2) + "\n";
}

ScenarioResult ParseResult(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("result: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("manifest") || !doc.contains("result") ||
      !doc.contains("defense") || !doc["defense"].is_string() ||
      !doc.contains("scenario") || !doc["scenario"].is_string() ||
      !doc.contains("memory_overhead") || !doc["memory_overhead"].is_number()) {
    throw Error(ErrorCode::kParseError, "result: missing fields");
  }
  ScenarioResult r;
  r.manifest = ManifestFromObject(doc["manifest"]);
  r.scenario = doc["scenario"].get<std::string>();
  auto defense = ParseDefense(doc["defense"].get<std::string>());
  if (!defense) throw Error(ErrorCode::kParseError, "result: unknown defense");
  r.defense = *defense;
  if (doc.contains("scan_victims") && !doc["scan_victims"].is_null()) {
    r.scan_victims = ResultU64(doc, "scan_victims");
  }
  r.memory_overhead = doc["memory_overhead"].get<double>();
  const json& res = doc["result"];
  AttackResult& a = r.attack;
  if (!res.contains("log") || !res["log"].is_array()) {
    throw Error(ErrorCode::kParseError, "result: missing log");
  }
  for (const auto& j : res["log"]) {
    AttemptRecord rec;
    rec.index = ResultU64(j, "index");
    rec.seed = ResultU64(j, "seed");
    if (!j.contains("success") || !j["success"].is_boolean()) {
      throw Error(ErrorCode::kParseError, "result: bad success flag");
    }
    rec.success = j["success"].get<bool>();
    rec.flips = ResultU64(j, "flips");
    rec.cross_domain_flips = ResultU64(j, "cross_domain_flips");
    rec.own_domain_flips = ResultU64(j, "own_domain_flips");
    rec.unowned_flips = ResultU64(j, "unowned_flips");
    rec.reserved_flips = ResultU64(j, "reserved_flips");
    rec.attacker_frames = ResultU64(j, "attacker_frames");
    rec.pte_pages = ResultU64(j, "pte_pages");
    rec.victim_rows = ResultU64(j, "victim_rows");
    a.Add(rec);
  }
  if (a.attempts != ResultU64(res, "attempts") ||
      a.successes != ResultU64(res, "successes") ||
      a.flips_total != ResultU64(res, "flips_total") ||
      a.cross_domain_flips != ResultU64(res, "cross_domain_flips")) {
    throw Error(ErrorCode::kParseError, "result: totals do not match the log");
  }
  return r;
}

std::string AttackTable(const std::vector<ScenarioResult>& results) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %-14s %12s %9s %10s %8s %12s\n",
                "Scenario", "Defense", "Victim pages", "Attempts", "Successes",
                "Flips", "Cross-domain");
  out += line;
  for (const auto& r : results) {
    const std::string victims =
        r.scan_victims ? std::to_string(*r.scan_victims) : "-";
    std::snprintf(line, sizeof(line), "%-28s %-14s %12s %9llu %10llu %8llu %12llu\n",
                  r.scenario.c_str(), std::string(DefenseName(r.defense)).c_str(),
                  victims.c_str(),
                  static_cast<unsigned long long>(r.attack.attempts),
                  static_cast<unsigned long long>(r.attack.successes),
                  static_cast<unsigned long long>(r.attack.flips_total),
                  static_cast<unsigned long long>(r.attack.cross_domain_flips));
    out += line;
  }
  return out;
}

std::string ComparisonTable(const std::vector<ScenarioResult>& results) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %8s %19s %19s %16s\n", "Defense",
                "Flips", "Cross-domain flips", "Successes/Attempts",
                "Memory overhead");
  out += line;
  for (const auto& r : results) {
    const std::string ratio =
        Cell("%llu", r.attack.successes) + "/" + Cell("%llu", r.attack.attempts);
    std::snprintf(line, sizeof(line), "%-14s %8llu %19llu %19s %16s\n",
                  std::string(DefenseName(r.defense)).c_str(),
                  static_cast<unsigned long long>(r.attack.flips_total),
                  static_cast<unsigned long long>(r.attack.cross_domain_flips),
                  ratio.c_str(), FormatPercent(r.memory_overhead, 4).c_str());
    out += line;
  }
  return out;
}

}  // namespace catt
