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

// Regenerates the geometry, profile and scenario files under data/.
//
//   make-fixtures <data-dir>

#include <filesystem>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "catt/dram_model.h"
#include "catt/fault_model.h"
#include "catt/io.h"

namespace {

using catt::AddressMapper;
using catt::DramGeometry;
using catt::ProfileRecipe;
using catt::Sidedness;
namespace fs = std::filesystem;

// Small machine used for exploit campaigns: 16 MiB, 128 rows per bank.
DramGeometry ExploitGeometry() {
  DramGeometry g;
  g.rows_per_bank = 128;
  return g;
}

void WriteScenario(const fs::path& dir, const std::string& name,
                   const std::string& geometry, const std::string& profile,
                   const std::string& defense, bool scan,
                   const nlohmann::ordered_json& exploit) {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["geometry"] = "../geometry/" + geometry;
  j["profile"] = "../profiles/" + profile;
  j["defense"] = {{"kind", defense}, {"guard_rows", 1}};
  j["fault"] = {{"seed", 0}, {"blast_radius", 1}};
  j["scan"] = {{"enabled", scan}, {"hammer_count", 1000000}};
  j["exploit"] = exploit;
  catt::WriteTextFile((dir / (name + ".json")).string(), j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make-fixtures <data-dir>\n";
    return 2;
  }
  const fs::path root = argv[1];
  fs::create_directories(root / "geometry");
  fs::create_directories(root / "profiles");
  fs::create_directories(root / "scenarios");

  const AddressMapper g0{DramGeometry{}};
  const AddressMapper s1{DramGeometry::Ddr3(2)};
  const AddressMapper small{ExploitGeometry()};
  catt::WriteTextFile((root / "geometry/g0.json").string(),
                      catt::GeometryConfigToJson(g0));
  catt::WriteTextFile((root / "geometry/s1-ddr3-8g.json").string(),
                      catt::GeometryConfigToJson(s1));
  catt::WriteTextFile((root / "geometry/exploit-16m.json").string(),
                      catt::GeometryConfigToJson(small));

  ProfileRecipe s1_recipe;
  s1_recipe.victim_frames = 133;
  s1_recipe.seed = 1;
  catt::StoreProfile(catt::GenerateProfile(s1, s1_recipe),
                     (root / "profiles/s1-133.json").string());

  ProfileRecipe exploit_recipe;
  exploit_recipe.victim_frames = 4;
  exploit_recipe.seed = 3;
  catt::StoreProfile(catt::GenerateProfile(small, exploit_recipe),
                     (root / "profiles/exploit-16m.json").string());

  ProfileRecipe single_recipe;
  single_recipe.victim_frames = 4;
  single_recipe.seed = 3;
  single_recipe.sidedness = Sidedness::kSingleSufficient;
  catt::StoreProfile(catt::GenerateProfile(small, single_recipe),
                     (root / "profiles/single-sided-16m.json").string());

  const fs::path sc = root / "scenarios";
  nlohmann::ordered_json exploit = {{"spray_fraction", 1.0},
                                    {"background_fraction", 0.8},
                                    {"pte_fill", 1.0},
                                    {"attempts", 10000},
                                    {"seed", 7},
                                    {"hammer_count", 1000000},
                                    {"mode", "double-sided"}};
  WriteScenario(sc, "s1-unprotected", "exploit-16m.json", "exploit-16m.json",
                "none", true, exploit);
  WriteScenario(sc, "s1-bcatt", "exploit-16m.json", "exploit-16m.json", "bcatt",
                true, exploit);
  exploit["attempts"] = 3500;
  WriteScenario(sc, "s1-gcatt", "exploit-16m.json", "exploit-16m.json",
                "gcatt-split", true, exploit);
  WriteScenario(sc, "s1-gcatt-dynamic", "exploit-16m.json", "exploit-16m.json",
                "gcatt-dynamic", true, exploit);
  WriteScenario(sc, "s1-both", "exploit-16m.json", "exploit-16m.json", "both",
                true, exploit);

  exploit["attempts"] = 1000;
  exploit["mode"] = "single-sided";
  for (const char* d : {"none", "bcatt", "gcatt-split", "gcatt-dynamic"}) {
    WriteScenario(sc, std::string("single-sided-") + d, "exploit-16m.json",
                  "single-sided-16m.json", d, false, exploit);
  }
  return 0;
}
