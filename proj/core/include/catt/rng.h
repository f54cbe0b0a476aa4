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

// Deterministic random number helpers. Results only depend on the seed, never
// on the standard library implementation, so logs are reproducible across
// toolchains.

#ifndef CATT_RNG_H_
#define CATT_RNG_H_

#include <cstdint>
#include <random>

namespace catt {

// One step of the splitmix64 mixer.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stateless hash of a tuple of words; used to derive sub-seeds.
constexpr uint64_t HashWords(uint64_t a, uint64_t b, uint64_t c = 0) {
  return Mix64(Mix64(Mix64(a) ^ b) ^ c);
}

// Maps a 64-bit word to [0, 1) using its top 53 bits.
constexpr double ToUnitInterval(uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform in [0, n). n must be nonzero.
  uint64_t Uniform(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  double UnitDouble() { return ToUnitInterval(engine_()); }

  bool Bernoulli(double p) { return UnitDouble() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace catt

#endif  // CATT_RNG_H_
