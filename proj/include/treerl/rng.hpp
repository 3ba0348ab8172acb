// Copyright 2026 The treerl Authors. All rights reserved.
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

#ifndef TREERL_RNG_HPP_
#define TREERL_RNG_HPP_

#include <cstdint>
#include <random>

namespace treerl {

// splitmix64 finalizer; used both as a seed mixer and to derive
// independent child streams from (seed, tag...) tuples.
inline uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t MixSeed(uint64_t seed) { return Mix64(seed); }

template <typename... Rest>
uint64_t MixSeed(uint64_t seed, uint64_t first, Rest... rest) {
  return MixSeed(Mix64(seed ^ Mix64(first + 0x632be59bd9b4e019ULL)), rest...);
}

// Deterministic stream wrapper. The engine is standard-specified
// (mt19937_64) and the draws below avoid std::*_distribution, whose
// outputs differ across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double NextDouble() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Modulo bias is < n / 2^64.
  int NextInt(int n) {
    return static_cast<int>(engine_() % static_cast<uint64_t>(n));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace treerl

#endif  // TREERL_RNG_HPP_
