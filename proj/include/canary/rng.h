// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CANARY_RNG_H_
#define CANARY_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace canary {

// Deterministic generator used everywhere randomness is needed.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are not portable across library
// implementations, so bounded integers and unit doubles are derived here:
//   NextBelow(n): rejection sampling on the raw 64-bit output, discarding
//                 draws >= 2^64 - (2^64 mod n), then taking the remainder.
//   NextDouble(): (raw >> 11) * 2^-53, uniform on [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  std::uint64_t NextBelow(std::uint64_t n);
  double NextDouble() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double NextGaussian();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t Mix64(std::uint64_t x);

// Sub-seed for stream `stream` of a base seed.
inline std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream) {
  return Mix64(base ^ Mix64(stream + 0x9e3779b97f4a7c15ULL));
}

// FNV-1a over the bytes of `text`, finalized with Mix64. Stable across
// platforms; not a cryptographic hash.
std::uint64_t StableHash(std::string_view text, std::uint64_t seed = 0);

}  // namespace canary

#endif  // CANARY_RNG_H_
