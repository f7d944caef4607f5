// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace irn {

// Seeded generator with distribution code pinned in this library, so a seed
// produces the same stream on every standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling on the raw 64-bit output
  // removes modulo bias.
  std::size_t index(std::size_t n);

  // Standard normal via Box-Muller (one draw per call, the second discarded).
  double normal();

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// Independent seed for a numbered sub-stream (splitmix64 finalizer), so
// initialization and training draws never share a sequence.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace irn
