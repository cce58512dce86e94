#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include <cstdint>
#include <random>
#include <span>

namespace speccascade {

/// Seeded stream of uniforms. Streams keyed by (seed, a, b) are independent
/// and reproducible; the harness keys them by (run seed, prompt, trial).
///
/// Uniforms are built from the raw 64-bit engine output rather than
/// std::uniform_real_distribution so that draws are identical across
/// standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0);

  /// Raw 64-bit word.
  std::uint64_t bits();
  /// Uniform in [0, 1).
  double uniform();
  /// Exponential(1).
  double exponential();
  /// Index drawn proportionally to non-negative `weights` (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const noexcept { return seed_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace speccascade
