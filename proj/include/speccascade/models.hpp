#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file models.hpp
 * @brief Order-k tabular language models and synthetic two-model tasks.
 *
 * A TabularLM maps the last k tokens of a prefix (left-padded with a BOS
 * sentinel that lies outside the vocab) to a next-token distribution.
 * Contexts without a table entry fall back to uniform, so every model is a
 * total function. Models are immutable once built and safe to share.
 */

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "speccascade/distributions.hpp"
#include "speccascade/rng.hpp"

namespace speccascade {

/// Left-padding sentinel; never a vocab token.
inline constexpr Token kBos = std::numeric_limits<Token>::max();

/// Exactly `order` tokens; kBos entries only as a left prefix.
using Context = std::vector<Token>;

enum class LossKind { kZeroOne, kLog };

class TabularLM {
 public:
  TabularLM(std::size_t vocab_size, std::size_t order, Token eos, std::uint64_t seed = 0);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t order() const noexcept { return order_; }
  Token eos() const noexcept { return eos_; }
  /// Seed the model was generated from (provenance only).
  std::uint64_t seed() const noexcept { return seed_; }

  /// Distribution for the last `order` tokens of `prefix`.
  const TokenDistribution& next_dist(std::span<const Token> prefix) const;
  const TokenDistribution& at(const Context& ctx) const;
  bool has_entry(const Context& ctx) const;

  void set(const Context& ctx, TokenDistribution d);

  /// Contexts with an explicit entry, in canonical order.
  std::vector<Context> stored_contexts() const;
  std::size_t num_entries() const noexcept { return table_.size(); }

  friend bool operator==(const TabularLM& a, const TabularLM& b);

 private:
  std::uint64_t encode(const Context& ctx) const;
  std::uint64_t encode_prefix(std::span<const Token> prefix) const;

  std::size_t vocab_size_;
  std::size_t order_;
  Token eos_;
  std::uint64_t seed_;
  TokenDistribution uniform_;
  std::unordered_map<std::uint64_t, TokenDistribution> table_;
};

/// Every BOS-padded context reachable at order k, in canonical order:
/// most padding first, then lexicographic.
std::vector<Context> all_contexts(std::size_t vocab_size, std::size_t order);

/// The last `order` tokens of `prefix`, BOS-padded on the left.
Context context_of(std::span<const Token> prefix, std::size_t order);

/// Symmetric Dirichlet(1) draw over `size` outcomes.
TokenDistribution dirichlet_uniform(std::size_t size, Rng& rng);

/// Each context's distribution is an independent Dirichlet(1) draw.
TabularLM build_random_truth(std::size_t vocab_size, std::size_t order, std::uint64_t seed);
TabularLM build_random_truth(std::size_t vocab_size, std::size_t order, Token eos, std::uint64_t seed);

/// Per context: (1 - noise) truth + noise Dirichlet(1), then add-`smoothing` and renormalize.
TabularLM derive_model(const TabularLM& truth, double noise, double smoothing, std::uint64_t seed);

struct SyntheticTask {
  TabularLM truth;
  TabularLM small;
  TabularLM large;
  /// Parallel to all_contexts(vocab, order): true where the small model is exact.
  std::vector<bool> small_favored;
};

/// Within each padding level a `frac_small_favored` share of contexts (rounded)
/// gets small = truth, large = noisy; the rest gets the reverse. eos defaults to vocab_size - 1.
SyntheticTask build_partitioned_task(std::size_t vocab_size, std::size_t order, double frac_small_favored,
                                     double noise_small, double noise_large, std::uint64_t seed,
                                     double smoothing = 0.0, std::optional<Token> eos = std::nullopt);

/// Expected loss of predicting with `model` when the next token is drawn from `truth`.
/// 0-1: 1 - truth(mode(model)). Log: cross-entropy, +inf if model misses truth's support.
double expected_loss(const TokenDistribution& truth, const TokenDistribution& model, LossKind loss);

double expected_step_loss(const TabularLM& m, const TabularLM& truth, std::span<const Token> prefix,
                          LossKind loss);

/// Plain-text model format; probabilities written at 17 significant digits.
void write_model(std::ostream& out, const TabularLM& m);
TabularLM read_model(std::istream& in);

}  // namespace speccascade
