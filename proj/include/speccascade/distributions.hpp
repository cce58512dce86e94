#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file distributions.hpp
 * @brief Finite token distributions and the arithmetic the cascades need.
 *
 * A TokenDistribution is a plain vector of per-token weights. Construction is
 * unchecked so that intermediate quantities (unnormalized lossy targets,
 * residual numerators) can share the type; `checked()` is the validating
 * factory and `validate()` is the diagnostic.
 *
 * Tolerance discipline:
 * - a distribution is accepted when |sum - 1| <= kSumTolerance and every
 *   entry is >= -kNegativeTolerance
 * - `checked()` clamps accepted tiny negatives to 0 and renormalizes
 *
 * All functions are pure; entropy is in nats.
 */

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace speccascade {

using Token = std::uint32_t;

inline constexpr double kSumTolerance = 1e-9;
inline constexpr double kNegativeTolerance = 1e-12;

class DistributionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite vocabulary; tokens are 0..size-1.
class Vocab {
 public:
  explicit Vocab(std::size_t size, std::vector<std::string> labels = {});

  std::size_t size() const noexcept { return size_; }
  bool contains(Token t) const noexcept { return t < size_; }
  /// Label for `t`, or its decimal index when no labels were given.
  std::string label(Token t) const;

 private:
  std::size_t size_;
  std::vector<std::string> labels_;
};

class TokenDistribution {
 public:
  TokenDistribution() = default;
  explicit TokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}

  /// Validates, clamps tiny negatives and renormalizes. Throws DistributionError.
  static TokenDistribution checked(std::vector<double> probs);
  static TokenDistribution uniform(std::size_t size);
  static TokenDistribution one_hot(std::size_t size, Token t);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double at(std::size_t i) const { return probs_.at(i); }
  std::span<const double> probs() const noexcept { return probs_; }
  double sum() const noexcept;

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;

 private:
  std::vector<double> probs_;
};

enum class ViolationKind { kTooSmallVocab, kNonFinite, kNegative, kBadSum, kSizeMismatch };

struct Violation {
  ViolationKind kind;
  std::size_t index = 0;  // offending entry, when the violation is per-entry
  double value = 0.0;     // offending entry, or the sum for kBadSum
  std::string message;
};

/// Empty optional means the distribution is valid.
std::optional<Violation> validate(const TokenDistribution& d);
std::optional<Violation> validate(const TokenDistribution& d, const Vocab& vocab);

/// Sum_v max{0, p(v) - q(v)}.
double tv_distance(const TokenDistribution& p, const TokenDistribution& q);

double entropy(const TokenDistribution& d);

/// -Sum_v d(v) log m(v); +inf when m(v) = 0 on the support of d.
double cross_entropy(const TokenDistribution& d, const TokenDistribution& m);

struct Mode {
  Token token;
  double probability;
};

/// Highest-probability token; ties go to the lowest index.
Mode mode(const TokenDistribution& d);

/// Probabilities proportional to d(v)^(1/T). T = 0 gives a one-hot at the mode.
TokenDistribution apply_temperature(const TokenDistribution& d, double temperature);

/// (1 - delta) q + delta p for delta in {0, 1}.
TokenDistribution binary_mixture(const TokenDistribution& q, const TokenDistribution& p, int delta);

/// norm(max{0, pi - q}); nullopt when pi <= q everywhere. `pi` need not be normalized.
std::optional<TokenDistribution> residual(const TokenDistribution& pi, const TokenDistribution& q);

/// Rescale non-negative weights to sum to one. Throws on zero mass.
TokenDistribution normalize(const TokenDistribution& weights);

/// Throws DistributionError unless both have the same length.
void require_same_vocab(const TokenDistribution& a, const TokenDistribution& b);

}  // namespace speccascade
