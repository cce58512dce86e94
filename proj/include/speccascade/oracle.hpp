#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file oracle.hpp
 * @brief Exact enumeration oracles for the sampler and the deferral theory.
 *
 * Everything here is brute force in double precision. Enumeration budgets
 * (vocab <= 8, gamma <= 3, length <= 4) are preconditions; exceeding them
 * throws BudgetError rather than truncating.
 */

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "speccascade/deferral.hpp"
#include "speccascade/models.hpp"

namespace speccascade {

inline constexpr std::size_t kOracleMaxVocab = 8;
inline constexpr std::size_t kOracleMaxGamma = 3;
inline constexpr std::size_t kOracleMaxLength = 4;

class BudgetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact probability of each emitted token sequence.
struct ExactLaw {
  std::map<std::vector<Token>, double> probs;

  double total() const;
  double prob(const std::vector<Token>& seq) const;
  /// Law of the first emitted token.
  std::vector<double> first_token_marginal(std::size_t vocab_size) const;
  /// max |a - b| over the union of supports.
  static double max_abs_diff(const ExactLaw& a, const ExactLaw& b);
};

/// Law of the block emitted by one speculative round at `prefix`.
ExactLaw exact_block_law(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                         std::span<const Token> prefix, std::size_t gamma, double temperature = 1.0);

/// Sampling `length` tokens (or until eos) one at a time from pi.
ExactLaw exact_autoregressive_law(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                                  std::span<const Token> prefix, std::size_t length, double temperature = 1.0);

/// Rounds composed the way decode() composes them, capped at `length` tokens.
ExactLaw exact_decode_law(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                          std::span<const Token> prefix, std::size_t gamma, std::size_t length,
                          double temperature = 1.0);

struct RejectionRate {
  double direct;  // sum_v q(v) (1 - min{1, pi(v)/q(v)})
  double closed_form;  // r * TV(p, q)
};

/// Rejection probability of the binary mixture target with deferral r.
RejectionRate rejection_rate(const TokenDistribution& q, const TokenDistribution& p, int r);

enum class RiskMode { kSequential, kSpeculative };

/// Expected deferral risk under the true next-token law. Sequential cost is
/// alpha per deferral; speculative cost is alpha * TV(p, q).
double deferral_risk(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p, int r,
                     LossKind loss, double alpha, RiskMode mode);
double deferral_risk(const TabularLM& truth, const TabularLM& q, const TabularLM& p, std::span<const Token> prefix,
                     int r, LossKind loss, double alpha, RiskMode mode);

/// Closed-form Bayes-optimal deferral; ties resolve to 0.
int optimal_r(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p, LossKind loss,
              double alpha, RiskMode mode);
int optimal_r(const TabularLM& truth, const TabularLM& q, const TabularLM& p, std::span<const Token> prefix,
              LossKind loss, double alpha, RiskMode mode);

/// argmin over r of deferral_risk; ties resolve to 0.
int brute_force_r(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p,
                  LossKind loss, double alpha, RiskMode mode);

struct RiskReport {
  double risk0;
  double risk1;
  int r_star;      // closed form
  int r_brute;     // brute-force argmin
  int r_plugin;    // OPT (0-1) or OPTLog (log) plug-in rule
  double regret;   // risk(r_plugin) - min(risk0, risk1)
  double bound;
};

/// Regret of the plug-in speculative rule against its bound. For log loss q
/// and p must be strictly positive.
RiskReport regret_check(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p,
                        double alpha, LossKind loss);

struct EquivalenceReport {
  double alpha;
  int constrained_r;
  int unconstrained_r;
  bool ok;
};

/// Budget-constrained choice min (1-r) c0 + r c1 s.t. r c2 <= B, against the
/// unconstrained problem min (1-r) c0 + r (c1 + alpha c2) with the constructed alpha.
EquivalenceReport unconstrained_equivalence_check(double c0, double c1, double c2, double budget);

/// Lossy max-min target against the direct lossy recipe at one position.
struct LossyComparison {
  double max_accept_diff;
  double max_residual_diff;
  bool residual_none_agrees;
};
LossyComparison lossy_equivalence(const TokenDistribution& q, const TokenDistribution& p, double alpha, double beta);

}  // namespace speccascade
