#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file deferral.hpp
 * @brief Deferral decisions and the target distributions built from them.
 *
 * Every rule compares confidence statistics of the drafter q and the
 * verifier p against a lenience / cost parameter alpha. Inequalities are
 * strict, so an exact tie never defers.
 *
 *   Chow     max q < 1 - alpha
 *   ChowLog  H(q) > alpha
 *   Diff     max q < max p - alpha
 *   DiffLog  H(p) < H(q) - alpha
 *   OPT      max q < max p - alpha * TV(p, q)
 *   OPTLog   H(p) < H(q) - alpha * TV(p, q)
 *   BiLD     D(q, p) > alpha
 *
 * Temperature handling (StepView): confidence statistics (max probability,
 * entropy, the BiLD discrepancy, token-level comparisons) are read from the
 * models' raw distributions; the TV term and every target mixture use the
 * temperature-adjusted distributions that are actually sampled. At T = 1 the
 * two coincide. At T = 0 this makes OPT reduce to Diff, since the TV distance
 * between two one-hot distributions is 1 exactly when their modes differ.
 */

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "speccascade/distributions.hpp"

namespace speccascade {

enum class RuleKind { kChow, kChowLog, kDiff, kDiffLog, kOpt, kOptLog, kBild };
enum class TokenRuleKind { kV1, kV2, kV3 };

struct DeferralRule {
  RuleKind kind;
  double alpha;
};

struct TokenRule {
  TokenRuleKind kind;
  double alpha;
};

/// Throws std::invalid_argument when alpha is outside the rule's domain:
/// [0, 1] for Chow/Diff/OPT, [0, 10] for BiLD, finite >= 0 for the entropy rules.
void check_rule(const DeferralRule& rule);
void check_rule(const TokenRule& rule);

/// Upper end of the alpha domain used for default sweeps.
double alpha_domain_max(RuleKind kind, std::size_t vocab_size);

/// False for rules that only look at the drafter (Chow, ChowLog).
bool rule_needs_verifier(RuleKind kind);

std::string_view to_string(RuleKind kind);
std::string_view to_string(TokenRuleKind kind);
std::optional<RuleKind> parse_rule_kind(std::string_view name);
std::optional<TokenRuleKind> parse_token_rule_kind(std::string_view name);

/// The distributions a rule sees at one position.
struct StepView {
  TokenDistribution q_raw;
  TokenDistribution p_raw;
  TokenDistribution q;  // temperature-adjusted
  TokenDistribution p;  // temperature-adjusted
  double temperature = 1.0;

  static StepView at_temperature(const TokenDistribution& q_raw, const TokenDistribution& p_raw,
                                 double temperature);
  /// Raw and sampled distributions coincide (T = 1).
  static StepView untempered(const TokenDistribution& q, const TokenDistribution& p);
};

/// BiLD discrepancy. Greedy (T = 0): -log p(argmax q). Otherwise the
/// cross-entropy -sum_v q(v) log p(v). +inf when p misses the mass.
double bild_discrepancy(const TokenDistribution& q, const TokenDistribution& p, bool greedy);

int delta(const DeferralRule& rule, const StepView& view);
int delta(const DeferralRule& rule, const TokenDistribution& q, const TokenDistribution& p);

/// Decision for drafter-only rules, used by sequential cascades before p exists.
int delta_small_only(const DeferralRule& rule, const TokenDistribution& q_raw);

/// Token-specific rule r(v):
///   V1  q(v) < max p - alpha
///   V2  p(v) < max p - alpha
///   V3  p(v) < max p * (1 - alpha)
int token_r(const TokenRule& rule, const TokenDistribution& q, const TokenDistribution& p, Token v);

enum class TargetKind { kVerifier, kLossy, kBildStar, kCascade, kTokenCascade };
enum class BetaPolicy { kFixed, kTuned };

struct TargetSpec {
  TargetKind kind = TargetKind::kVerifier;
  DeferralRule rule{RuleKind::kChow, 0.0};
  TokenRule token_rule{TokenRuleKind::kV3, 0.0};
  double alpha = 0.0;  // lossy strictness, or the BiLD threshold
  double beta = 1.0;   // lossy, fixed policy
  BetaPolicy beta_policy = BetaPolicy::kFixed;

  static TargetSpec verifier();
  static TargetSpec lossy(double alpha, double beta);
  static TargetSpec lossy_tuned(double alpha);
  static TargetSpec bild_star(double alpha);
  static TargetSpec cascade(DeferralRule rule);
  static TargetSpec token_cascade(TokenRule rule);
};

/// Target distribution pi = T(q, p) at one position.
///
/// Verifier returns p; Cascade and BiLDStar return q or p by the rule;
/// TokenCascade returns q(v)(1 - r(v)) + eta p(v) with eta = sum_v r(v) q(v);
/// Lossy returns max{min{q, p/(1-alpha)}, p/beta}, which sums to one only when
/// beta satisfies the tuning condition.
TokenDistribution target(const TargetSpec& spec, const StepView& view);
TokenDistribution target(const TargetSpec& spec, const TokenDistribution& q, const TokenDistribution& p);

/// |sum_v max{0, q - p/(1-alpha)} - sum_v max{0, p/beta - q}|
double lossy_condition_residual(const TokenDistribution& q, const TokenDistribution& p, double alpha,
                                double beta);

struct BetaTuning {
  double beta;
  double residual;
};

inline constexpr std::size_t kBetaGridPoints = 1000;
inline constexpr double kBetaGridMax = 10.0;

/// Grid search over kBetaGridPoints values in [max(1 - alpha, 1e-6), 10],
/// then bisection inside the grid cell where the condition changes sign.
/// The result is never worse than the best grid point.
BetaTuning tune_beta(const TokenDistribution& q, const TokenDistribution& p, double alpha);

}  // namespace speccascade
