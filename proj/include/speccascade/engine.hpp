#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file engine.hpp
 * @brief Speculative sampling loop and the decoding strategies built on it.
 *
 * One round drafts up to gamma tokens from q, scores every drafted prefix
 * (plus the bonus position) with p in a single verification round, accepts
 * draft j with probability min{1, pi(x)/q(x)} and replaces the first rejected
 * token with a draw from norm(max{0, pi - q}). If every draft survives, one
 * more token is drawn from pi at the bonus position.
 *
 * Sequential strategies (TokenCascade, OracleCascade, SeqCascade) decode one
 * token per step and record per-step deferrals instead of rounds.
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "speccascade/deferral.hpp"
#include "speccascade/models.hpp"
#include "speccascade/rng.hpp"

namespace speccascade {

struct DecodeConfig {
  double temperature = 1.0;
  /// TokenCascade: consecutive small-model tokens before a forced large call; 0 = unlimited.
  std::size_t small_run_cap = 10;
};

struct RoundRecord {
  std::size_t position = 0;        // output length when the round started
  std::size_t gamma = 0;           // block size actually used
  std::vector<Token> drafted;
  std::vector<double> kappa;       // acceptance probability per drafted token
  std::vector<int> accepted;       // a_j, only for the draws actually made
  std::size_t j_star = 0;          // first rejected index; drafted.size() if none
  std::optional<Token> replacement;  // residual draw (j_star < drafted) or bonus draw
  bool from_residual = false;
  bool empty_residual = false;
  std::size_t emitted = 0;
  std::size_t rejected = 0;
};

struct DecodeCounters {
  std::uint64_t small_calls = 0;
  std::uint64_t large_rounds = 0;    // verification rounds or single large-model steps
  std::uint64_t large_scorings = 0;  // prefixes scored by the large model
  std::uint64_t large_calls = 0;     // deferrals, the x-axis of cost-quality plots
  std::uint64_t drafted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t emitted = 0;
  std::uint64_t forced_consults = 0;
  std::uint64_t empty_residuals = 0;

  DecodeCounters& operator+=(const DecodeCounters& o);
  friend bool operator==(const DecodeCounters&, const DecodeCounters&) = default;
};

struct DecodeTrace {
  std::vector<RoundRecord> rounds;
  std::vector<int> step_deferred;  // sequential strategies, one entry per emitted token
  DecodeCounters counters;
};

struct DecodeOutput {
  std::vector<Token> tokens;
  /// Distribution each emitted token was drawn from (after temperature), parallel to tokens.
  std::vector<TokenDistribution> targets;
  DecodeTrace trace;
};

enum class StrategyKind { kSpeculative, kTokenCascade, kOracleCascade, kSeqCascade };

struct Strategy {
  StrategyKind kind = StrategyKind::kSpeculative;
  std::string name = "spec_decode";
  TargetSpec target = TargetSpec::verifier();  // speculative strategies
  DeferralRule rule{RuleKind::kChow, 0.0};     // token and oracle cascades
  double alpha = 0.0;                          // sequence cascade threshold
  std::size_t gamma = 1;

  static Strategy spec_decode(std::size_t gamma);
  static Strategy spec_cascade(DeferralRule rule, std::size_t gamma);
  static Strategy token_spec_cascade(TokenRule rule, std::size_t gamma);
  static Strategy lossy_spec(double alpha, std::optional<double> beta, std::size_t gamma);
  static Strategy bild_star(double alpha, std::size_t gamma);
  static Strategy token_cascade(DeferralRule rule);
  static Strategy oracle_cascade(DeferralRule rule);
  static Strategy seq_cascade(double alpha);

  /// Builds a strategy from its method name; `rule` is a RuleKind or TokenRuleKind
  /// name where the method takes one. A missing `beta` tunes it per position.
  static Strategy from_name(std::string_view method, std::string_view rule, double alpha, std::size_t gamma,
                            std::optional<double> beta = 1.0);
};

/// Names accepted by Strategy::from_name.
std::span<const std::string_view> strategy_names();

struct SpecSample {
  std::vector<Token> block;
  std::vector<TokenDistribution> targets;
  RoundRecord record;
  DecodeCounters counters;
};

/// One speculative round at `prefix`. gamma = 0 draws a single token from pi.
SpecSample gen_spec_sample(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                           std::span<const Token> prefix, std::size_t gamma, double temperature, Rng& rng);

/// Decodes until eos or `max_len` emitted tokens. `prompt` is context only.
DecodeOutput decode(const Strategy& strategy, const TabularLM& q, const TabularLM& p, const DecodeConfig& config,
                    std::span<const Token> prompt, std::size_t max_len, Rng& rng);

/// One JSON object per round (speculative) or per step (sequential), newline separated.
void write_trace_jsonl(std::ostream& out, const DecodeTrace& trace);

}  // namespace speccascade
