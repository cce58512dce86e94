#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file harness.hpp
 * @brief Config-driven sweeps over (method, alpha, gamma, temperature).
 *
 * Each grid point decodes num_prompts x trials sequences on one synthetic
 * task and reports rates from the aggregated trace counters plus exact
 * expected losses of the per-step targets against the stored truth model.
 *
 * Grid points run concurrently unless SPECCASCADE_STRICT=1 is set. Rows are
 * always emitted in grid order.
 */

#include <iosfwd>
#include <string>
#include <vector>

#include "speccascade/config.hpp"
#include "speccascade/engine.hpp"
#include "speccascade/models.hpp"

namespace speccascade {

inline constexpr const char* kStrictEnvVar = "SPECCASCADE_STRICT";

struct SweepRow {
  std::string method;
  std::string rule;
  double alpha = 0.0;
  std::size_t gamma = 0;
  double temperature = 1.0;
  double rejection_rate = 0.0;
  double deferral_fraction = 0.0;
  double large_rounds_per_token = 0.0;
  double exact_expected_01_loss = 0.0;
  double exact_expected_log_loss = 0.0;
  double empirical_match_rate_with_large = 0.0;
  double tokens_per_second_proxy = 0.0;
  std::uint64_t seed = 0;
};

/// tokens emitted / (c_small * small_calls + c_large * large_rounds).
double cost_model(const DecodeCounters& counters, double c_small, double c_large);
double cost_model(const DecodeTrace& trace, double c_small, double c_large);

SyntheticTask build_task(const TaskConfig& task);

/// Prompt `index` of a run, drawn from the truth model without eos.
std::vector<Token> sample_prompt(const TabularLM& truth, std::size_t length, std::uint64_t run_seed,
                                 std::size_t index);

/// One grid point: decode every (prompt, trial) and aggregate.
SweepRow evaluate(const SyntheticTask& task, const Strategy& strategy, const std::string& rule_label,
                  double temperature, const RunSection& run);

/// The expanded grid, in output order: method, temperature, gamma, alpha.
/// Sequential methods get a single gamma.
struct GridPoint {
  MethodEntry entry;
  double alpha;
  std::size_t gamma;
  double temperature;
};
std::vector<GridPoint> expand_grid(const RunConfig& config);

/// Default alpha sweep for a method: 21 evenly spaced points over its domain.
std::vector<double> default_alphas(const MethodEntry& entry, std::size_t vocab_size);

std::vector<SweepRow> run(const RunConfig& config);

bool strict_mode();

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_csv(std::istream& in);

struct BudgetComparison {
  double budget;
  double loss_a;  // +inf when no row of a fits the budget
  double loss_b;
  char winner;    // 'a', 'b' or '='
};

struct FrontierReport {
  std::vector<BudgetComparison> budgets;
  double a_wins_pct = 0.0;
  double b_wins_pct = 0.0;
  double ties_pct = 0.0;
};

/// Per deferral-fraction budget (the union of both row sets' fractions), the
/// lowest exact 0-1 loss each method attains within the budget.
/// Throws std::invalid_argument when the rows come from different seeds.
FrontierReport compare_frontiers(const std::vector<SweepRow>& a, const std::vector<SweepRow>& b);

void write_frontier_report(std::ostream& out, const FrontierReport& report);

}  // namespace speccascade
