#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file verify.hpp
 * @brief Randomized oracle checks run by `speccascade verify` and the acceptance suite.
 */

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "speccascade/distributions.hpp"
#include "speccascade/rng.hpp"

namespace speccascade {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Random distribution over `size` outcomes; with `sparse` some entries are zeroed.
TokenDistribution random_distribution(std::size_t size, Rng& rng, bool sparse = false);

CheckResult check_speculative_correctness(std::uint64_t seed, std::size_t instances = 200);
CheckResult check_rejection_rate(std::uint64_t seed, std::size_t instances = 1000);
CheckResult check_lossy_equivalence(std::uint64_t seed, std::size_t instances = 1000);
CheckResult check_optimal_deferral(std::uint64_t seed, std::size_t instances = 1000);
CheckResult check_regret_bounds(std::uint64_t seed, std::size_t instances = 1000);
CheckResult check_greedy_equivalence(std::uint64_t seed, std::size_t instances = 500);
CheckResult check_token_normalization(std::uint64_t seed, std::size_t instances = 1000);
CheckResult check_sampler_goodness_of_fit(std::uint64_t seed, std::size_t instances = 20,
                                          std::size_t samples = 100000);
CheckResult check_beta_tuning(std::uint64_t seed, std::size_t instances = 200);

/// Every check above, in order.
std::vector<CheckResult> run_oracle_suite(std::uint64_t seed);

/// Runs `fn` and fills in the elapsed time.
CheckResult timed(const std::function<CheckResult()>& fn);

}  // namespace speccascade
