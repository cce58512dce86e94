#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

/**
 * @file config.hpp
 * @brief Sweep configuration: an INI file with [task], [method] and [run].
 *
 * List values are comma separated. Comments take a whole line and start with
 * '#' or ';'. Unknown sections or keys are rejected.
 *
 *   [task]    vocab, order, eos, seed, frac_small_favored, noise_small,
 *             noise_large, smoothing
 *   [method]  method (list of name or name:rule), rule, alpha (list),
 *             gamma (list), temperature (list), lossy_beta (fixed | tuned)
 *   [run]     num_prompts, max_len, trials, seed, small_run_cap, prompt_len,
 *             cost_small, cost_large
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace speccascade {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TaskConfig {
  std::size_t vocab = 6;
  std::size_t order = 1;
  std::optional<std::uint32_t> eos;  // default: vocab - 1
  std::uint64_t seed = 1;
  double frac_small_favored = 0.5;
  double noise_small = 0.5;
  double noise_large = 0.5;
  double smoothing = 0.0;

  std::uint32_t eos_token() const { return eos ? *eos : static_cast<std::uint32_t>(vocab - 1); }
};

struct MethodEntry {
  std::string method;
  std::string rule;  // empty for methods without one
};

struct MethodConfig {
  std::vector<MethodEntry> methods{{"spec_decode", ""}};
  /// Empty: 21 evenly spaced points over each method's alpha domain.
  std::vector<double> alphas;
  std::vector<std::size_t> gammas{3, 5, 7};
  std::vector<double> temperatures{0.0, 0.1, 0.5, 1.0};
  bool lossy_tuned = false;
};

struct RunSection {
  std::size_t num_prompts = 20;
  std::size_t max_len = 16;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::size_t small_run_cap = 10;
  std::size_t prompt_len = 1;
  double cost_small = 1.0;
  double cost_large = 5.0;
};

struct RunConfig {
  TaskConfig task;
  MethodConfig method;
  RunSection run;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// "name" or "name:rule"; a bare name takes `default_rule`.
MethodEntry parse_method_entry(const std::string& text, const std::string& default_rule);

}  // namespace speccascade
