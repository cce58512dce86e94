// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "speccascade/harness.hpp"
#include "speccascade/models.hpp"
#include "speccascade/verify.hpp"

#ifndef SPECCASCADE_CLI
#error "SPECCASCADE_CLI must point at the CLI binary"
#endif

namespace {

using namespace speccascade;

constexpr std::uint64_t kSeed = 20240601;

CheckResult with_runtime_limit(CheckResult r, double limit_seconds) {
  if (r.seconds > limit_seconds) {
    r.passed = false;
    r.detail += "; runtime over " + std::to_string(limit_seconds) + " s";
  }
  return r;
}

// Partitioned tasks with noise on the non-favored model.
CheckResult cascade_headroom() {
  constexpr std::size_t kTasks = 50;
  constexpr std::size_t kRequiredWins = 40;
  RunSection run;
  run.num_prompts = 20;
  run.max_len = 16;
  run.trials = 2;
  run.seed = 3;
  const double temperature = 1.0;
  const std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  std::size_t oracle_ok = 0, opt_wins = 0;
  std::string oracle_misses;
  for (std::size_t i = 0; i < kTasks; ++i) {
    const SyntheticTask task = build_partitioned_task(6, 1, 0.5, 0.5, 0.5, 1000 + i);
    const SweepRow oracle =
        evaluate(task, Strategy::oracle_cascade({RuleKind::kDiff, 0.0}), "diff", temperature, run);
    const SweepRow small_only =
        evaluate(task, Strategy::spec_cascade({RuleKind::kChow, 1.0}, 3), "chow", temperature, run);
    const SweepRow large_only = evaluate(task, Strategy::spec_decode(3), "none", temperature, run);
    if (oracle.exact_expected_01_loss <= small_only.exact_expected_01_loss &&
        oracle.exact_expected_01_loss <= large_only.exact_expected_01_loss) {
      ++oracle_ok;
    } else {
      char buf[128];
      std::snprintf(buf, sizeof buf, " [task %zu: oracle %.4f small %.4f large %.4f]", i,
                    oracle.exact_expected_01_loss, small_only.exact_expected_01_loss,
                    large_only.exact_expected_01_loss);
      if (oracle_misses.size() < 400) oracle_misses += buf;
    }

    std::vector<SweepRow> opt_rows;
    for (double a : alphas) {
      opt_rows.push_back(evaluate(task, Strategy::spec_cascade({RuleKind::kOpt, a}, 3), "opt", temperature, run));
    }
    const FrontierReport rep = compare_frontiers(opt_rows, {large_only});
    bool win = false;
    for (const BudgetComparison& c : rep.budgets) {
      if (c.winner == 'a' && std::isfinite(c.loss_b)) win = true;
    }
    if (win) ++opt_wins;
  }
  CheckResult r;
  r.name = "cascade_headroom";
  r.passed = oracle_ok == kTasks && opt_wins >= kRequiredWins;
  r.detail = "oracle cascade <= both single models on " + std::to_string(oracle_ok) + "/" +
             std::to_string(kTasks) + " tasks" + oracle_misses + "; speculative OPT beats speculative decoding at a shared budget on " +
             std::to_string(opt_wins) + "/" + std::to_string(kTasks) + " tasks";
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

int shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

CheckResult determinism() {
  const std::string cli = SPECCASCADE_CLI;
  const std::string config = SPECCASCADE_EXAMPLE_CONFIG;
  const std::string a = "acceptance_run_a.csv", b = "acceptance_run_b.csv";
  CheckResult r;
  r.name = "determinism";
  const int rc_a = shell("\"" + cli + "\" run --config \"" + config + "\" --out " + a);
  const int rc_b = shell("\"" + cli + "\" run --config \"" + config + "\" --out " + b);
  const std::string csv_a = slurp(a), csv_b = slurp(b);
  const int rc_verify = shell("\"" + cli + "\" verify > acceptance_verify.txt");
  r.passed = rc_a == 0 && rc_b == 0 && !csv_a.empty() && csv_a == csv_b && rc_verify == 0;
  r.detail = "run exit codes " + std::to_string(rc_a) + "/" + std::to_string(rc_b) + ", " +
             std::to_string(csv_a.size()) + " bytes, " + (csv_a == csv_b ? "identical" : "different") +
             "; verify exit code " + std::to_string(rc_verify);
  return r;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::function<CheckResult()> run;
  };
  const std::vector<Criterion> criteria{
      {1, [] { return with_runtime_limit(timed([] { return check_speculative_correctness(kSeed, 200); }), 60.0); }},
      {2, [] { return with_runtime_limit(timed([] { return check_rejection_rate(kSeed, 1000); }), 1.0); }},
      {3, [] { return with_runtime_limit(timed([] { return check_lossy_equivalence(kSeed, 1000); }), 1.0); }},
      {4, [] { return timed([] { return check_optimal_deferral(kSeed, 1000); }); }},
      {5, [] { return timed([] { return check_regret_bounds(kSeed, 1000); }); }},
      {6, [] { return timed([] { return check_greedy_equivalence(kSeed, 500); }); }},
      {7, [] { return timed([] { return check_token_normalization(kSeed, 1000); }); }},
      {8, [] { return timed([] { return check_sampler_goodness_of_fit(kSeed, 20, 100000); }); }},
      {9, [] { return timed(cascade_headroom); }},
      {10, [] { return timed([] { return check_beta_tuning(kSeed, 200); }); }},
      {11, [] { return timed(determinism); }},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const CheckResult r = c.run();
    std::printf("criterion %2d  %s  %-24s %7.2fs  %s\n", c.id, r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
    if (!r.passed) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
