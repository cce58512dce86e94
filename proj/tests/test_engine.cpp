// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include <sstream>

#include "doctest.h"
#include "speccascade/engine.hpp"
#include "speccascade/harness.hpp"
#include "speccascade/oracle.hpp"

using namespace speccascade;
using doctest::Approx;

namespace {

TabularLM unigram(std::vector<double> probs, Token eos) {
  TabularLM m(probs.size(), 0, eos);
  m.set({}, TokenDistribution(std::move(probs)));
  return m;
}

}  // namespace

TEST_CASE("verifier equal to drafter accepts every draft") {
  const TabularLM q = unigram({0.5, 0.5, 0.0}, 2);
  Rng rng(1);
  const std::vector<Token> prefix;
  for (int i = 0; i < 50; ++i) {
    const SpecSample s = gen_spec_sample(q, q, TargetSpec::verifier(), prefix, 4, 1.0, rng);
    CHECK(s.block.size() == 5);
    for (double k : s.record.kappa) CHECK(k == 1.0);
    CHECK(s.counters.small_calls == 4);
    CHECK(s.counters.large_scorings == 5);
    CHECK(s.counters.large_rounds == 1);
  }
}

TEST_CASE("acceptance probability and exact first-token marginal") {
  const TabularLM q = unigram({0.9, 0.1}, 1);
  const TabularLM p = unigram({0.5, 0.5}, 1);
  const std::vector<Token> prefix;
  const auto marginal = exact_block_law(q, p, TargetSpec::verifier(), prefix, 1).first_token_marginal(2);
  CHECK(marginal[0] == Approx(0.5).epsilon(1e-12));
  CHECK(marginal[1] == Approx(0.5).epsilon(1e-12));
  Rng rng(2);
  bool saw_a = false;
  for (int i = 0; i < 20 && !saw_a; ++i) {
    const SpecSample s = gen_spec_sample(q, p, TargetSpec::verifier(), prefix, 1, 1.0, rng);
    if (s.record.drafted[0] == 0) {
      saw_a = true;
      CHECK(s.record.kappa[0] == Approx(5.0 / 9.0));
    }
  }
  CHECK(saw_a);
}

TEST_CASE("empty residual resamples from the target") {
  // Lossy with a large fixed beta gives pi = (0.5, 0.1) <= q everywhere.
  const TabularLM q = unigram({0.5, 0.5, 0.0}, 2);
  const TabularLM p = unigram({0.9, 0.1, 0.0}, 2);
  const TargetSpec spec = TargetSpec::lossy(0.0, 10.0);
  const std::vector<Token> prefix;
  Rng rng(3);
  int rejected_first = 0;
  for (int i = 0; i < 200; ++i) {
    const SpecSample s = gen_spec_sample(q, p, spec, prefix, 2, 1.0, rng);
    if (s.record.j_star == 0) {
      ++rejected_first;
      CHECK(s.block.size() == 1);
      CHECK(s.record.empty_residual);
      CHECK(s.counters.empty_residuals == 1);
    }
  }
  CHECK(rejected_first > 0);
  const auto law = exact_block_law(q, p, spec, prefix, 2);
  CHECK(law.total() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("round accounting") {
  const TabularLM q = build_random_truth(4, 1, 5);
  const TabularLM p = build_random_truth(4, 1, 6);
  Rng rng(4);
  const std::vector<Token> prompt{0};
  for (std::size_t gamma : {1u, 3u, 5u}) {
    const DecodeOutput out = decode(Strategy::spec_cascade({RuleKind::kOpt, 0.3}, gamma), q, p, {}, prompt, 40, rng);
    CHECK(out.tokens.size() <= 40);
    CHECK(out.tokens.size() == out.targets.size());
    DecodeCounters sum;
    for (const RoundRecord& r : out.trace.rounds) {
      CHECK(r.emitted >= 1);
      CHECK(r.emitted <= r.gamma + 1);
      CHECK(r.j_star + r.rejected == r.drafted.size());
      sum.emitted += r.emitted;
      sum.rejected += r.rejected;
      sum.drafted += r.drafted.size();
    }
    CHECK(sum.emitted == out.trace.counters.emitted);
    CHECK(sum.rejected == out.trace.counters.rejected);
    CHECK(sum.drafted == out.trace.counters.drafted);
    CHECK(out.trace.counters.large_rounds == out.trace.rounds.size());
    CHECK(out.trace.counters.emitted == out.tokens.size());
  }
}

TEST_CASE("decode stops at eos and respects max_len") {
  const TabularLM q = unigram({0.0, 1.0}, 1);
  Rng rng(5);
  const std::vector<Token> prompt;
  const DecodeOutput out = decode(Strategy::spec_decode(3), q, q, {}, prompt, 10, rng);
  CHECK(out.tokens == std::vector<Token>{1});
  const TabularLM r = unigram({1.0, 0.0}, 1);
  const DecodeOutput capped = decode(Strategy::spec_decode(3), r, r, {}, prompt, 10, rng);
  CHECK(capped.tokens.size() == 10);
  CHECK_THROWS(decode(Strategy::spec_decode(3), r, r, {}, prompt, 0, rng));
}

TEST_CASE("degenerate strategies") {
  const TabularLM q = build_random_truth(4, 1, 8);
  const TabularLM p = build_random_truth(4, 1, 9);
  const std::vector<Token> prompt{1};
  Rng rng(6);
  const DecodeOutput same = decode(Strategy::spec_decode(3), q, q, {}, prompt, 30, rng);
  CHECK(same.trace.counters.rejected == 0);
  const DecodeOutput chow = decode(Strategy::spec_cascade({RuleKind::kChow, 1.0}, 3), q, p, {}, prompt, 30, rng);
  CHECK(chow.trace.counters.rejected == 0);
  std::vector<Token> ctx = prompt;
  for (std::size_t k = 0; k < chow.tokens.size(); ++k) {
    CHECK(chow.targets[k] == q.next_dist(ctx));
    ctx.push_back(chow.tokens[k]);
  }
}

TEST_CASE("oracle cascade picks the more confident model") {
  const SyntheticTask t = build_partitioned_task(4, 1, 0.5, 0.5, 0.5, 21);
  const std::vector<Token> prompt{0};
  Rng rng(7);
  const DecodeOutput out = decode(Strategy::oracle_cascade({RuleKind::kDiff, 0.0}), t.small, t.large, {}, prompt, 30, rng);
  std::vector<Token> ctx = prompt;
  for (std::size_t k = 0; k < out.tokens.size(); ++k) {
    const bool large_more_confident = mode(t.small.next_dist(ctx)).probability < mode(t.large.next_dist(ctx)).probability;
    CHECK(out.trace.step_deferred[k] == (large_more_confident ? 1 : 0));
    ctx.push_back(out.tokens[k]);
  }
  CHECK(out.trace.counters.large_rounds == out.tokens.size());
}

TEST_CASE("token cascade run cap and alpha endpoints") {
  const TabularLM q = unigram({0.6, 0.4, 0.0}, 2);
  const TabularLM p = unigram({0.2, 0.8, 0.0}, 2);
  const std::vector<Token> prompt;
  Rng rng(8);
  DecodeConfig cfg;
  cfg.small_run_cap = 10;
  const DecodeOutput never = decode(Strategy::token_cascade({RuleKind::kChow, 1.0}), q, p, cfg, prompt, 25, rng);
  CHECK(never.trace.counters.forced_consults == 2);
  CHECK(never.trace.counters.large_calls == 2);
  CHECK(never.trace.step_deferred[10] == 1);
  CHECK(never.trace.step_deferred[21] == 1);
  cfg.small_run_cap = 0;
  const DecodeOutput uncapped = decode(Strategy::token_cascade({RuleKind::kChow, 1.0}), q, p, cfg, prompt, 25, rng);
  CHECK(uncapped.trace.counters.large_calls == 0);
  const DecodeOutput always = decode(Strategy::token_cascade({RuleKind::kChow, 0.0}), q, p, cfg, prompt, 25, rng);
  CHECK(always.trace.counters.large_calls == 25);
  CHECK_THROWS(Strategy::token_cascade({RuleKind::kOpt, 0.1}));
}

TEST_CASE("sequence cascade keeps confident responses") {
  const TabularLM q = unigram({0.1, 0.9}, 1);
  const TabularLM p = unigram({0.5, 0.5}, 1);
  const std::vector<Token> prompt;
  DecodeConfig greedy;
  greedy.temperature = 0.0;
  Rng rng(9);
  const DecodeOutput keep = decode(Strategy::seq_cascade(0.2), q, p, greedy, prompt, 5, rng);
  CHECK(keep.tokens == std::vector<Token>{1});
  CHECK(keep.trace.counters.large_calls == 0);
  const DecodeOutput defer = decode(Strategy::seq_cascade(0.05), q, p, greedy, prompt, 5, rng);
  CHECK(defer.trace.counters.large_calls == defer.tokens.size());
  CHECK(defer.trace.counters.rejected == 1);
  CHECK(defer.trace.counters.small_calls == 1);
}

TEST_CASE("decoding is deterministic per seed") {
  const SyntheticTask t = build_partitioned_task(5, 1, 0.5, 0.4, 0.4, 4);
  const std::vector<Token> prompt{2};
  for (const Strategy& s : {Strategy::spec_cascade({RuleKind::kOpt, 0.2}, 3), Strategy::lossy_spec(0.3, std::nullopt, 3),
                            Strategy::token_spec_cascade({TokenRuleKind::kV3, 0.4}, 2)}) {
    Rng a(11, 1, 1), b(11, 1, 1);
    const DecodeOutput x = decode(s, t.small, t.large, {}, prompt, 30, a);
    const DecodeOutput y = decode(s, t.small, t.large, {}, prompt, 30, b);
    CHECK(x.tokens == y.tokens);
    CHECK(x.trace.counters == y.trace.counters);
    std::ostringstream tx, ty;
    write_trace_jsonl(tx, x.trace);
    write_trace_jsonl(ty, y.trace);
    CHECK(tx.str() == ty.str());
    CHECK(tx.str().find("\"counters\"") != std::string::npos);
  }
}

TEST_CASE("strategy names") {
  CHECK(Strategy::from_name("spec_cascade", "opt", 0.2, 3).target.kind == TargetKind::kCascade);
  CHECK(Strategy::from_name("lossy_spec", "", 0.2, 3, std::nullopt).target.beta_policy == BetaPolicy::kTuned);
  CHECK_THROWS(Strategy::from_name("beam_search", "", 0.0, 3));
  CHECK_THROWS(Strategy::from_name("spec_cascade", "bogus", 0.0, 3));
  CHECK_THROWS(Strategy::spec_decode(0));
  CHECK(strategy_names().size() == 8);
}

TEST_CASE("cost model counter arithmetic") {
  const TabularLM q = unigram({0.5, 0.5, 0.0}, 2);
  const std::vector<Token> prompt;
  Rng rng(12);
  const DecodeOutput out = decode(Strategy::spec_decode(5), q, q, {}, prompt, 12, rng);
  CHECK(out.trace.counters.large_rounds == 2);
  CHECK(out.trace.counters.small_calls == 10);
  CHECK(cost_model(out.trace, 1.0, 4.0) == Approx(12.0 / (10.0 + 8.0)));
  DecodeCounters one;
  one.emitted = 6;
  one.small_calls = 5;
  one.large_rounds = 1;
  CHECK(cost_model(one, 1.0, 4.0) == Approx(6.0 / 9.0));
  DecodeCounters small_only;
  small_only.emitted = 4;
  small_only.small_calls = 4;
  CHECK(cost_model(small_only, 2.0, 5.0) == Approx(0.5));
  CHECK_THROWS(cost_model(one, 0.0, 1.0));
}
