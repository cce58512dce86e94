// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include <cmath>

#include "doctest.h"
#include "speccascade/deferral.hpp"
#include "speccascade/rng.hpp"
#include "speccascade/verify.hpp"

using namespace speccascade;
using doctest::Approx;

namespace {
TokenDistribution d(std::vector<double> v) { return TokenDistribution(std::move(v)); }
}  // namespace

TEST_CASE("rule thresholds") {
  const auto q = d({0.6, 0.4}), p = d({0.9, 0.1});
  CHECK(delta({RuleKind::kOpt, 1.0}, q, p) == 0);
  CHECK(delta({RuleKind::kOpt, 0.5}, q, p) == 1);
  CHECK(delta({RuleKind::kChow, 1.0}, q, p) == 0);
  CHECK(delta({RuleKind::kChow, 0.0}, q, p) == 1);
  CHECK(delta({RuleKind::kChow, 0.0}, d({1.0, 0.0}), p) == 0);
  CHECK(delta({RuleKind::kDiff, 0.35}, q, p) == 0);
  CHECK(delta({RuleKind::kDiff, 0.2}, q, p) == 1);
  CHECK(delta({RuleKind::kChowLog, 0.7}, q, p) == 0);
  CHECK(delta({RuleKind::kChowLog, 0.6}, q, p) == 1);
  CHECK(delta({RuleKind::kDiffLog, 0.0}, q, p) == 1);
  CHECK(delta({RuleKind::kOptLog, 2.0}, q, p) == 0);
}

TEST_CASE("alpha domains") {
  CHECK_THROWS(check_rule(DeferralRule{RuleKind::kOpt, 1.5}));
  CHECK_THROWS(check_rule(DeferralRule{RuleKind::kBild, 11.0}));
  CHECK_THROWS(check_rule(DeferralRule{RuleKind::kChowLog, -0.1}));
  CHECK_NOTHROW(check_rule(DeferralRule{RuleKind::kOptLog, 5.0}));
  CHECK_THROWS(check_rule(TokenRule{TokenRuleKind::kV1, 2.0}));
  CHECK(alpha_domain_max(RuleKind::kDiffLog, 4) == Approx(std::log(4.0)));
  CHECK(parse_rule_kind("opt_log") == RuleKind::kOptLog);
  CHECK_FALSE(parse_rule_kind("nope").has_value());
  CHECK(to_string(TokenRuleKind::kV2) == "v2");
}

TEST_CASE("bild discrepancy") {
  const auto q = d({0.8, 0.2}), p = d({0.5, 0.5});
  CHECK(bild_discrepancy(q, p, true) == Approx(std::log(2.0)));
  CHECK(bild_discrepancy(q, p, false) == Approx(std::log(2.0)));
  CHECK(std::isinf(bild_discrepancy(q, d({0.0, 1.0}), true)));
  CHECK(delta({RuleKind::kBild, 10.0}, q, d({0.0, 1.0})) == 1);
}

TEST_CASE("token-specific rules") {
  const auto p = d({0.5, 0.3, 0.2});
  const TokenRule v3{TokenRuleKind::kV3, 0.5};
  CHECK(token_r(v3, p, p, 0) == 0);
  CHECK(token_r(v3, p, p, 1) == 0);
  CHECK(token_r(v3, p, p, 2) == 1);
  const TokenRule v1{TokenRuleKind::kV1, 0.0};
  CHECK(token_r(v1, d({0.2, 0.8}), d({0.6, 0.4}), 0) == 1);
  CHECK(token_r(v1, d({0.2, 0.8}), d({0.6, 0.4}), 1) == 0);
}

TEST_CASE("token cascade target") {
  const auto pi = target(TargetSpec::token_cascade({TokenRuleKind::kV3, 0.5}), d({0.2, 0.2, 0.6}), d({0.5, 0.3, 0.2}));
  CHECK(pi[0] == Approx(0.5));
  CHECK(pi[1] == Approx(0.38));
  CHECK(pi[2] == Approx(0.12));
  CHECK(pi.sum() == Approx(1.0));
}

TEST_CASE("lossy target") {
  const auto q = d({0.5, 0.5}), p = d({0.3, 0.7});
  const auto pi = target(TargetSpec::lossy(0.4, 1.0), q, p);
  CHECK(pi[0] == Approx(0.5));
  CHECK(pi[1] == Approx(0.7));
  CHECK_THROWS(TargetSpec::lossy(0.4, 0.5));
  CHECK_THROWS(TargetSpec::lossy(1.0, 1.0));
  // alpha = 0, beta = 1 reduces to the verifier.
  CHECK(target(TargetSpec::lossy(0.0, 1.0), q, p) == p);
}

TEST_CASE("tuned beta zeroes the lossy condition and normalizes the target") {
  const auto q = d({0.5, 0.3, 0.2}), p = d({0.2, 0.3, 0.5});
  const BetaTuning bt = tune_beta(q, p, 0.2);
  CHECK(bt.residual < 1e-12);
  CHECK(bt.beta >= 0.8);
  CHECK(target(TargetSpec::lossy(0.2, bt.beta), q, p).sum() == Approx(1.0).epsilon(1e-12));
  CHECK(target(TargetSpec::lossy_tuned(0.2), q, p).sum() == Approx(1.0).epsilon(1e-12));

  // With nothing to trim the smallest beta with a zero right side is max p/q.
  const auto flat = d({0.5, 0.5}), peak = d({0.6, 0.4});
  const BetaTuning zero = tune_beta(flat, peak, 0.5);
  CHECK(zero.residual == Approx(0.0).epsilon(1e-15));
  CHECK(zero.beta == Approx(1.2).epsilon(1e-12));
}

TEST_CASE("temperature view: raw statistics, tempered mixtures") {
  const auto q = d({0.6, 0.4}), p = d({0.3, 0.7});
  const StepView v = StepView::at_temperature(q, p, 0.0);
  CHECK(v.q == TokenDistribution::one_hot(2, 0));
  CHECK(v.q_raw == q);
  // Chow reads max q = 0.6, not the tempered 1.
  CHECK(delta({RuleKind::kChow, 0.2}, v) == 1);
  CHECK(target(TargetSpec::cascade({RuleKind::kChow, 0.2}), v) == TokenDistribution::one_hot(2, 1));
}

TEST_CASE("mixture targets are distributions") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_distribution(5, rng, i % 2 == 0);
    const auto p = random_distribution(5, rng, i % 3 == 0);
    for (const TargetSpec& s : {TargetSpec::verifier(), TargetSpec::bild_star(1.0),
                                TargetSpec::cascade({RuleKind::kOpt, 0.3}),
                                TargetSpec::token_cascade({TokenRuleKind::kV2, 0.2})}) {
      CHECK(target(s, q, p).sum() == Approx(1.0).epsilon(1e-12));
    }
  }
}
