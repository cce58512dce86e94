// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <boost/math/distributions/chi_squared.hpp>

#include "speccascade/deferral.hpp"
#include "speccascade/engine.hpp"
#include "speccascade/models.hpp"
#include "speccascade/oracle.hpp"

namespace speccascade {

namespace {

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.bits() % (hi - lo + 1));
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

constexpr std::array<RuleKind, 7> kAllRules{RuleKind::kChow,   RuleKind::kChowLog, RuleKind::kDiff, RuleKind::kDiffLog,
                                            RuleKind::kOpt,    RuleKind::kOptLog,  RuleKind::kBild};
constexpr std::array<TokenRuleKind, 3> kAllTokenRules{TokenRuleKind::kV1, TokenRuleKind::kV2, TokenRuleKind::kV3};

// Targets that are valid distributions (lossy is filtered by the caller).
TargetSpec random_spec(Rng& rng, std::size_t vocab) {
  switch (rng.bits() % 5) {
    case 0:
      return TargetSpec::verifier();
    case 1: {
      const RuleKind k = kAllRules[rng.bits() % kAllRules.size()];
      return TargetSpec::cascade({k, uniform_in(rng, 0.0, alpha_domain_max(k, vocab))});
    }
    case 2:
      return TargetSpec::bild_star(uniform_in(rng, 0.0, 3.0));
    case 3:
      return TargetSpec::token_cascade({kAllTokenRules[rng.bits() % 3], rng.uniform()});
    default:
      return TargetSpec::lossy_tuned(uniform_in(rng, 0.0, 0.9));
  }
}

TabularLM random_model(std::size_t vocab, std::size_t order, Rng& rng) {
  return build_random_truth(vocab, order, rng.bits());
}

bool target_is_distribution(const TabularLM& q, const TabularLM& p, const TargetSpec& spec, double temperature) {
  for (const Context& ctx : all_contexts(q.vocab_size(), q.order())) {
    const StepView view = StepView::at_temperature(q.at(ctx), p.at(ctx), temperature);
    if (std::abs(target(spec, view).sum() - 1.0) > 1e-12) return false;
  }
  return true;
}

CheckResult result(std::string name, bool passed, std::string detail) {
  return CheckResult{std::move(name), passed, std::move(detail), 0.0};
}

}  // namespace

TokenDistribution random_distribution(std::size_t size, Rng& rng, bool sparse) {
  std::vector<double> w(size);
  for (double& x : w) x = rng.exponential();
  if (sparse) {
    for (double& x : w)
      if (rng.uniform() < 0.3) x = 0.0;
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) w[pick(rng, 0, size - 1)] = 1.0;
  }
  return normalize(TokenDistribution(std::move(w)));
}

CheckResult timed(const std::function<CheckResult()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r = fn();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

CheckResult check_speculative_correctness(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 1);
  constexpr std::array<double, 3> kTemps{0.0, 0.5, 1.0};
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0, failures = 0;
  while (checked < instances) {
    const std::size_t vocab = pick(rng, 2, 4);
    const std::size_t gamma = pick(rng, 1, 3);
    const std::size_t order = pick(rng, 0, 1);
    const std::size_t length = pick(rng, 3, 4);
    const double temp = kTemps[rng.bits() % kTemps.size()];
    const TabularLM q = random_model(vocab, order, rng);
    const TabularLM p = random_model(vocab, order, rng);
    const TargetSpec spec = random_spec(rng, vocab);
    if (spec.kind == TargetKind::kLossy && !target_is_distribution(q, p, spec, temp)) {
      ++skipped;
      continue;
    }
    std::vector<Token> prompt;
    if (rng.uniform() < 0.5) prompt.push_back(static_cast<Token>(pick(rng, 0, vocab - 2)));
    const ExactLaw composed = exact_decode_law(q, p, spec, prompt, gamma, length, temp);
    const ExactLaw reference = exact_autoregressive_law(q, p, spec, prompt, length, temp);
    const double d = std::max(ExactLaw::max_abs_diff(composed, reference), std::abs(composed.total() - 1.0));
    worst = std::max(worst, d);
    if (d > 1e-9) ++failures;
    ++checked;
  }
  return result("speculative_correctness", failures == 0,
                std::to_string(checked) + " instances, max deviation " + sci(worst) + ", " +
                    std::to_string(skipped) + " lossy instances without a valid target skipped");
}

CheckResult check_rejection_rate(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = pick(rng, 2, 8);
    const bool sparse = rng.uniform() < 0.3;
    const TokenDistribution q = random_distribution(n, rng, sparse);
    const TokenDistribution p = random_distribution(n, rng, sparse);
    const RejectionRate rr = rejection_rate(q, p, static_cast<int>(rng.bits() & 1));
    worst = std::max(worst, std::abs(rr.direct - rr.closed_form));
  }
  return result("rejection_rate", worst <= 1e-12, std::to_string(instances) + " instances, max gap " + sci(worst));
}

CheckResult check_lossy_equivalence(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 3);
  double worst_accept = 0.0, worst_residual = 0.0;
  std::size_t none_mismatch = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = pick(rng, 2, 8);
    const bool sparse = rng.uniform() < 0.3;
    const TokenDistribution q = random_distribution(n, rng, sparse);
    const TokenDistribution p = random_distribution(n, rng, sparse);
    const double alpha = rng.uniform() * 0.999;
    const double beta = uniform_in(rng, 1.0 - alpha, 3.0);
    const LossyComparison c = lossy_equivalence(q, p, alpha, beta);
    worst_accept = std::max(worst_accept, c.max_accept_diff);
    worst_residual = std::max(worst_residual, c.max_residual_diff);
    if (!c.residual_none_agrees) ++none_mismatch;
  }
  const bool ok = worst_accept <= 1e-12 && worst_residual <= 1e-12 && none_mismatch == 0;
  return result("lossy_equivalence", ok,
                std::to_string(instances) + " instances, acceptance gap " + sci(worst_accept) + ", residual gap " +
                    sci(worst_residual) + ", empty-residual mismatches " + std::to_string(none_mismatch));
}

CheckResult check_optimal_deferral(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 4);
  std::size_t mismatches = 0, compared = 0;
  for (RiskMode mode : {RiskMode::kSequential, RiskMode::kSpeculative}) {
    for (std::size_t i = 0; i < instances; ++i) {
      const std::size_t n = pick(rng, 2, 8);
      const LossKind loss = rng.bits() & 1 ? LossKind::kLog : LossKind::kZeroOne;
      const TokenDistribution truth = random_distribution(n, rng);
      const TokenDistribution q = random_distribution(n, rng);
      const TokenDistribution p = random_distribution(n, rng);
      const double alpha = rng.uniform();
      const double r0 = deferral_risk(truth, q, p, 0, loss, alpha, mode);
      const double r1 = deferral_risk(truth, q, p, 1, loss, alpha, mode);
      if (std::abs(r0 - r1) <= 1e-9) continue;
      ++compared;
      if (optimal_r(truth, q, p, loss, alpha, mode) != brute_force_r(truth, q, p, loss, alpha, mode)) ++mismatches;
    }
  }
  return result("optimal_deferral", mismatches == 0,
                std::to_string(compared) + " separable instances over both modes, " + std::to_string(mismatches) +
                    " mismatches");
}

CheckResult check_regret_bounds(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 5);
  std::size_t violations = 0;
  double worst_slack = -1e300;
  for (LossKind loss : {LossKind::kZeroOne, LossKind::kLog}) {
    for (std::size_t i = 0; i < instances; ++i) {
      const std::size_t n = pick(rng, 2, 8);
      const TokenDistribution truth = random_distribution(n, rng, loss == LossKind::kZeroOne);
      const TokenDistribution q = random_distribution(n, rng, loss == LossKind::kZeroOne);
      const TokenDistribution p = random_distribution(n, rng, loss == LossKind::kZeroOne);
      const RiskReport rep = regret_check(truth, q, p, rng.uniform(), loss);
      worst_slack = std::max(worst_slack, rep.regret - rep.bound);
      if (rep.regret > rep.bound + 1e-9) ++violations;
    }
  }
  return result("regret_bounds", violations == 0,
                std::to_string(2 * instances) + " instances, " + std::to_string(violations) +
                    " violations, max regret - bound " + sci(worst_slack));
}

CheckResult check_greedy_equivalence(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 6);
  constexpr std::array<double, 5> kAlphas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t differences = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = pick(rng, 2, 8);
    const bool sparse = rng.uniform() < 0.3;
    const TokenDistribution q = random_distribution(n, rng, sparse);
    // Shared modes half the time so both the TV = 0 and TV = 1 cases occur.
    TokenDistribution p = rng.uniform() < 0.5 ? q : random_distribution(n, rng, sparse);
    if (p == q) {
      std::vector<double> w(p.probs().begin(), p.probs().end());
      for (double& x : w) x *= rng.uniform() * 0.5 + 0.5;
      w[mode(q).token] += 1.0;
      p = normalize(TokenDistribution(std::move(w)));
    }
    const StepView view = StepView::at_temperature(q, p, 0.0);
    for (double alpha : kAlphas) {
      const TokenDistribution pi_opt = target(TargetSpec::cascade({RuleKind::kOpt, alpha}), view);
      const TokenDistribution pi_diff = target(TargetSpec::cascade({RuleKind::kDiff, alpha}), view);
      bool same = true;
      for (std::size_t v = 0; v < n; ++v) {
        if (view.q[v] > 0.0 &&
            std::min(1.0, pi_opt[v] / view.q[v]) != std::min(1.0, pi_diff[v] / view.q[v])) {
          same = false;
        }
      }
      const auto ro = residual(pi_opt, view.q);
      const auto rd = residual(pi_diff, view.q);
      if (ro.has_value() != rd.has_value() || (ro && !(*ro == *rd))) same = false;
      if (!same) ++differences;
    }
  }
  return result("greedy_equivalence", differences == 0,
                std::to_string(instances) + " instances x " + std::to_string(kAlphas.size()) + " alphas, " +
                    std::to_string(differences) + " differing rounds");
}

CheckResult check_token_normalization(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 7);
  double worst = 0.0;
  for (TokenRuleKind kind : kAllTokenRules) {
    for (std::size_t i = 0; i < instances; ++i) {
      const std::size_t n = pick(rng, 2, 8);
      const bool sparse = rng.uniform() < 0.3;
      const TokenDistribution q = random_distribution(n, rng, sparse);
      const TokenDistribution p = random_distribution(n, rng, sparse);
      const TokenDistribution pi = target(TargetSpec::token_cascade({kind, rng.uniform()}), q, p);
      worst = std::max(worst, std::abs(pi.sum() - 1.0));
    }
  }
  return result("token_normalization", worst <= 1e-9,
                std::to_string(3 * instances) + " instances, max |sum - 1| " + sci(worst));
}

CheckResult check_sampler_goodness_of_fit(std::uint64_t seed, std::size_t instances, std::size_t samples) {
  Rng rng(seed, 8);
  constexpr double kSignificance = 1e-3;
  std::size_t failures = 0, done = 0;
  std::string worst;
  double min_margin = 1e300;
  while (done < instances) {
    const std::size_t vocab = pick(rng, 2, 6);
    const std::size_t gamma = pick(rng, 1, 3);
    const TabularLM q = random_model(vocab, 1, rng);
    const TabularLM p = random_model(vocab, 1, rng);
    const TargetSpec spec = random_spec(rng, vocab);
    if (spec.kind == TargetKind::kLossy && !target_is_distribution(q, p, spec, 1.0)) continue;
    const std::vector<Token> prompt{static_cast<Token>(pick(rng, 0, vocab - 2))};
    const std::vector<double> expected_p = exact_block_law(q, p, spec, prompt, gamma).first_token_marginal(vocab);

    std::vector<double> observed(vocab, 0.0);
    Rng sampler(seed, 0x6769746f66000000ull, done);
    for (std::size_t s = 0; s < samples; ++s) {
      const SpecSample out = gen_spec_sample(q, p, spec, prompt, gamma, 1.0, sampler);
      observed[out.block.front()] += 1.0;
    }
    // Pool sparse bins so every expected count is at least 5.
    std::vector<std::pair<double, double>> bins;  // (observed, expected)
    std::pair<double, double> pooled{0.0, 0.0};
    for (std::size_t v = 0; v < vocab; ++v) {
      const double e = expected_p[v] * static_cast<double>(samples);
      if (e >= 5.0)
        bins.emplace_back(observed[v], e);
      else
        pooled = {pooled.first + observed[v], pooled.second + e};
    }
    if (pooled.second > 0.0) {
      if (pooled.second >= 5.0 || bins.empty()) {
        bins.push_back(pooled);
      } else {
        bins.back().first += pooled.first;
        bins.back().second += pooled.second;
      }
    }
    ++done;
    if (bins.size() < 2) continue;
    double stat = 0.0;
    for (const auto& [o, e] : bins) stat += (o - e) * (o - e) / e;
    const boost::math::chi_squared dist(static_cast<double>(bins.size() - 1));
    const double critical = boost::math::quantile(boost::math::complement(dist, kSignificance));
    min_margin = std::min(min_margin, critical - stat);
    if (stat > critical) {
      ++failures;
      worst = " (failed: stat " + sci(stat) + " > " + sci(critical) + ")";
    }
  }
  return result("sampler_goodness_of_fit", failures <= 1,
                std::to_string(instances) + " instances x " + std::to_string(samples) + " samples, " +
                    std::to_string(failures) + " rejections at 1e-3" + worst);
}

CheckResult check_beta_tuning(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 9);
  constexpr std::size_t kDense = 10 * kBetaGridPoints;
  std::size_t violations = 0;
  double worst = -1e300;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = pick(rng, 2, 6);
    const bool sparse = rng.uniform() < 0.3;
    const TokenDistribution q = random_distribution(n, rng, sparse);
    const TokenDistribution p = random_distribution(n, rng, sparse);
    const double alpha = 0.5 * rng.uniform();
    const BetaTuning tuned = tune_beta(q, p, alpha);
    const double lo = std::max(1.0 - alpha, 1e-6);
    double best_scan = 1e300;
    for (std::size_t k = 0; k < kDense; ++k) {
      const double beta = lo + (kBetaGridMax - lo) * static_cast<double>(k) / static_cast<double>(kDense - 1);
      best_scan = std::min(best_scan, lossy_condition_residual(q, p, alpha, beta));
    }
    const double own = lossy_condition_residual(q, p, alpha, tuned.beta);
    worst = std::max(worst, own - best_scan);
    if (own > best_scan + 1e-9) ++violations;
  }
  return result("beta_tuning", violations == 0,
                std::to_string(instances) + " instances, " + std::to_string(violations) +
                    " beaten by the dense scan, max excess " + sci(worst));
}

std::vector<CheckResult> run_oracle_suite(std::uint64_t seed) {
  return {
      timed([&] { return check_speculative_correctness(seed); }),
      timed([&] { return check_rejection_rate(seed); }),
      timed([&] { return check_lossy_equivalence(seed); }),
      timed([&] { return check_optimal_deferral(seed); }),
      timed([&] { return check_regret_bounds(seed); }),
      timed([&] { return check_greedy_equivalence(seed); }),
      timed([&] { return check_token_normalization(seed); }),
      timed([&] { return check_sampler_goodness_of_fit(seed); }),
      timed([&] { return check_beta_tuning(seed); }),
  };
}

}  // namespace speccascade
