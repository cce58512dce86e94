// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/deferral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace speccascade {

namespace {

constexpr std::array<std::pair<RuleKind, std::string_view>, 7> kRuleNames{{
    {RuleKind::kChow, "chow"},
    {RuleKind::kChowLog, "chow_log"},
    {RuleKind::kDiff, "diff"},
    {RuleKind::kDiffLog, "diff_log"},
    {RuleKind::kOpt, "opt"},
    {RuleKind::kOptLog, "opt_log"},
    {RuleKind::kBild, "bild"},
}};

constexpr std::array<std::pair<TokenRuleKind, std::string_view>, 3> kTokenRuleNames{{
    {TokenRuleKind::kV1, "v1"},
    {TokenRuleKind::kV2, "v2"},
    {TokenRuleKind::kV3, "v3"},
}};

bool in_unit(double a) { return a >= 0.0 && a <= 1.0; }

double max_prob(const TokenDistribution& d) { return mode(d).probability; }

}  // namespace

void check_rule(const DeferralRule& rule) {
  const double a = rule.alpha;
  switch (rule.kind) {
    case RuleKind::kChow:
    case RuleKind::kDiff:
    case RuleKind::kOpt:
      if (!in_unit(a)) throw std::invalid_argument(std::string(to_string(rule.kind)) + ": alpha must lie in [0, 1]");
      return;
    case RuleKind::kBild:
      if (!(a >= 0.0 && a <= 10.0)) throw std::invalid_argument("bild: alpha must lie in [0, 10]");
      return;
    case RuleKind::kChowLog:
    case RuleKind::kDiffLog:
    case RuleKind::kOptLog:
      if (!(a >= 0.0) || !std::isfinite(a)) {
        throw std::invalid_argument(std::string(to_string(rule.kind)) + ": alpha must be finite and >= 0");
      }
      return;
  }
}

void check_rule(const TokenRule& rule) {
  if (!in_unit(rule.alpha)) {
    throw std::invalid_argument(std::string(to_string(rule.kind)) + ": alpha must lie in [0, 1]");
  }
}

double alpha_domain_max(RuleKind kind, std::size_t vocab_size) {
  switch (kind) {
    case RuleKind::kBild:
      return 10.0;
    case RuleKind::kChowLog:
    case RuleKind::kDiffLog:
    case RuleKind::kOptLog:
      return std::log(static_cast<double>(vocab_size));
    default:
      return 1.0;
  }
}

bool rule_needs_verifier(RuleKind kind) { return kind != RuleKind::kChow && kind != RuleKind::kChowLog; }

std::string_view to_string(RuleKind kind) {
  for (const auto& [k, name] : kRuleNames)
    if (k == kind) return name;
  return "?";
}

std::string_view to_string(TokenRuleKind kind) {
  for (const auto& [k, name] : kTokenRuleNames)
    if (k == kind) return name;
  return "?";
}

std::optional<RuleKind> parse_rule_kind(std::string_view name) {
  for (const auto& [k, n] : kRuleNames)
    if (n == name) return k;
  return std::nullopt;
}

std::optional<TokenRuleKind> parse_token_rule_kind(std::string_view name) {
  for (const auto& [k, n] : kTokenRuleNames)
    if (n == name) return k;
  return std::nullopt;
}

StepView StepView::at_temperature(const TokenDistribution& q_raw, const TokenDistribution& p_raw,
                                  double temperature) {
  require_same_vocab(q_raw, p_raw);
  return StepView{q_raw, p_raw, apply_temperature(q_raw, temperature), apply_temperature(p_raw, temperature),
                  temperature};
}

StepView StepView::untempered(const TokenDistribution& q, const TokenDistribution& p) {
  require_same_vocab(q, p);
  return StepView{q, p, q, p, 1.0};
}

double bild_discrepancy(const TokenDistribution& q, const TokenDistribution& p, bool greedy) {
  require_same_vocab(q, p);
  if (greedy) {
    const double top = p[mode(q).token];
    return top > 0.0 ? -std::log(top) : std::numeric_limits<double>::infinity();
  }
  return cross_entropy(q, p);
}

int delta(const DeferralRule& rule, const StepView& view) {
  check_rule(rule);
  const double a = rule.alpha;
  switch (rule.kind) {
    case RuleKind::kChow:
    case RuleKind::kChowLog:
      return delta_small_only(rule, view.q_raw);
    case RuleKind::kDiff:
      return max_prob(view.q_raw) < max_prob(view.p_raw) - a ? 1 : 0;
    case RuleKind::kDiffLog:
      return entropy(view.p_raw) < entropy(view.q_raw) - a ? 1 : 0;
    case RuleKind::kOpt:
      return max_prob(view.q_raw) < max_prob(view.p_raw) - a * tv_distance(view.p, view.q) ? 1 : 0;
    case RuleKind::kOptLog:
      return entropy(view.p_raw) < entropy(view.q_raw) - a * tv_distance(view.p, view.q) ? 1 : 0;
    case RuleKind::kBild:
      return bild_discrepancy(view.q_raw, view.p_raw, view.temperature == 0.0) > a ? 1 : 0;
  }
  throw std::logic_error("unknown rule kind");
}

int delta(const DeferralRule& rule, const TokenDistribution& q, const TokenDistribution& p) {
  return delta(rule, StepView::untempered(q, p));
}

int delta_small_only(const DeferralRule& rule, const TokenDistribution& q_raw) {
  check_rule(rule);
  switch (rule.kind) {
    case RuleKind::kChow:
      return max_prob(q_raw) < 1.0 - rule.alpha ? 1 : 0;
    case RuleKind::kChowLog:
      return entropy(q_raw) > rule.alpha ? 1 : 0;
    default:
      throw std::invalid_argument(std::string(to_string(rule.kind)) + " needs the verifier distribution");
  }
}

int token_r(const TokenRule& rule, const TokenDistribution& q, const TokenDistribution& p, Token v) {
  check_rule(rule);
  require_same_vocab(q, p);
  const double top_p = max_prob(p);
  switch (rule.kind) {
    case TokenRuleKind::kV1:
      return q.at(v) < top_p - rule.alpha ? 1 : 0;
    case TokenRuleKind::kV2:
      return p.at(v) < top_p - rule.alpha ? 1 : 0;
    case TokenRuleKind::kV3:
      return p.at(v) < top_p * (1.0 - rule.alpha) ? 1 : 0;
  }
  throw std::logic_error("unknown token rule kind");
}

TargetSpec TargetSpec::verifier() { return TargetSpec{}; }

TargetSpec TargetSpec::lossy(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("lossy: alpha must lie in [0, 1)");
  if (!(beta >= 1.0 - alpha) || !std::isfinite(beta)) throw std::invalid_argument("lossy: beta must be >= 1 - alpha");
  TargetSpec s;
  s.kind = TargetKind::kLossy;
  s.alpha = alpha;
  s.beta = beta;
  return s;
}

TargetSpec TargetSpec::lossy_tuned(double alpha) {
  TargetSpec s = lossy(alpha, 1.0);
  s.beta_policy = BetaPolicy::kTuned;
  return s;
}

TargetSpec TargetSpec::bild_star(double alpha) {
  DeferralRule rule{RuleKind::kBild, alpha};
  check_rule(rule);
  TargetSpec s;
  s.kind = TargetKind::kBildStar;
  s.rule = rule;
  s.alpha = alpha;
  return s;
}

TargetSpec TargetSpec::cascade(DeferralRule rule) {
  check_rule(rule);
  TargetSpec s;
  s.kind = TargetKind::kCascade;
  s.rule = rule;
  s.alpha = rule.alpha;
  return s;
}

TargetSpec TargetSpec::token_cascade(TokenRule rule) {
  check_rule(rule);
  TargetSpec s;
  s.kind = TargetKind::kTokenCascade;
  s.token_rule = rule;
  s.alpha = rule.alpha;
  return s;
}

namespace {

TokenDistribution lossy_target(const TokenDistribution& q, const TokenDistribution& p, double alpha, double beta) {
  std::vector<double> pi(q.size());
  for (std::size_t v = 0; v < q.size(); ++v) {
    pi[v] = std::max(std::min(q[v], p[v] / (1.0 - alpha)), p[v] / beta);
  }
  return TokenDistribution(std::move(pi));
}

}  // namespace

TokenDistribution target(const TargetSpec& spec, const StepView& view) {
  switch (spec.kind) {
    case TargetKind::kVerifier:
      return view.p;
    case TargetKind::kLossy: {
      if (!(spec.alpha >= 0.0 && spec.alpha < 1.0)) throw std::invalid_argument("lossy: alpha must lie in [0, 1)");
      double beta = spec.beta;
      if (spec.beta_policy == BetaPolicy::kTuned) {
        beta = tune_beta(view.q, view.p, spec.alpha).beta;
      } else if (!(beta >= 1.0 - spec.alpha)) {
        throw std::invalid_argument("lossy: beta must be >= 1 - alpha");
      }
      return lossy_target(view.q, view.p, spec.alpha, beta);
    }
    case TargetKind::kBildStar:
      return binary_mixture(view.q, view.p, delta(DeferralRule{RuleKind::kBild, spec.alpha}, view));
    case TargetKind::kCascade:
      return binary_mixture(view.q, view.p, delta(spec.rule, view));
    case TargetKind::kTokenCascade: {
      const std::size_t n = view.q.size();
      std::vector<int> r(n);
      double eta = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        r[v] = token_r(spec.token_rule, view.q_raw, view.p_raw, static_cast<Token>(v));
        if (r[v]) eta += view.q[v];
      }
      std::vector<double> pi(n);
      for (std::size_t v = 0; v < n; ++v) pi[v] = view.q[v] * (1 - r[v]) + view.p[v] * eta;
      return TokenDistribution(std::move(pi));
    }
  }
  throw std::logic_error("unknown target kind");
}

TokenDistribution target(const TargetSpec& spec, const TokenDistribution& q, const TokenDistribution& p) {
  return target(spec, StepView::untempered(q, p));
}

namespace {

double lossy_lhs(const TokenDistribution& q, const TokenDistribution& p, double alpha) {
  double s = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) s += std::max(0.0, q[v] - p[v] / (1.0 - alpha));
  return s;
}

double lossy_rhs(const TokenDistribution& q, const TokenDistribution& p, double beta) {
  double s = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) s += std::max(0.0, p[v] / beta - q[v]);
  return s;
}

}  // namespace

double lossy_condition_residual(const TokenDistribution& q, const TokenDistribution& p, double alpha,
                                double beta) {
  require_same_vocab(q, p);
  return std::abs(lossy_lhs(q, p, alpha) - lossy_rhs(q, p, beta));
}

BetaTuning tune_beta(const TokenDistribution& q, const TokenDistribution& p, double alpha) {
  require_same_vocab(q, p);
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("tune_beta: alpha must lie in [0, 1)");
  const double lhs = lossy_lhs(q, p, alpha);
  // gap(beta) = rhs(beta) - lhs is non-increasing in beta.
  auto gap = [&](double beta) { return lossy_rhs(q, p, beta) - lhs; };

  const double lo = std::max(1.0 - alpha, 1e-6);
  const double hi = kBetaGridMax;
  const double step = (hi - lo) / static_cast<double>(kBetaGridPoints - 1);
  auto grid = [&](std::size_t i) { return i + 1 == kBetaGridPoints ? hi : lo + step * static_cast<double>(i); };

  BetaTuning best{lo, std::abs(gap(lo))};
  std::optional<std::size_t> crossing;  // first cell with gap(left) > 0 >= gap(right)
  double prev_gap = gap(lo);
  for (std::size_t i = 1; i < kBetaGridPoints; ++i) {
    const double b = grid(i);
    const double g = gap(b);
    if (std::abs(g) < best.residual) best = {b, std::abs(g)};
    if (!crossing && prev_gap > 0.0 && g <= 0.0) crossing = i - 1;
    prev_gap = g;
  }

  if (crossing) {
    double left = grid(*crossing), right = grid(*crossing + 1);
    for (int it = 0; it < 200 && right - left > 0.0; ++it) {
      const double mid = 0.5 * (left + right);
      if (mid <= left || mid >= right) break;
      if (gap(mid) > 0.0)
        left = mid;
      else
        right = mid;
    }
    for (double b : {right, left}) {
      const double r = std::abs(gap(b));
      if (r < best.residual || (r == best.residual && b < best.beta)) best = {b, r};
    }
  }
  return best;
}

}  // namespace speccascade
