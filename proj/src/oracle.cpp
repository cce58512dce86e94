// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace speccascade {

double ExactLaw::total() const {
  double s = 0.0;
  for (const auto& [seq, pr] : probs) s += pr;
  return s;
}

double ExactLaw::prob(const std::vector<Token>& seq) const {
  const auto it = probs.find(seq);
  return it == probs.end() ? 0.0 : it->second;
}

std::vector<double> ExactLaw::first_token_marginal(std::size_t vocab_size) const {
  std::vector<double> m(vocab_size, 0.0);
  for (const auto& [seq, pr] : probs) {
    if (!seq.empty()) m.at(seq.front()) += pr;
  }
  return m;
}

double ExactLaw::max_abs_diff(const ExactLaw& a, const ExactLaw& b) {
  double d = 0.0;
  for (const auto& [seq, pr] : a.probs) d = std::max(d, std::abs(pr - b.prob(seq)));
  for (const auto& [seq, pr] : b.probs) d = std::max(d, std::abs(pr - a.prob(seq)));
  return d;
}

namespace {

void check_budget(const TabularLM& q, const TabularLM& p, std::size_t gamma, std::size_t length) {
  if (q.vocab_size() != p.vocab_size() || q.eos() != p.eos()) {
    throw std::invalid_argument("oracle: models disagree on vocab or eos");
  }
  if (q.vocab_size() > kOracleMaxVocab) {
    throw BudgetError("oracle: vocab size " + std::to_string(q.vocab_size()) + " exceeds " +
                      std::to_string(kOracleMaxVocab));
  }
  if (gamma > kOracleMaxGamma) {
    throw BudgetError("oracle: gamma " + std::to_string(gamma) + " exceeds " + std::to_string(kOracleMaxGamma));
  }
  if (length > kOracleMaxLength) {
    throw BudgetError("oracle: length " + std::to_string(length) + " exceeds " + std::to_string(kOracleMaxLength));
  }
}

struct Position {
  StepView view;
  TokenDistribution pi;
};

Position position_at(const TabularLM& q, const TabularLM& p, const TargetSpec& spec, const std::vector<Token>& ctx,
                     double temperature) {
  StepView view = StepView::at_temperature(q.next_dist(ctx), p.next_dist(ctx), temperature);
  TokenDistribution pi = target(spec, view);
  return {std::move(view), std::move(pi)};
}

void add(ExactLaw& law, const std::vector<Token>& seq, double pr) {
  if (pr > 0.0) law.probs[seq] += pr;
}

// Emits `dist` (weights, normalized here) appended to `emitted`.
void spread(ExactLaw& law, std::vector<Token>& emitted, const TokenDistribution& dist, double mass) {
  const double s = dist.sum();
  for (std::size_t y = 0; y < dist.size(); ++y) {
    if (dist[y] <= 0.0) continue;
    emitted.push_back(static_cast<Token>(y));
    add(law, emitted, mass * dist[y] / s);
    emitted.pop_back();
  }
}

void enumerate_block(const TabularLM& q, const TabularLM& p, const TargetSpec& spec, double temperature,
                     std::vector<Token>& ctx, std::vector<Token>& emitted, std::size_t j, std::size_t gamma,
                     double mass, ExactLaw& law) {
  const Position pos = position_at(q, p, spec, ctx, temperature);
  if (j == gamma) {
    spread(law, emitted, pos.pi, mass);
    return;
  }
  const TokenDistribution& qd = pos.view.q;
  const auto res = residual(pos.pi, qd);
  const TokenDistribution& replacement = res ? *res : pos.pi;
  double reject_mass = 0.0;
  for (std::size_t x = 0; x < qd.size(); ++x) {
    if (qd[x] <= 0.0) continue;
    const double kappa = std::min(1.0, pos.pi[x] / qd[x]);
    reject_mass += qd[x] * (1.0 - kappa);
    const double keep = mass * qd[x] * kappa;
    if (keep <= 0.0) continue;
    const Token t = static_cast<Token>(x);
    emitted.push_back(t);
    if (t == q.eos()) {
      add(law, emitted, keep);
    } else {
      ctx.push_back(t);
      enumerate_block(q, p, spec, temperature, ctx, emitted, j + 1, gamma, keep, law);
      ctx.pop_back();
    }
    emitted.pop_back();
  }
  if (reject_mass > 0.0) spread(law, emitted, replacement, mass * reject_mass);
}

void enumerate_autoregressive(const TabularLM& q, const TabularLM& p, const TargetSpec& spec, double temperature,
                              std::vector<Token>& ctx, std::vector<Token>& emitted, std::size_t length, double mass,
                              ExactLaw& law) {
  const Position pos = position_at(q, p, spec, ctx, temperature);
  const double s = pos.pi.sum();
  for (std::size_t y = 0; y < pos.pi.size(); ++y) {
    const double pr = mass * pos.pi[y] / s;
    if (!(pr > 0.0)) continue;
    const Token t = static_cast<Token>(y);
    emitted.push_back(t);
    if (t == q.eos() || emitted.size() == length) {
      add(law, emitted, pr);
    } else {
      ctx.push_back(t);
      enumerate_autoregressive(q, p, spec, temperature, ctx, emitted, length, pr, law);
      ctx.pop_back();
    }
    emitted.pop_back();
  }
}

void enumerate_decode(const TabularLM& q, const TabularLM& p, const TargetSpec& spec, double temperature,
                      std::vector<Token>& ctx, std::vector<Token>& emitted, std::size_t gamma, std::size_t length,
                      double mass, ExactLaw& law) {
  if (emitted.size() == length || (!emitted.empty() && emitted.back() == q.eos())) {
    add(law, emitted, mass);
    return;
  }
  const std::size_t g = std::min(gamma, length - emitted.size() - 1);
  const ExactLaw block = exact_block_law(q, p, spec, ctx, g, temperature);
  for (const auto& [seq, pr] : block.probs) {
    for (Token t : seq) {
      ctx.push_back(t);
      emitted.push_back(t);
    }
    enumerate_decode(q, p, spec, temperature, ctx, emitted, gamma, length, mass * pr, law);
    ctx.resize(ctx.size() - seq.size());
    emitted.resize(emitted.size() - seq.size());
  }
}

}  // namespace

ExactLaw exact_block_law(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                         std::span<const Token> prefix, std::size_t gamma, double temperature) {
  check_budget(q, p, gamma, 0);
  ExactLaw law;
  std::vector<Token> ctx(prefix.begin(), prefix.end());
  std::vector<Token> emitted;
  enumerate_block(q, p, spec, temperature, ctx, emitted, 0, gamma, 1.0, law);
  return law;
}

ExactLaw exact_autoregressive_law(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                                  std::span<const Token> prefix, std::size_t length, double temperature) {
  check_budget(q, p, 0, length);
  if (length < 1) throw std::invalid_argument("oracle: length must be >= 1");
  ExactLaw law;
  std::vector<Token> ctx(prefix.begin(), prefix.end());
  std::vector<Token> emitted;
  enumerate_autoregressive(q, p, spec, temperature, ctx, emitted, length, 1.0, law);
  return law;
}

ExactLaw exact_decode_law(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                          std::span<const Token> prefix, std::size_t gamma, std::size_t length, double temperature) {
  check_budget(q, p, gamma, length);
  if (length < 1 || gamma < 1) throw std::invalid_argument("oracle: gamma and length must be >= 1");
  ExactLaw law;
  std::vector<Token> ctx(prefix.begin(), prefix.end());
  std::vector<Token> emitted;
  enumerate_decode(q, p, spec, temperature, ctx, emitted, gamma, length, 1.0, law);
  return law;
}

RejectionRate rejection_rate(const TokenDistribution& q, const TokenDistribution& p, int r) {
  const TokenDistribution pi = binary_mixture(q, p, r);
  double direct = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) {
    if (q[v] > 0.0) direct += q[v] * (1.0 - std::min(1.0, pi[v] / q[v]));
  }
  return {direct, r * tv_distance(p, q)};
}

namespace {

// Direct sum over outcomes y of truth(y) * loss(y, model).
double expected_loss_direct(const TokenDistribution& truth, const TokenDistribution& model, LossKind loss) {
  const Token pick = mode(model).token;
  double s = 0.0;
  for (std::size_t y = 0; y < truth.size(); ++y) {
    if (truth[y] <= 0.0) continue;
    if (loss == LossKind::kZeroOne) {
      s += truth[y] * (y == pick ? 0.0 : 1.0);
    } else {
      s += model[y] > 0.0 ? -truth[y] * std::log(model[y]) : std::numeric_limits<double>::infinity();
    }
  }
  return s;
}

double deferral_cost(const TokenDistribution& q, const TokenDistribution& p, double alpha, RiskMode mode) {
  return mode == RiskMode::kSequential ? alpha : alpha * tv_distance(p, q);
}

}  // namespace

double deferral_risk(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p, int r,
                     LossKind loss, double alpha, RiskMode mode) {
  require_same_vocab(truth, q);
  require_same_vocab(truth, p);
  if (r == 0) return expected_loss_direct(truth, q, loss);
  return expected_loss_direct(truth, p, loss) + deferral_cost(q, p, alpha, mode);
}

double deferral_risk(const TabularLM& truth, const TabularLM& q, const TabularLM& p, std::span<const Token> prefix,
                     int r, LossKind loss, double alpha, RiskMode mode) {
  return deferral_risk(truth.next_dist(prefix), q.next_dist(prefix), p.next_dist(prefix), r, loss, alpha, mode);
}

int optimal_r(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p, LossKind loss,
              double alpha, RiskMode mode) {
  return expected_loss(truth, q, loss) > expected_loss(truth, p, loss) + deferral_cost(q, p, alpha, mode) ? 1 : 0;
}

int optimal_r(const TabularLM& truth, const TabularLM& q, const TabularLM& p, std::span<const Token> prefix,
              LossKind loss, double alpha, RiskMode mode) {
  return optimal_r(truth.next_dist(prefix), q.next_dist(prefix), p.next_dist(prefix), loss, alpha, mode);
}

int brute_force_r(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p,
                  LossKind loss, double alpha, RiskMode mode) {
  const double r0 = deferral_risk(truth, q, p, 0, loss, alpha, mode);
  const double r1 = deferral_risk(truth, q, p, 1, loss, alpha, mode);
  return r1 < r0 ? 1 : 0;
}

RiskReport regret_check(const TokenDistribution& truth, const TokenDistribution& q, const TokenDistribution& p,
                        double alpha, LossKind loss) {
  require_same_vocab(truth, q);
  require_same_vocab(truth, p);
  RiskReport rep{};
  rep.risk0 = deferral_risk(truth, q, p, 0, loss, alpha, RiskMode::kSpeculative);
  rep.risk1 = deferral_risk(truth, q, p, 1, loss, alpha, RiskMode::kSpeculative);
  rep.r_star = optimal_r(truth, q, p, loss, alpha, RiskMode::kSpeculative);
  rep.r_brute = rep.risk1 < rep.risk0 ? 1 : 0;
  if (loss == LossKind::kZeroOne) {
    rep.r_plugin = delta(DeferralRule{RuleKind::kOpt, alpha}, q, p);
    double dq = 0.0, dp = 0.0;
    for (std::size_t v = 0; v < truth.size(); ++v) {
      dq = std::max(dq, std::abs(truth[v] - q[v]));
      dp = std::max(dp, std::abs(truth[v] - p[v]));
    }
    rep.bound = dq + dp;
  } else {
    for (std::size_t v = 0; v < truth.size(); ++v) {
      if (!(q[v] > 0.0) || !(p[v] > 0.0)) throw std::invalid_argument("regret_check: log loss needs q, p > 0");
    }
    rep.r_plugin = delta(DeferralRule{RuleKind::kOptLog, alpha}, q, p);
    double bq = 0.0, bp = 0.0, sq = 0.0, sp = 0.0;
    for (std::size_t v = 0; v < truth.size(); ++v) {
      bq = std::max(bq, std::abs(std::log(q[v])));
      bp = std::max(bp, std::abs(std::log(p[v])));
      sq += std::abs(truth[v] - q[v]);
      sp += std::abs(truth[v] - p[v]);
    }
    rep.bound = bq * sq + bp * sp;
  }
  rep.regret = (rep.r_plugin ? rep.risk1 : rep.risk0) - std::min(rep.risk0, rep.risk1);
  return rep;
}

EquivalenceReport unconstrained_equivalence_check(double c0, double c1, double c2, double budget) {
  EquivalenceReport rep{};
  const bool feasible1 = c2 <= budget;
  rep.constrained_r = feasible1 && c1 < c0 ? 1 : 0;
  rep.alpha = feasible1 ? 0.0 : std::max(0.0, (c0 - c1) / c2) + 1.0;
  rep.unconstrained_r = c0 > c1 + rep.alpha * c2 ? 1 : 0;
  rep.ok = rep.constrained_r == rep.unconstrained_r;
  return rep;
}

LossyComparison lossy_equivalence(const TokenDistribution& q, const TokenDistribution& p, double alpha,
                                  double beta) {
  require_same_vocab(q, p);
  const TokenDistribution pi = target(TargetSpec::lossy(alpha, beta), q, p);
  LossyComparison out{0.0, 0.0, true};
  for (std::size_t v = 0; v < q.size(); ++v) {
    if (!(q[v] > 0.0)) continue;
    const double via_target = std::min(1.0, pi[v] / q[v]);
    const double recipe = std::min(1.0, p[v] / ((1.0 - alpha) * q[v]));
    out.max_accept_diff = std::max(out.max_accept_diff, std::abs(via_target - recipe));
  }
  std::vector<double> w(q.size());
  double mass = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) {
    w[v] = std::max(0.0, p[v] / beta - q[v]);
    mass += w[v];
  }
  const auto res = residual(pi, q);
  const bool recipe_none = !(mass > 0.0);
  out.residual_none_agrees = recipe_none == !res.has_value();
  if (res && !recipe_none) {
    for (std::size_t v = 0; v < q.size(); ++v) {
      out.max_residual_diff = std::max(out.max_residual_diff, std::abs((*res)[v] - w[v] / mass));
    }
  }
  return out;
}

}  // namespace speccascade
