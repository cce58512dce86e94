// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/engine.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace speccascade {

DecodeCounters& DecodeCounters::operator+=(const DecodeCounters& o) {
  small_calls += o.small_calls;
  large_rounds += o.large_rounds;
  large_scorings += o.large_scorings;
  large_calls += o.large_calls;
  drafted += o.drafted;
  rejected += o.rejected;
  emitted += o.emitted;
  forced_consults += o.forced_consults;
  empty_residuals += o.empty_residuals;
  return *this;
}

namespace {

constexpr std::array<std::string_view, 8> kStrategyNames{
    "spec_decode",   "spec_cascade",   "token_spec_cascade", "lossy_spec",
    "bild_star",     "token_cascade",  "oracle_cascade",     "seq_cascade",
};

Strategy speculative(std::string name, TargetSpec spec, std::size_t gamma) {
  if (gamma < 1) throw std::invalid_argument(name + ": gamma must be >= 1");
  Strategy s;
  s.kind = StrategyKind::kSpeculative;
  s.name = std::move(name);
  s.target = spec;
  s.alpha = spec.alpha;
  s.gamma = gamma;
  return s;
}

RuleKind require_rule(std::string_view method, std::string_view rule) {
  const auto kind = parse_rule_kind(rule);
  if (!kind) throw std::invalid_argument(std::string(method) + ": unknown rule '" + std::string(rule) + "'");
  return *kind;
}

}  // namespace

Strategy Strategy::spec_decode(std::size_t gamma) { return speculative("spec_decode", TargetSpec::verifier(), gamma); }

Strategy Strategy::spec_cascade(DeferralRule rule, std::size_t gamma) {
  Strategy s = speculative("spec_cascade", TargetSpec::cascade(rule), gamma);
  s.rule = rule;
  return s;
}

Strategy Strategy::token_spec_cascade(TokenRule rule, std::size_t gamma) {
  return speculative("token_spec_cascade", TargetSpec::token_cascade(rule), gamma);
}

Strategy Strategy::lossy_spec(double alpha, std::optional<double> beta, std::size_t gamma) {
  return speculative("lossy_spec", beta ? TargetSpec::lossy(alpha, *beta) : TargetSpec::lossy_tuned(alpha), gamma);
}

Strategy Strategy::bild_star(double alpha, std::size_t gamma) {
  return speculative("bild_star", TargetSpec::bild_star(alpha), gamma);
}

Strategy Strategy::token_cascade(DeferralRule rule) {
  check_rule(rule);
  if (rule_needs_verifier(rule.kind)) {
    throw std::invalid_argument("token_cascade: rule " + std::string(to_string(rule.kind)) +
                                " needs the large model before deferring; use chow or chow_log");
  }
  Strategy s;
  s.kind = StrategyKind::kTokenCascade;
  s.name = "token_cascade";
  s.rule = rule;
  s.alpha = rule.alpha;
  return s;
}

Strategy Strategy::oracle_cascade(DeferralRule rule) {
  check_rule(rule);
  Strategy s;
  s.kind = StrategyKind::kOracleCascade;
  s.name = "oracle_cascade";
  s.rule = rule;
  s.alpha = rule.alpha;
  return s;
}

Strategy Strategy::seq_cascade(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("seq_cascade: alpha must lie in [0, 1]");
  Strategy s;
  s.kind = StrategyKind::kSeqCascade;
  s.name = "seq_cascade";
  s.alpha = alpha;
  return s;
}

Strategy Strategy::from_name(std::string_view method, std::string_view rule, double alpha, std::size_t gamma,
                             std::optional<double> beta) {
  if (method == "spec_decode") return spec_decode(gamma);
  if (method == "spec_cascade") return spec_cascade({require_rule(method, rule), alpha}, gamma);
  if (method == "token_spec_cascade") {
    const auto kind = parse_token_rule_kind(rule);
    if (!kind) throw std::invalid_argument("token_spec_cascade: unknown token rule '" + std::string(rule) + "'");
    return token_spec_cascade({*kind, alpha}, gamma);
  }
  if (method == "lossy_spec") return lossy_spec(alpha, beta, gamma);
  if (method == "bild_star") return bild_star(alpha, gamma);
  if (method == "token_cascade") return token_cascade({require_rule(method, rule), alpha});
  if (method == "oracle_cascade") return oracle_cascade({require_rule(method, rule), alpha});
  if (method == "seq_cascade") return seq_cascade(alpha);
  throw std::invalid_argument("unknown strategy '" + std::string(method) + "'");
}

std::span<const std::string_view> strategy_names() { return kStrategyNames; }

SpecSample gen_spec_sample(const TabularLM& q, const TabularLM& p, const TargetSpec& spec,
                           std::span<const Token> prefix, std::size_t gamma, double temperature, Rng& rng) {
  SpecSample out;
  RoundRecord& rec = out.record;
  rec.gamma = gamma;
  std::vector<Token> ctx(prefix.begin(), prefix.end());
  std::vector<StepView> views;
  views.reserve(gamma + 1);

  for (std::size_t j = 0; j < gamma; ++j) {
    views.push_back(StepView::at_temperature(q.next_dist(ctx), p.next_dist(ctx), temperature));
    const Token x = static_cast<Token>(rng.categorical(views.back().q.probs()));
    rec.drafted.push_back(x);
    ctx.push_back(x);
    if (x == q.eos()) break;
  }
  const std::size_t m = rec.drafted.size();
  const bool bonus = m == gamma && (m == 0 || rec.drafted.back() != q.eos());
  if (bonus) views.push_back(StepView::at_temperature(q.next_dist(ctx), p.next_dist(ctx), temperature));

  // One verification round scores every drafted prefix plus the bonus position.
  std::vector<TokenDistribution> pis;
  pis.reserve(views.size());
  for (const StepView& v : views) pis.push_back(target(spec, v));

  rec.j_star = m;
  for (std::size_t j = 0; j < m; ++j) {
    const Token x = rec.drafted[j];
    const double qx = views[j].q[x];
    assert(qx > 0.0 && "drafted token has zero drafter probability");
    const double kappa = std::min(1.0, pis[j][x] / qx);
    rec.kappa.push_back(kappa);
    const int a = rng.uniform() < kappa ? 1 : 0;
    rec.accepted.push_back(a);
    if (!a) {
      rec.j_star = j;
      break;
    }
  }

  out.block.assign(rec.drafted.begin(), rec.drafted.begin() + static_cast<std::ptrdiff_t>(rec.j_star));
  out.targets.assign(pis.begin(), pis.begin() + static_cast<std::ptrdiff_t>(rec.j_star));
  if (rec.j_star < m) {
    const std::size_t j = rec.j_star;
    const auto res = residual(pis[j], views[j].q);
    Token y;
    if (res) {
      y = static_cast<Token>(rng.categorical(res->probs()));
    } else {
      rec.empty_residual = true;
      y = static_cast<Token>(rng.categorical(pis[j].probs()));
    }
    rec.replacement = y;
    rec.from_residual = true;
    out.block.push_back(y);
    out.targets.push_back(pis[j]);
  } else if (bonus) {
    const Token y = static_cast<Token>(rng.categorical(pis[m].probs()));
    rec.replacement = y;
    out.block.push_back(y);
    out.targets.push_back(pis[m]);
  }
  rec.emitted = out.block.size();
  rec.rejected = m - rec.j_star;

  // Every drafted token is either accepted or rejected; one token is added on
  // top unless the draft ended in an accepted eos.
  assert(rec.j_star + rec.rejected == m);
  assert(rec.emitted == rec.j_star + (bonus || rec.j_star < m ? 1u : 0u));

  DecodeCounters& c = out.counters;
  c.small_calls = m;
  c.large_rounds = 1;
  c.large_calls = 1;
  c.large_scorings = views.size();
  c.drafted = m;
  c.rejected = rec.rejected;
  c.emitted = rec.emitted;
  c.empty_residuals = rec.empty_residual ? 1 : 0;
  return out;
}

namespace {

bool ends_with_eos(const std::vector<Token>& tokens, Token eos) { return !tokens.empty() && tokens.back() == eos; }

void decode_speculative(const Strategy& s, const TabularLM& q, const TabularLM& p, const DecodeConfig& config,
                        std::vector<Token>& ctx, std::size_t prompt_len, std::size_t max_len, Rng& rng,
                        DecodeOutput& out) {
  while (out.tokens.size() < max_len && !ends_with_eos(out.tokens, q.eos())) {
    const std::size_t remaining = max_len - out.tokens.size();
    const std::size_t gamma = std::min(s.gamma, remaining - 1);
    SpecSample sample = gen_spec_sample(q, p, s.target, ctx, gamma, config.temperature, rng);
    sample.record.position = ctx.size() - prompt_len;
    for (std::size_t i = 0; i < sample.block.size(); ++i) {
      out.tokens.push_back(sample.block[i]);
      ctx.push_back(sample.block[i]);
      out.targets.push_back(std::move(sample.targets[i]));
    }
    out.trace.counters += sample.counters;
    out.trace.rounds.push_back(std::move(sample.record));
  }
}

void emit_step(DecodeOutput& out, std::vector<Token>& ctx, const TokenDistribution& pi, int deferred, Rng& rng) {
  const Token x = static_cast<Token>(rng.categorical(pi.probs()));
  out.tokens.push_back(x);
  ctx.push_back(x);
  out.targets.push_back(pi);
  out.trace.step_deferred.push_back(deferred);
  ++out.trace.counters.emitted;
}

void decode_token_cascade(const Strategy& s, const TabularLM& q, const TabularLM& p, const DecodeConfig& config,
                          std::vector<Token>& ctx, std::size_t max_len, Rng& rng, DecodeOutput& out) {
  DecodeCounters& c = out.trace.counters;
  std::size_t run = 0;
  while (out.tokens.size() < max_len && !ends_with_eos(out.tokens, q.eos())) {
    const bool forced = config.small_run_cap > 0 && run >= config.small_run_cap;
    const TokenDistribution& q_raw = q.next_dist(ctx);
    if (!forced) ++c.small_calls;
    const int d = forced ? 1 : delta_small_only(s.rule, q_raw);
    if (d) {
      ++c.large_rounds;
      ++c.large_scorings;
      ++c.large_calls;
      if (forced) ++c.forced_consults;
      run = 0;
      emit_step(out, ctx, apply_temperature(p.next_dist(ctx), config.temperature), 1, rng);
    } else {
      ++run;
      emit_step(out, ctx, apply_temperature(q_raw, config.temperature), 0, rng);
    }
  }
}

void decode_oracle_cascade(const Strategy& s, const TabularLM& q, const TabularLM& p, const DecodeConfig& config,
                           std::vector<Token>& ctx, std::size_t max_len, Rng& rng, DecodeOutput& out) {
  DecodeCounters& c = out.trace.counters;
  while (out.tokens.size() < max_len && !ends_with_eos(out.tokens, q.eos())) {
    const StepView view = StepView::at_temperature(q.next_dist(ctx), p.next_dist(ctx), config.temperature);
    ++c.small_calls;
    ++c.large_rounds;
    ++c.large_scorings;
    const int d = delta(s.rule, view);
    c.large_calls += static_cast<std::uint64_t>(d);
    emit_step(out, ctx, d ? view.p : view.q, d, rng);
  }
}

void decode_seq_cascade(const Strategy& s, const TabularLM& q, const TabularLM& p, const DecodeConfig& config,
                        std::vector<Token>& ctx, std::size_t max_len, Rng& rng, DecodeOutput& out) {
  DecodeCounters& c = out.trace.counters;
  const std::size_t prompt_len = ctx.size();
  // Full response from q, scored by its raw joint probability.
  double joint = 1.0;
  while (out.tokens.size() < max_len && !ends_with_eos(out.tokens, q.eos())) {
    const TokenDistribution& q_raw = q.next_dist(ctx);
    ++c.small_calls;
    ++c.drafted;
    const TokenDistribution pi = apply_temperature(q_raw, config.temperature);
    const Token x = static_cast<Token>(rng.categorical(pi.probs()));
    joint *= q_raw[x];
    out.tokens.push_back(x);
    ctx.push_back(x);
    out.targets.push_back(pi);
  }
  if (!(joint < 1.0 - s.alpha)) {
    out.trace.step_deferred.assign(out.tokens.size(), 0);
    c.emitted = out.tokens.size();
    return;
  }
  c.rejected = out.tokens.size();
  out.tokens.clear();
  out.targets.clear();
  ctx.resize(prompt_len);
  while (out.tokens.size() < max_len && !ends_with_eos(out.tokens, p.eos())) {
    ++c.large_rounds;
    ++c.large_scorings;
    ++c.large_calls;
    emit_step(out, ctx, apply_temperature(p.next_dist(ctx), config.temperature), 1, rng);
  }
}

}  // namespace

DecodeOutput decode(const Strategy& strategy, const TabularLM& q, const TabularLM& p, const DecodeConfig& config,
                    std::span<const Token> prompt, std::size_t max_len, Rng& rng) {
  if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  if (q.vocab_size() != p.vocab_size() || q.eos() != p.eos()) {
    throw std::invalid_argument("decode: drafter and verifier disagree on vocab or eos");
  }
  DecodeOutput out;
  std::vector<Token> ctx(prompt.begin(), prompt.end());
  switch (strategy.kind) {
    case StrategyKind::kSpeculative:
      if (strategy.gamma < 1) throw std::invalid_argument("decode: gamma must be >= 1");
      decode_speculative(strategy, q, p, config, ctx, prompt.size(), max_len, rng, out);
      break;
    case StrategyKind::kTokenCascade:
      decode_token_cascade(strategy, q, p, config, ctx, max_len, rng, out);
      break;
    case StrategyKind::kOracleCascade:
      decode_oracle_cascade(strategy, q, p, config, ctx, max_len, rng, out);
      break;
    case StrategyKind::kSeqCascade:
      decode_seq_cascade(strategy, q, p, config, ctx, max_len, rng, out);
      break;
  }
  return out;
}

void write_trace_jsonl(std::ostream& out, const DecodeTrace& trace) {
  for (const RoundRecord& r : trace.rounds) {
    nlohmann::json j;
    j["position"] = r.position;
    j["gamma"] = r.gamma;
    j["drafted"] = r.drafted;
    j["kappa"] = r.kappa;
    j["accepted"] = r.accepted;
    j["j_star"] = r.j_star;
    j["replacement"] = r.replacement ? nlohmann::json(*r.replacement) : nlohmann::json(nullptr);
    j["from_residual"] = r.from_residual;
    j["empty_residual"] = r.empty_residual;
    j["emitted"] = r.emitted;
    j["rejected"] = r.rejected;
    out << j.dump() << '\n';
  }
  for (std::size_t i = 0; i < trace.step_deferred.size(); ++i) {
    out << nlohmann::json{{"step", i}, {"deferred", trace.step_deferred[i]}}.dump() << '\n';
  }
  const DecodeCounters& c = trace.counters;
  out << nlohmann::json{{"counters",
                         {{"small_calls", c.small_calls},
                          {"large_rounds", c.large_rounds},
                          {"large_scorings", c.large_scorings},
                          {"large_calls", c.large_calls},
                          {"drafted", c.drafted},
                          {"rejected", c.rejected},
                          {"emitted", c.emitted},
                          {"forced_consults", c.forced_consults},
                          {"empty_residuals", c.empty_residuals}}}}
             .dump()
      << '\n';
}

}  // namespace speccascade
