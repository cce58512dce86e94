// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace speccascade {

double cost_model(const DecodeCounters& c, double c_small, double c_large) {
  if (!(c_small > 0.0) || !(c_large > 0.0)) throw std::invalid_argument("cost_model: costs must be > 0");
  const double cost = c_small * static_cast<double>(c.small_calls) + c_large * static_cast<double>(c.large_rounds);
  if (cost == 0.0) return c.emitted == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(c.emitted) / cost;
}

double cost_model(const DecodeTrace& trace, double c_small, double c_large) {
  return cost_model(trace.counters, c_small, c_large);
}

SyntheticTask build_task(const TaskConfig& t) {
  return build_partitioned_task(t.vocab, t.order, t.frac_small_favored, t.noise_small, t.noise_large, t.seed,
                                t.smoothing, t.eos_token());
}

std::vector<Token> sample_prompt(const TabularLM& truth, std::size_t length, std::uint64_t run_seed,
                                 std::size_t index) {
  Rng rng(run_seed, 0x70726f6d70740000ull, index);
  std::vector<Token> prompt;
  prompt.reserve(length);
  std::vector<double> w;
  while (prompt.size() < length) {
    const auto probs = truth.next_dist(prompt).probs();
    w.assign(probs.begin(), probs.end());
    w[truth.eos()] = 0.0;
    if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0.0; })) break;
    prompt.push_back(static_cast<Token>(rng.categorical(w)));
  }
  return prompt;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

const TokenDistribution& as_distribution(const TokenDistribution& pi, TokenDistribution& scratch) {
  if (std::abs(pi.sum() - 1.0) <= kSumTolerance) return pi;
  scratch = normalize(pi);
  return scratch;
}

}  // namespace

SweepRow evaluate(const SyntheticTask& task, const Strategy& strategy, const std::string& rule_label,
                  double temperature, const RunSection& run) {
  const DecodeConfig config{temperature, run.small_run_cap};
  DecodeCounters total;
  double loss01 = 0.0, loss_log = 0.0;
  std::uint64_t steps = 0, matches = 0;
  TokenDistribution scratch = TokenDistribution::uniform(task.truth.vocab_size());

  for (std::size_t i = 0; i < run.num_prompts; ++i) {
    const std::vector<Token> prompt = sample_prompt(task.truth, run.prompt_len, run.seed, i);
    for (std::size_t t = 0; t < run.trials; ++t) {
      Rng rng(run.seed, i + 1, t + 1);
      const DecodeOutput out = decode(strategy, task.small, task.large, config, prompt, run.max_len, rng);
      total += out.trace.counters;
      std::vector<Token> ctx = prompt;
      for (std::size_t k = 0; k < out.tokens.size(); ++k) {
        const TokenDistribution& truth = task.truth.next_dist(ctx);
        const TokenDistribution& pi = as_distribution(out.targets[k], scratch);
        loss01 += expected_loss(truth, pi, LossKind::kZeroOne);
        loss_log += expected_loss(truth, pi, LossKind::kLog);
        if (out.tokens[k] == mode(task.large.next_dist(ctx)).token) ++matches;
        ++steps;
        ctx.push_back(out.tokens[k]);
      }
    }
  }

  SweepRow row;
  row.method = strategy.name;
  row.rule = rule_label;
  row.alpha = strategy.kind == StrategyKind::kSpeculative ? strategy.target.alpha : strategy.alpha;
  row.gamma = strategy.kind == StrategyKind::kSpeculative ? strategy.gamma : 0;
  row.temperature = temperature;
  row.rejection_rate = ratio(total.rejected, total.drafted);
  row.deferral_fraction = ratio(total.large_calls, total.emitted);
  row.large_rounds_per_token = ratio(total.large_rounds, total.emitted);
  row.exact_expected_01_loss = steps ? loss01 / static_cast<double>(steps) : 0.0;
  row.exact_expected_log_loss = steps ? loss_log / static_cast<double>(steps) : 0.0;
  row.empirical_match_rate_with_large = ratio(matches, steps);
  row.tokens_per_second_proxy = cost_model(total, run.cost_small, run.cost_large);
  row.seed = run.seed;
  return row;
}

std::vector<double> default_alphas(const MethodEntry& entry, std::size_t vocab_size) {
  constexpr int kPoints = 21;
  std::vector<double> out(kPoints);
  if (entry.method == "lossy_spec") {
    for (int i = 0; i < kPoints; ++i) out[i] = static_cast<double>(i) / kPoints;
    return out;
  }
  double hi = 1.0;
  if (entry.method == "bild_star") {
    hi = alpha_domain_max(RuleKind::kBild, vocab_size);
  } else if (entry.method == "spec_cascade" || entry.method == "token_cascade" || entry.method == "oracle_cascade") {
    if (const auto kind = parse_rule_kind(entry.rule)) hi = alpha_domain_max(*kind, vocab_size);
  }
  for (int i = 0; i < kPoints; ++i) out[i] = hi * static_cast<double>(i) / (kPoints - 1);
  return out;
}

std::vector<GridPoint> expand_grid(const RunConfig& config) {
  std::vector<GridPoint> grid;
  for (const MethodEntry& entry : config.method.methods) {
    const std::vector<double> alphas =
        config.method.alphas.empty() ? default_alphas(entry, config.task.vocab) : config.method.alphas;
    // Block size only matters to speculative methods.
    const bool speculative = entry.method != "token_cascade" && entry.method != "oracle_cascade" &&
                             entry.method != "seq_cascade";
    const std::vector<std::size_t> gammas =
        speculative ? config.method.gammas : std::vector<std::size_t>{config.method.gammas.front()};
    for (double t : config.method.temperatures)
      for (std::size_t g : gammas)
        for (double a : alphas) grid.push_back({entry, a, g, t});
  }
  return grid;
}

bool strict_mode() {
  const char* v = std::getenv(kStrictEnvVar);
  return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

std::vector<SweepRow> run(const RunConfig& config) {
  config.validate();
  const SyntheticTask task = build_task(config.task);
  const std::vector<GridPoint> grid = expand_grid(config);
  const std::optional<double> beta = config.method.lossy_tuned ? std::nullopt : std::optional<double>(1.0);

  std::vector<SweepRow> rows(grid.size());
  auto work = [&](std::size_t i) {
    const GridPoint& g = grid[i];
    const Strategy s = Strategy::from_name(g.entry.method, g.entry.rule, g.alpha, g.gamma, beta);
    std::string label = g.entry.rule;
    if (g.entry.method == "lossy_spec") label = config.method.lossy_tuned ? "tuned" : "fixed";
    if (g.entry.method == "bild_star") label = "bild";
    if (label.empty()) label = "none";
    rows[i] = evaluate(task, s, label, g.temperature, config.run);
  };

  const std::size_t workers =
      strict_mode() ? 1 : std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), grid.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) work(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < grid.size(); i = next++) work(i);
    }));
  }
  for (auto& f : pool) f.get();
  return rows;
}

namespace {

constexpr const char* kCsvHeader =
    "method,rule,alpha,gamma,temperature,rejection_rate,deferral_fraction,large_rounds_per_token,"
    "exact_expected_01_loss,exact_expected_log_loss,empirical_match_rate_with_large,tokens_per_second_proxy,seed";

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

double parse_double(const std::string& field, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::invalid_argument("csv: bad " + field + " '" + s + "'");
  return v;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kCsvHeader << '\n';
  for (const SweepRow& r : rows) {
    out << r.method << ',' << r.rule << ',' << fmt(r.alpha) << ',' << r.gamma << ',' << fmt(r.temperature) << ','
        << fmt(r.rejection_rate) << ',' << fmt(r.deferral_fraction) << ',' << fmt(r.large_rounds_per_token) << ','
        << fmt(r.exact_expected_01_loss) << ',' << fmt(r.exact_expected_log_loss) << ','
        << fmt(r.empirical_match_rate_with_large) << ',' << fmt(r.tokens_per_second_proxy) << ',' << r.seed
        << '\n';
  }
}

std::vector<SweepRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("csv: missing or unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 13) throw std::invalid_argument("csv: expected 13 fields, got " + std::to_string(f.size()));
    SweepRow r;
    r.method = f[0];
    r.rule = f[1];
    r.alpha = parse_double("alpha", f[2]);
    r.gamma = static_cast<std::size_t>(parse_double("gamma", f[3]));
    r.temperature = parse_double("temperature", f[4]);
    r.rejection_rate = parse_double("rejection_rate", f[5]);
    r.deferral_fraction = parse_double("deferral_fraction", f[6]);
    r.large_rounds_per_token = parse_double("large_rounds_per_token", f[7]);
    r.exact_expected_01_loss = parse_double("exact_expected_01_loss", f[8]);
    r.exact_expected_log_loss = parse_double("exact_expected_log_loss", f[9]);
    r.empirical_match_rate_with_large = parse_double("empirical_match_rate_with_large", f[10]);
    r.tokens_per_second_proxy = parse_double("tokens_per_second_proxy", f[11]);
    r.seed = std::stoull(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

double frontier_loss(const std::vector<SweepRow>& rows, double budget) {
  double best = std::numeric_limits<double>::infinity();
  for (const SweepRow& r : rows) {
    if (r.deferral_fraction <= budget + 1e-12) best = std::min(best, r.exact_expected_01_loss);
  }
  return best;
}

}  // namespace

FrontierReport compare_frontiers(const std::vector<SweepRow>& a, const std::vector<SweepRow>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("compare_frontiers: empty row set");
  const std::uint64_t seed = a.front().seed;
  for (const auto* rows : {&a, &b}) {
    for (const SweepRow& r : *rows) {
      if (r.seed != seed) {
        throw std::invalid_argument("compare_frontiers: rows come from different runs (seed " +
                                    std::to_string(seed) + " vs " + std::to_string(r.seed) + ")");
      }
    }
  }
  std::vector<double> budgets;
  for (const auto* rows : {&a, &b})
    for (const SweepRow& r : *rows) budgets.push_back(r.deferral_fraction);
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());

  FrontierReport rep;
  std::size_t wa = 0, wb = 0, ties = 0;
  for (double x : budgets) {
    BudgetComparison c{x, frontier_loss(a, x), frontier_loss(b, x), '='};
    const bool both_inf = std::isinf(c.loss_a) && std::isinf(c.loss_b);
    if (!both_inf && std::abs(c.loss_a - c.loss_b) > 1e-12) c.winner = c.loss_a < c.loss_b ? 'a' : 'b';
    (c.winner == 'a' ? wa : c.winner == 'b' ? wb : ties)++;
    rep.budgets.push_back(c);
  }
  const double n = static_cast<double>(budgets.size());
  rep.a_wins_pct = 100.0 * static_cast<double>(wa) / n;
  rep.b_wins_pct = 100.0 * static_cast<double>(wb) / n;
  rep.ties_pct = 100.0 * static_cast<double>(ties) / n;
  return rep;
}

void write_frontier_report(std::ostream& out, const FrontierReport& report) {
  out << "budget,loss_a,loss_b,winner\n";
  for (const BudgetComparison& c : report.budgets) {
    out << fmt(c.budget) << ',' << fmt(c.loss_a) << ',' << fmt(c.loss_b) << ',' << c.winner << '\n';
  }
  out << "# a_wins_pct=" << fmt(report.a_wins_pct) << " b_wins_pct=" << fmt(report.b_wins_pct)
      << " ties_pct=" << fmt(report.ties_pct) << '\n';
}

}  // namespace speccascade
