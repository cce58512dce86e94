// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace speccascade {

namespace {

std::uint64_t checked_context_space(std::size_t vocab_size, std::size_t order) {
  const std::uint64_t base = vocab_size + 1;
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < order; ++i) {
    if (space > std::numeric_limits<std::uint64_t>::max() / base) {
      throw std::invalid_argument("context space (vocab+1)^order overflows 64 bits");
    }
    space *= base;
  }
  return space;
}

bool canonical_less(const Context& a, const Context& b) {
  auto pads = [](const Context& c) { return std::count(c.begin(), c.end(), kBos); };
  const auto pa = pads(a), pb = pads(b);
  if (pa != pb) return pa > pb;
  return a < b;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

TabularLM::TabularLM(std::size_t vocab_size, std::size_t order, Token eos, std::uint64_t seed)
    : vocab_size_(vocab_size),
      order_(order),
      eos_(eos),
      seed_(seed),
      uniform_(TokenDistribution::uniform(vocab_size)) {
  if (vocab_size_ < 2) throw DistributionError("vocab size must be at least 2");
  if (eos_ >= vocab_size_) throw DistributionError("eos token outside vocab");
  checked_context_space(vocab_size_, order_);
}

std::uint64_t TabularLM::encode(const Context& ctx) const {
  if (ctx.size() != order_) {
    throw std::invalid_argument("context length " + std::to_string(ctx.size()) + " != order " +
                                std::to_string(order_));
  }
  std::uint64_t code = 0;
  bool seen_token = false;
  for (Token t : ctx) {
    std::uint64_t digit;
    if (t == kBos) {
      if (seen_token) throw std::invalid_argument("BOS may only pad the left of a context");
      digit = vocab_size_;
    } else {
      if (t >= vocab_size_) throw std::out_of_range("token " + std::to_string(t) + " out of vocab range");
      seen_token = true;
      digit = t;
    }
    code = code * (vocab_size_ + 1) + digit;
  }
  return code;
}

std::uint64_t TabularLM::encode_prefix(std::span<const Token> prefix) const {
  std::uint64_t code = 0;
  const std::size_t n = prefix.size();
  for (std::size_t i = 0; i < order_; ++i) {
    std::uint64_t digit = vocab_size_;
    // position i of the context maps to prefix[n - order + i]
    if (n + i >= order_) {
      const Token t = prefix[n + i - order_];
      if (t >= vocab_size_) throw std::out_of_range("token " + std::to_string(t) + " out of vocab range");
      digit = t;
    }
    code = code * (vocab_size_ + 1) + digit;
  }
  return code;
}

const TokenDistribution& TabularLM::next_dist(std::span<const Token> prefix) const {
  // Validate the whole prefix, not only the tail the lookup reads.
  for (Token t : prefix) {
    if (t >= vocab_size_) throw std::out_of_range("token " + std::to_string(t) + " out of vocab range");
  }
  const auto it = table_.find(encode_prefix(prefix));
  return it == table_.end() ? uniform_ : it->second;
}

const TokenDistribution& TabularLM::at(const Context& ctx) const {
  const auto it = table_.find(encode(ctx));
  return it == table_.end() ? uniform_ : it->second;
}

bool TabularLM::has_entry(const Context& ctx) const { return table_.count(encode(ctx)) > 0; }

void TabularLM::set(const Context& ctx, TokenDistribution d) {
  if (auto v = validate(d)) throw DistributionError("table entry invalid: " + v->message);
  if (d.size() != vocab_size_) throw DistributionError("table entry length does not match vocab");
  table_.insert_or_assign(encode(ctx), std::move(d));
}

std::vector<Context> TabularLM::stored_contexts() const {
  std::vector<Context> out;
  out.reserve(table_.size());
  for (const auto& [code, dist] : table_) {
    Context ctx(order_);
    std::uint64_t c = code;
    for (std::size_t i = order_; i-- > 0;) {
      const std::uint64_t digit = c % (vocab_size_ + 1);
      c /= (vocab_size_ + 1);
      ctx[i] = digit == vocab_size_ ? kBos : static_cast<Token>(digit);
    }
    out.push_back(std::move(ctx));
  }
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

bool operator==(const TabularLM& a, const TabularLM& b) {
  return a.vocab_size_ == b.vocab_size_ && a.order_ == b.order_ && a.eos_ == b.eos_ && a.table_ == b.table_;
}

std::vector<Context> all_contexts(std::size_t vocab_size, std::size_t order) {
  checked_context_space(vocab_size, order);
  std::vector<Context> out;
  for (std::size_t pads = order + 1; pads-- > 0;) {
    const std::size_t free = order - pads;
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < free; ++i) count *= vocab_size;
    for (std::uint64_t idx = 0; idx < count; ++idx) {
      Context ctx(order, kBos);
      std::uint64_t rest = idx;
      for (std::size_t i = order; i-- > pads;) {
        ctx[i] = static_cast<Token>(rest % vocab_size);
        rest /= vocab_size;
      }
      out.push_back(std::move(ctx));
    }
  }
  return out;
}

Context context_of(std::span<const Token> prefix, std::size_t order) {
  Context ctx(order, kBos);
  const std::size_t n = prefix.size();
  for (std::size_t i = 0; i < order; ++i) {
    if (n + i >= order) ctx[i] = prefix[n + i - order];
  }
  return ctx;
}

TokenDistribution dirichlet_uniform(std::size_t size, Rng& rng) {
  std::vector<double> w(size);
  for (double& x : w) x = rng.exponential();
  return normalize(TokenDistribution(std::move(w)));
}

TabularLM build_random_truth(std::size_t vocab_size, std::size_t order, std::uint64_t seed) {
  return build_random_truth(vocab_size, order, static_cast<Token>(vocab_size - 1), seed);
}

TabularLM build_random_truth(std::size_t vocab_size, std::size_t order, Token eos, std::uint64_t seed) {
  TabularLM m(vocab_size, order, eos, seed);
  Rng rng(seed, 0x7275746800000000ull);
  for (const auto& ctx : all_contexts(vocab_size, order)) m.set(ctx, dirichlet_uniform(vocab_size, rng));
  return m;
}

namespace {

TokenDistribution perturb(const TokenDistribution& truth, double noise, double smoothing, Rng& rng) {
  const std::size_t n = truth.size();
  std::vector<double> w(truth.probs().begin(), truth.probs().end());
  if (noise > 0.0) {
    const TokenDistribution draw = dirichlet_uniform(n, rng);
    for (std::size_t v = 0; v < n; ++v) w[v] = (1.0 - noise) * truth[v] + noise * draw[v];
  }
  if (smoothing > 0.0) {
    const double denom = 1.0 + static_cast<double>(n) * smoothing;
    for (double& x : w) x = (x + smoothing) / denom;
  }
  if (noise == 0.0 && smoothing == 0.0) return truth;
  return TokenDistribution::checked(std::move(w));
}

void check_noise(double noise, double smoothing) {
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw std::invalid_argument("smoothing must be >= 0");
}

}  // namespace

TabularLM derive_model(const TabularLM& truth, double noise, double smoothing, std::uint64_t seed) {
  check_noise(noise, smoothing);
  TabularLM m(truth.vocab_size(), truth.order(), truth.eos(), seed);
  Rng rng(seed, 0x6465726976650000ull);
  for (const auto& ctx : all_contexts(truth.vocab_size(), truth.order())) {
    m.set(ctx, perturb(truth.at(ctx), noise, smoothing, rng));
  }
  return m;
}

SyntheticTask build_partitioned_task(std::size_t vocab_size, std::size_t order, double frac_small_favored,
                                     double noise_small, double noise_large, std::uint64_t seed,
                                     double smoothing, std::optional<Token> eos) {
  if (!(frac_small_favored >= 0.0 && frac_small_favored <= 1.0)) {
    throw std::invalid_argument("frac_small_favored must lie in [0, 1]");
  }
  check_noise(noise_small, smoothing);
  check_noise(noise_large, smoothing);

  TabularLM truth = eos ? build_random_truth(vocab_size, order, *eos, seed) : build_random_truth(vocab_size, order, seed);
  const auto contexts = all_contexts(vocab_size, order);

  // Stratify by padding level so every context length gets the same share.
  std::vector<bool> favored(contexts.size(), false);
  Rng pick(seed, 0x7061727469000000ull);
  std::size_t begin = 0;
  while (begin < contexts.size()) {
    const auto pads = std::count(contexts[begin].begin(), contexts[begin].end(), kBos);
    std::size_t end = begin;
    while (end < contexts.size() && std::count(contexts[end].begin(), contexts[end].end(), kBos) == pads) ++end;
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    for (std::size_t i = idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(pick.uniform() * static_cast<double>(i));
      std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
    }
    const auto count = static_cast<std::size_t>(std::llround(frac_small_favored * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < count; ++i) favored[idx[i]] = true;
    begin = end;
  }

  Rng seeds(seed, 0x7365656473000000ull);
  const TabularLM noisy_small = derive_model(truth, noise_small, smoothing, seeds.bits());
  const TabularLM noisy_large = derive_model(truth, noise_large, smoothing, seeds.bits());

  TabularLM small(vocab_size, order, truth.eos(), seed);
  TabularLM large(vocab_size, order, truth.eos(), seed);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto& ctx = contexts[i];
    small.set(ctx, favored[i] ? truth.at(ctx) : noisy_small.at(ctx));
    large.set(ctx, favored[i] ? noisy_large.at(ctx) : truth.at(ctx));
  }
  return SyntheticTask{std::move(truth), std::move(small), std::move(large), std::move(favored)};
}

double expected_loss(const TokenDistribution& truth, const TokenDistribution& model, LossKind loss) {
  require_same_vocab(truth, model);
  if (loss == LossKind::kZeroOne) return 1.0 - truth[mode(model).token];
  return cross_entropy(truth, model);
}

double expected_step_loss(const TabularLM& m, const TabularLM& truth, std::span<const Token> prefix,
                          LossKind loss) {
  if (m.vocab_size() != truth.vocab_size()) throw DistributionError("models do not share a vocab");
  return expected_loss(truth.next_dist(prefix), m.next_dist(prefix), loss);
}

// Format:
//   speccascade-tabular-lm 1
//   vocab_size <n>
//   order <k>
//   eos <token>
//   seed <provenance>
//   entries <count>
//   context <t_1 .. t_k> : <p_0 .. p_{n-1}>      (BOS written as ^)
void write_model(std::ostream& out, const TabularLM& m) {
  out << "speccascade-tabular-lm 1\n"
      << "vocab_size " << m.vocab_size() << '\n'
      << "order " << m.order() << '\n'
      << "eos " << m.eos() << '\n'
      << "seed " << m.seed() << '\n';
  const auto contexts = m.stored_contexts();
  out << "entries " << contexts.size() << '\n';
  for (const auto& ctx : contexts) {
    out << "context";
    for (Token t : ctx) {
      out << ' ';
      if (t == kBos)
        out << '^';
      else
        out << t;
    }
    out << " :";
    for (double x : m.at(ctx).probs()) out << ' ' << format_double(x);
    out << '\n';
  }
}

namespace {

template <typename T>
T read_header(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("model file truncated before '" + key + "'");
  std::istringstream ls(line);
  std::string k;
  T value{};
  if (!(ls >> k >> value) || k != key) throw std::runtime_error("expected header '" + key + "', got: " + line);
  return value;
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw std::runtime_error("bad probability '" + s + "'");
  return x;
}

}  // namespace

TabularLM read_model(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != "speccascade-tabular-lm 1") {
    throw std::runtime_error("not a speccascade tabular model");
  }
  const auto vocab_size = read_header<std::size_t>(in, "vocab_size");
  const auto order = read_header<std::size_t>(in, "order");
  const auto eos = read_header<Token>(in, "eos");
  const auto seed = read_header<std::uint64_t>(in, "seed");
  const auto entries = read_header<std::size_t>(in, "entries");
  TabularLM m(vocab_size, order, eos, seed);
  std::string line;
  for (std::size_t e = 0; e < entries; ++e) {
    if (!std::getline(in, line)) throw std::runtime_error("model file truncated in entries");
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word) || word != "context") throw std::runtime_error("expected context line: " + line);
    Context ctx;
    while (ls >> word && word != ":") {
      if (word == "^") {
        ctx.push_back(kBos);
      } else {
        Token t{};
        const auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), t);
        if (ec != std::errc() || ptr != word.data() + word.size()) throw std::runtime_error("bad token " + word);
        ctx.push_back(t);
      }
    }
    if (word != ":") throw std::runtime_error("missing ':' in context line: " + line);
    std::vector<double> probs;
    while (ls >> word) probs.push_back(parse_double(word));
    m.set(ctx, TokenDistribution(std::move(probs)));
  }
  return m;
}

}  // namespace speccascade
