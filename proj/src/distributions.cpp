// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace speccascade {

Vocab::Vocab(std::size_t size, std::vector<std::string> labels)
    : size_(size), labels_(std::move(labels)) {
  if (size_ < 2) throw DistributionError("vocab size must be at least 2, got " + std::to_string(size_));
  if (!labels_.empty() && labels_.size() != size_)
    throw DistributionError("vocab labels must match vocab size");
}

std::string Vocab::label(Token t) const {
  if (!contains(t)) throw DistributionError("token " + std::to_string(t) + " outside vocab");
  return labels_.empty() ? std::to_string(t) : labels_[t];
}

double TokenDistribution::sum() const noexcept {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

TokenDistribution TokenDistribution::checked(std::vector<double> probs) {
  TokenDistribution d(std::move(probs));
  if (auto v = validate(d)) throw DistributionError(v->message);
  bool clamped = false;
  for (double& x : d.probs_) {
    if (x < 0.0) {
      x = 0.0;
      clamped = true;
    }
  }
  const double s = d.sum();
  if (clamped || s != 1.0) {
    for (double& x : d.probs_) x /= s;
  }
  return d;
}

TokenDistribution TokenDistribution::uniform(std::size_t size) {
  return TokenDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

TokenDistribution TokenDistribution::one_hot(std::size_t size, Token t) {
  std::vector<double> probs(size, 0.0);
  probs.at(t) = 1.0;
  return TokenDistribution(std::move(probs));
}

std::optional<Violation> validate(const TokenDistribution& d) {
  if (d.size() < 2) {
    return Violation{ViolationKind::kTooSmallVocab, 0, static_cast<double>(d.size()),
                     "vocab size " + std::to_string(d.size()) + " < 2"};
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      return Violation{ViolationKind::kNonFinite, i, d[i], "entry " + std::to_string(i) + " is not finite"};
    }
    if (d[i] < -kNegativeTolerance) {
      return Violation{ViolationKind::kNegative, i, d[i],
                       "entry " + std::to_string(i) + " is negative: " + std::to_string(d[i])};
    }
  }
  const double s = d.sum();
  if (std::abs(s - 1.0) > kSumTolerance) {
    return Violation{ViolationKind::kBadSum, 0, s, "sum = " + std::to_string(s)};
  }
  return std::nullopt;
}

std::optional<Violation> validate(const TokenDistribution& d, const Vocab& vocab) {
  if (d.size() != vocab.size()) {
    return Violation{ViolationKind::kSizeMismatch, 0, static_cast<double>(d.size()),
                     "length " + std::to_string(d.size()) + " != vocab size " + std::to_string(vocab.size())};
  }
  return validate(d);
}

void require_same_vocab(const TokenDistribution& a, const TokenDistribution& b) {
  if (a.size() != b.size()) {
    throw DistributionError("vocab mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

double tv_distance(const TokenDistribution& p, const TokenDistribution& q) {
  require_same_vocab(p, q);
  double excess = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) excess += std::max(0.0, p[v] - q[v]);
  return std::clamp(excess, 0.0, 1.0);
}

double entropy(const TokenDistribution& d) {
  double h = 0.0;
  for (double x : d.probs()) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}

double cross_entropy(const TokenDistribution& d, const TokenDistribution& m) {
  require_same_vocab(d, m);
  double h = 0.0;
  for (std::size_t v = 0; v < d.size(); ++v) {
    if (d[v] <= 0.0) continue;
    if (m[v] <= 0.0) return std::numeric_limits<double>::infinity();
    h -= d[v] * std::log(m[v]);
  }
  return h;
}

Mode mode(const TokenDistribution& d) {
  if (d.size() == 0) throw DistributionError("mode of empty distribution");
  Token best = 0;
  for (std::size_t v = 1; v < d.size(); ++v) {
    if (d[v] > d[best]) best = static_cast<Token>(v);
  }
  return {best, d[best]};
}

TokenDistribution apply_temperature(const TokenDistribution& d, double temperature) {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw DistributionError("temperature must be finite and >= 0, got " + std::to_string(temperature));
  }
  if (temperature == 0.0) return TokenDistribution::one_hot(d.size(), mode(d).token);
  if (temperature == 1.0) return d;
  // Work relative to the mode so that small T does not underflow everything.
  const double top = mode(d).probability;
  const double inv_t = 1.0 / temperature;
  std::vector<double> w(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) {
    w[v] = d[v] > 0.0 ? std::pow(d[v] / top, inv_t) : 0.0;
  }
  return normalize(TokenDistribution(std::move(w)));
}

TokenDistribution binary_mixture(const TokenDistribution& q, const TokenDistribution& p, int delta) {
  require_same_vocab(q, p);
  if (delta != 0 && delta != 1) throw DistributionError("mixture weight must be 0 or 1");
  return delta == 0 ? q : p;
}

std::optional<TokenDistribution> residual(const TokenDistribution& pi, const TokenDistribution& q) {
  require_same_vocab(pi, q);
  std::vector<double> w(pi.size());
  double mass = 0.0;
  for (std::size_t v = 0; v < pi.size(); ++v) {
    w[v] = std::max(0.0, pi[v] - q[v]);
    mass += w[v];
  }
  if (!(mass > 0.0)) return std::nullopt;
  for (double& x : w) x /= mass;
  return TokenDistribution(std::move(w));
}

TokenDistribution normalize(const TokenDistribution& weights) {
  const double s = weights.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw DistributionError("cannot normalize zero or non-finite mass");
  std::vector<double> w(weights.probs().begin(), weights.probs().end());
  for (double& x : w) x /= s;
  return TokenDistribution(std::move(w));
}

}  // namespace speccascade
