// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include <cmath>
#include <limits>

#include "doctest.h"
#include "speccascade/distributions.hpp"
#include "speccascade/rng.hpp"

using namespace speccascade;
using doctest::Approx;

namespace {
TokenDistribution d(std::vector<double> v) { return TokenDistribution(std::move(v)); }
}  // namespace

TEST_CASE("validate accepts a proper distribution and names violations") {
  CHECK_FALSE(validate(d({0.25, 0.75})).has_value());

  auto bad = validate(d({0.5, 0.6}));
  REQUIRE(bad.has_value());
  CHECK(bad->kind == ViolationKind::kBadSum);

  bad = validate(d({1.2, -0.2}));
  REQUIRE(bad.has_value());
  CHECK(bad->kind == ViolationKind::kNegative);
  CHECK(bad->index == 1);

  bad = validate(d({std::nan(""), 1.0}));
  REQUIRE(bad.has_value());
  CHECK(bad->kind == ViolationKind::kNonFinite);

  bad = validate(d({1.0}));
  REQUIRE(bad.has_value());
  CHECK(bad->kind == ViolationKind::kTooSmallVocab);

  bad = validate(d({0.5, 0.5}), Vocab(3));
  REQUIRE(bad.has_value());
  CHECK(bad->kind == ViolationKind::kSizeMismatch);
}

TEST_CASE("checked clamps tiny negatives and rejects real ones") {
  const auto c = TokenDistribution::checked({1.0 + 1e-13, -1e-13});
  CHECK(c[1] == 0.0);
  CHECK(c.sum() == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(TokenDistribution::checked({1.1, -0.1}), DistributionError);
  CHECK_THROWS_AS(Vocab(1), DistributionError);
}

TEST_CASE("total variation distance") {
  CHECK(tv_distance(d({0.7, 0.3}), d({0.4, 0.6})) == Approx(0.3));
  CHECK(tv_distance(d({0.2, 0.8}), d({0.2, 0.8})) == 0.0);
  CHECK(tv_distance(d({1.0, 0.0}), d({0.0, 1.0})) == 1.0);
}

TEST_CASE("entropy and cross entropy") {
  CHECK(entropy(d({0.9, 0.1})) == Approx(0.325083).epsilon(1e-6));
  CHECK(entropy(d({1.0, 0.0})) == 0.0);
  CHECK(entropy(TokenDistribution::uniform(4)) == Approx(std::log(4.0)));
  CHECK(std::isinf(cross_entropy(d({0.5, 0.5}), d({1.0, 0.0}))));
  CHECK(cross_entropy(d({1.0, 0.0}), d({0.5, 0.5})) == Approx(std::log(2.0)));
}

TEST_CASE("mode breaks ties toward the lowest index") {
  CHECK(mode(d({0.4, 0.4, 0.2})).token == 0);
  CHECK(mode(d({0.1, 0.2, 0.7})).token == 2);
  CHECK(mode(d({0.1, 0.2, 0.7})).probability == 0.7);
}

TEST_CASE("temperature") {
  const auto t = apply_temperature(d({0.8, 0.2}), 0.5);
  CHECK(t[0] == Approx(0.941176470588).epsilon(1e-10));
  CHECK(t[1] == Approx(0.058823529412).epsilon(1e-10));
  CHECK(apply_temperature(d({0.3, 0.7}), 0.0) == TokenDistribution::one_hot(2, 1));
  CHECK(apply_temperature(d({0.3, 0.7}), 1.0) == d({0.3, 0.7}));
  CHECK_THROWS(apply_temperature(d({0.3, 0.7}), -1.0));
}

TEST_CASE("residual") {
  const auto r1 = residual(d({0.5, 0.5}), d({0.8, 0.2}));
  REQUIRE(r1.has_value());
  CHECK(*r1 == d({0.0, 1.0}));
  const auto r2 = residual(d({0.6, 0.3, 0.1}), d({0.2, 0.5, 0.3}));
  REQUIRE(r2.has_value());
  CHECK((*r2)[0] == Approx(1.0));
  CHECK((*r2)[1] == 0.0);
  CHECK_FALSE(residual(d({0.3, 0.7}), d({0.3, 0.7})).has_value());
}

TEST_CASE("binary mixture and normalize") {
  CHECK(binary_mixture(d({0.1, 0.9}), d({0.6, 0.4}), 0) == d({0.1, 0.9}));
  CHECK(binary_mixture(d({0.1, 0.9}), d({0.6, 0.4}), 1) == d({0.6, 0.4}));
  CHECK_THROWS(binary_mixture(d({0.1, 0.9}), d({0.6, 0.4}), 2));
  CHECK(normalize(d({1.0, 3.0})) == d({0.25, 0.75}));
  CHECK_THROWS(normalize(d({0.0, 0.0})));
  CHECK_THROWS(require_same_vocab(d({1.0, 0.0}), d({1.0, 0.0, 0.0})));
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(5, 1, 2), b(5, 1, 2), c(5, 1, 3);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.bits();
    CHECK(x == b.bits());
    CHECK(x != c.bits());
  }
  CHECK(a.counter() == 10);
  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
  }
  const std::vector<double> w{0.0, 2.0, 0.0};
  for (int i = 0; i < 50; ++i) CHECK(u.categorical(w) == 1);
}
