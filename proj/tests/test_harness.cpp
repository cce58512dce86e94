// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "speccascade/config.hpp"
#include "speccascade/harness.hpp"

using namespace speccascade;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

const char* kSmall = R"(
[task]
vocab = 4
order = 1
seed = 3
noise_small = 0.5
noise_large = 0.5

[method]
method = spec_cascade:opt
alpha = 0, 0.25, 0.5, 0.75, 1
gamma = 3
temperature = 1

[run]
num_prompts = 10
max_len = 12
trials = 2
seed = 5
)";

}  // namespace

TEST_CASE("config parsing and errors") {
  const RunConfig c = parse(kSmall);
  CHECK(c.task.vocab == 4);
  CHECK(c.task.eos_token() == 3);
  REQUIRE(c.method.methods.size() == 1);
  CHECK(c.method.methods[0].method == "spec_cascade");
  CHECK(c.method.methods[0].rule == "opt");
  CHECK(c.method.alphas.size() == 5);
  CHECK(c.run.small_run_cap == 10);

  const RunConfig bare = parse("[method]\nmethod = spec_cascade, spec_decode\nrule = diff\n");
  CHECK(bare.method.methods[0].rule == "diff");
  CHECK(bare.method.methods[1].rule.empty());

  auto error_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of("[task]\nvocab = 1\n").find("task.vocab") != std::string::npos);
  CHECK(error_of("[task]\ncolour = red\n").find("task.colour") != std::string::npos);
  CHECK(error_of("[run]\ntrials = many\n").find("run.trials") != std::string::npos);
  CHECK(error_of("[method]\nmethod = beam\n").find("method.method") != std::string::npos);
  CHECK(error_of("[method]\nmethod = spec_cascade:opt\nalpha = 2\n").find("method.method") != std::string::npos);
  CHECK(error_of("[method]\ngamma = 0\n").find("method.gamma") != std::string::npos);
  CHECK(error_of("[extra]\nx = 1\n").find("extra") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("grid product and default grids") {
  const RunConfig c = parse(kSmall);
  CHECK(expand_grid(c).size() == 5);
  const auto rows = run(c);
  CHECK(rows.size() == 5);

  RunConfig d;
  d.method.methods = {{"spec_cascade", "opt"}, {"oracle_cascade", "diff"}};
  // 21 alphas x 4 temperatures x 3 gammas, plus one gamma for the sequential method.
  CHECK(expand_grid(d).size() == 21 * 4 * 3 + 21 * 4);
  const auto bild = default_alphas({"bild_star", ""}, 6);
  CHECK(bild.back() == 10.0);
  const auto lossy = default_alphas({"lossy_spec", ""}, 6);
  CHECK(lossy.back() < 1.0);
}

TEST_CASE("speculative decoding on identical models never rejects") {
  RunConfig c = parse(kSmall);
  c.task.noise_small = 0.0;
  c.task.noise_large = 0.0;
  c.method.methods = {{"spec_decode", ""}};
  for (const SweepRow& r : run(c)) {
    CHECK(r.rejection_rate == 0.0);
    CHECK(r.empirical_match_rate_with_large >= 0.0);
  }
}

TEST_CASE("rows stay within range and OPT defers less as alpha grows") {
  const auto rows = run(parse(kSmall));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    CHECK((r.rejection_rate >= 0.0 && r.rejection_rate <= 1.0));
    CHECK((r.deferral_fraction >= 0.0 && r.deferral_fraction <= 1.0));
    CHECK((r.exact_expected_01_loss >= 0.0 && r.exact_expected_01_loss <= 1.0));
    if (i > 0) CHECK(r.deferral_fraction <= rows[i - 1].deferral_fraction);
  }
}

TEST_CASE("csv is deterministic, strict or not, and round-trips") {
  const RunConfig c = parse(kSmall);
  std::ostringstream a, b;
  write_csv(a, run(c));
  setenv(kStrictEnvVar, "1", 1);
  CHECK(strict_mode());
  write_csv(b, run(c));
  unsetenv(kStrictEnvVar);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("method,rule,alpha,gamma,temperature,", 0) == 0);

  std::istringstream in(a.str());
  const auto back = read_csv(in);
  std::ostringstream again;
  write_csv(again, back);
  CHECK(again.str() == a.str());
}

TEST_CASE("frontier comparison") {
  const auto rows = run(parse(kSmall));
  const FrontierReport self = compare_frontiers(rows, rows);
  CHECK(self.ties_pct == 100.0);

  SweepRow cheap = rows.front();
  cheap.deferral_fraction = 0.0;
  cheap.exact_expected_01_loss = 0.0;
  const FrontierReport rep = compare_frontiers({cheap}, rows);
  CHECK(rep.a_wins_pct == 100.0);

  SweepRow other = rows.front();
  other.seed += 1;
  CHECK_THROWS(compare_frontiers(rows, {other}));
}
