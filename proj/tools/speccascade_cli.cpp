// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

// speccascade run | verify | frontier

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "speccascade/config.hpp"
#include "speccascade/harness.hpp"
#include "speccascade/verify.hpp"

namespace {

using namespace speccascade;

int cmd_run(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed,
            const std::string& method, std::optional<double> alpha, std::optional<std::size_t> gamma,
            std::optional<double> temperature) {
  RunConfig cfg = load_config(config_path);
  if (seed) cfg.run.seed = *seed;
  if (!method.empty()) cfg.method.methods = {parse_method_entry(method, cfg.method.methods.front().rule.empty()
                                                                            ? "opt"
                                                                            : cfg.method.methods.front().rule)};
  if (alpha) cfg.method.alphas = {*alpha};
  if (gamma) cfg.method.gammas = {*gamma};
  if (temperature) cfg.method.temperatures = {*temperature};
  cfg.validate();

  const std::vector<SweepRow> rows = run(cfg);
  if (out_path.empty() || out_path == "-") {
    write_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error(out_path + ": cannot open for writing");
    write_csv(out, rows);
  }
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  bool ok = true;
  for (const CheckResult& r : run_oracle_suite(seed)) {
    std::printf("%-26s %s  %.2fs  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds, r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

std::vector<SweepRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  return read_csv(in);
}

int cmd_frontier(const std::string& a, const std::string& b) {
  write_frontier_report(std::cout, compare_frontiers(read_rows(a), read_rows(b)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative cascades on synthetic tabular language models"};
  app.require_subcommand(1);

  std::string config_path, out_path, method;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> alpha, temperature;
  std::optional<std::size_t> gamma;
  auto* run_cmd = app.add_subcommand("run", "Sweep a config and write CSV");
  run_cmd->add_option("--config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_path, "CSV output path (default: stdout)");
  run_cmd->add_option("--seed", run_seed, "Override [run] seed");
  run_cmd->add_option("--method", method, "Override methods with one name or name:rule");
  run_cmd->add_option("--alpha", alpha, "Override the alpha grid with one value");
  run_cmd->add_option("--gamma", gamma, "Override the gamma grid with one value");
  run_cmd->add_option("--temperature", temperature, "Override the temperature grid with one value");

  std::uint64_t verify_seed = 20240601;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle suite; nonzero exit on any failure");
  verify_cmd->add_option("--seed", verify_seed, "Seed for the random instances");

  std::string csv_a, csv_b;
  auto* frontier_cmd = app.add_subcommand("frontier", "Compare the cost-quality frontiers of two CSVs");
  frontier_cmd->add_option("--a", csv_a, "First CSV")->required()->check(CLI::ExistingFile);
  frontier_cmd->add_option("--b", csv_b, "Second CSV")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config_path, out_path, run_seed, method, alpha, gamma, temperature);
    if (*verify_cmd) return cmd_verify(verify_seed);
    if (*frontier_cmd) return cmd_frontier(csv_a, csv_b);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
