// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The speccascade Authors

#include "speccascade/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "speccascade/engine.hpp"

namespace speccascade {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError(field + ": cannot parse '" + text + "' as a number");
  return value;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& field, const std::string& text) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_number<T>(field, item));
  if (out.empty()) throw ConfigError(field + ": list is empty");
  return out;
}

using Setter = void (*)(RunConfig&, const std::string& field, const std::string& value);

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"task.vocab", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.vocab = parse_number<std::size_t>(f, v);
       }},
      {"task.order", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.order = parse_number<std::size_t>(f, v);
       }},
      {"task.eos", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.eos = parse_number<std::uint32_t>(f, v);
       }},
      {"task.seed", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.seed = parse_number<std::uint64_t>(f, v);
       }},
      {"task.frac_small_favored", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.frac_small_favored = parse_number<double>(f, v);
       }},
      {"task.noise_small", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.noise_small = parse_number<double>(f, v);
       }},
      {"task.noise_large", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.noise_large = parse_number<double>(f, v);
       }},
      {"task.smoothing", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.task.smoothing = parse_number<double>(f, v);
       }},
      {"method.method", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.method.methods.clear();
         for (const std::string& item : split_list(v)) c.method.methods.push_back(parse_method_entry(item, ""));
         if (c.method.methods.empty()) throw ConfigError(f + ": list is empty");
       }},
      {"method.rule", [](RunConfig&, const std::string&, const std::string&) {}},  // applied after parsing
      {"method.alpha", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.method.alphas = parse_number_list<double>(f, v);
       }},
      {"method.gamma", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.method.gammas = parse_number_list<std::size_t>(f, v);
       }},
      {"method.temperature", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.method.temperatures = parse_number_list<double>(f, v);
       }},
      {"method.lossy_beta", [](RunConfig& c, const std::string& f, const std::string& v) {
         if (v == "fixed")
           c.method.lossy_tuned = false;
         else if (v == "tuned")
           c.method.lossy_tuned = true;
         else
           throw ConfigError(f + ": expected 'fixed' or 'tuned', got '" + v + "'");
       }},
      {"run.num_prompts", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.num_prompts = parse_number<std::size_t>(f, v);
       }},
      {"run.max_len", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.max_len = parse_number<std::size_t>(f, v);
       }},
      {"run.trials", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.trials = parse_number<std::size_t>(f, v);
       }},
      {"run.seed", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.seed = parse_number<std::uint64_t>(f, v);
       }},
      {"run.small_run_cap", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.small_run_cap = parse_number<std::size_t>(f, v);
       }},
      {"run.prompt_len", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.prompt_len = parse_number<std::size_t>(f, v);
       }},
      {"run.cost_small", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.cost_small = parse_number<double>(f, v);
       }},
      {"run.cost_large", [](RunConfig& c, const std::string& f, const std::string& v) {
         c.run.cost_large = parse_number<double>(f, v);
       }},
  };
  return table;
}

bool method_takes_rule(const std::string& method) {
  return method == "spec_cascade" || method == "token_spec_cascade" || method == "token_cascade" ||
         method == "oracle_cascade";
}

}  // namespace

MethodEntry parse_method_entry(const std::string& text, const std::string& default_rule) {
  const std::size_t colon = text.find(':');
  MethodEntry e;
  e.method = trim(text.substr(0, colon));
  if (colon != std::string::npos) e.rule = trim(text.substr(colon + 1));
  if (e.rule.empty() && method_takes_rule(e.method)) e.rule = default_rule;
  return e;
}

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  std::string default_rule = "opt";
  for (const auto& [section, body] : tree) {
    if (section != "task" && section != "method" && section != "run") {
      throw ConfigError(section + ": unknown section");
    }
    for (const auto& [key, node] : body) {
      const std::string field = section + "." + key;
      const auto it = setters().find(field);
      if (it == setters().end()) throw ConfigError(field + ": unknown key");
      const std::string value = trim(node.data());
      if (field == "method.rule") default_rule = value;
      it->second(cfg, field, value);
    }
  }
  for (MethodEntry& e : cfg.method.methods) {
    if (e.rule.empty() && method_takes_rule(e.method)) e.rule = default_rule;
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  return parse_config(in);
}

void RunConfig::validate() const {
  if (task.vocab < 2) throw ConfigError("task.vocab: must be >= 2");
  if (task.eos && *task.eos >= task.vocab) throw ConfigError("task.eos: must be < vocab");
  if (!(task.frac_small_favored >= 0.0 && task.frac_small_favored <= 1.0)) {
    throw ConfigError("task.frac_small_favored: must lie in [0, 1]");
  }
  if (!(task.noise_small >= 0.0 && task.noise_small <= 1.0)) throw ConfigError("task.noise_small: must lie in [0, 1]");
  if (!(task.noise_large >= 0.0 && task.noise_large <= 1.0)) throw ConfigError("task.noise_large: must lie in [0, 1]");
  if (!(task.smoothing >= 0.0) || !std::isfinite(task.smoothing)) throw ConfigError("task.smoothing: must be >= 0");
  if (method.methods.empty()) throw ConfigError("method.method: list is empty");
  if (method.gammas.empty()) throw ConfigError("method.gamma: list is empty");
  if (method.temperatures.empty()) throw ConfigError("method.temperature: list is empty");
  for (std::size_t g : method.gammas) {
    if (g < 1) throw ConfigError("method.gamma: block sizes must be >= 1");
  }
  for (double t : method.temperatures) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("method.temperature: must be finite and >= 0");
  }
  for (const MethodEntry& e : method.methods) {
    for (double a : method.alphas.empty() ? std::vector<double>{0.0} : method.alphas) {
      try {
        (void)Strategy::from_name(e.method, e.rule, a, method.gammas.front(),
                                  method.lossy_tuned ? std::nullopt : std::optional<double>(1.0));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("method.method: ") + ex.what());
      }
    }
  }
  if (run.num_prompts < 1) throw ConfigError("run.num_prompts: must be >= 1");
  if (run.max_len < 1) throw ConfigError("run.max_len: must be >= 1");
  if (run.trials < 1) throw ConfigError("run.trials: must be >= 1");
  if (!(run.cost_small > 0.0) || !std::isfinite(run.cost_small)) throw ConfigError("run.cost_small: must be > 0");
  if (!(run.cost_large > 0.0) || !std::isfinite(run.cost_large)) throw ConfigError("run.cost_large: must be > 0");
}

}  // namespace speccascade
