// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "sfa/errors.hpp"

namespace sfa {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) out.push_back(trim(part));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(static_cast<T>(parse_uint(key, item)));
  return out;
}

std::string expand_env(const std::string& key, const std::string& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '$' && i + 1 < v.size() && v[i + 1] == '{') {
      const auto close = v.find('}', i + 2);
      if (close == std::string::npos) throw ConfigError(key, "unterminated ${...}");
      const std::string name = v.substr(i + 2, close - i - 2);
      const char* value = std::getenv(name.c_str());
      if (value == nullptr) throw ConfigError(key, "environment variable " + name + " is not set");
      out += value;
      i = close;
    } else {
      out += v[i];
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.source",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "idx") c.stream.source = StreamSource::idx;
         else if (v == "synthetic") c.stream.source = StreamSource::synthetic;
         else throw ConfigError(k, "expected idx or synthetic");
       }},
      {"data.images", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.stream.images = v; }},
      {"data.labels", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.stream.labels = v; }},
      {"data.groups",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stream.groups.clear();
         for (const auto& g : split(v, ';')) {
           auto labels = parse_list<std::int32_t>(k, g);
           if (labels.empty()) throw ConfigError(k, "empty label group");
           c.stream.groups.push_back(std::move(labels));
         }
       }},
      {"data.split_seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.stream.split_seed = parse_uint(k, v); }},
      {"synthetic.seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stream.synthetic.seed = parse_uint(k, v);
       }},
      {"synthetic.num_tasks",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stream.synthetic.num_tasks = parse_uint(k, v);
       }},
      {"synthetic.classes_per_task",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stream.synthetic.classes_per_task = parse_uint(k, v);
       }},
      {"synthetic.dim",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.stream.synthetic.dim = parse_uint(k, v); }},
      {"synthetic.n_per_class",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stream.synthetic.n_per_class = parse_uint(k, v);
       }},
      {"synthetic.separation",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stream.synthetic.separation = parse_double(k, v);
       }},
      {"model.hidden",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.hidden = parse_list<std::size_t>(k, v); }},
      {"model.activation",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         try {
           c.activation = activation_from_string(v);
         } catch (const DomainError&) {
           throw ConfigError(k, "expected relu or tanh");
         }
       }},
      {"strategy",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         static const std::set<std::string> kinds = {"sequential", "sfa",  "l2",         "ewc",
                                                     "rehearsal",  "task_arithmetic", "ties", "multitask"};
         if (!kinds.contains(v)) throw ConfigError(k, "unknown strategy '" + v + "'");
         c.strategy_kind = v;
       }},
      {"sfa.p", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sfa.p = parse_double(k, v); }},
      {"sfa.beta",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sfa.beta = parse_double(k, v); }},
      {"penalty.lambda",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.penalty.lambda = parse_double(k, v); }},
      {"penalty.fisher_samples",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.penalty.fisher_samples = static_cast<std::int64_t>(parse_uint(k, v));
       }},
      {"rehearsal.past_fraction",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.rehearsal.past_fraction = parse_double(k, v);
       }},
      {"rehearsal.per_task_cap",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.rehearsal.per_task_cap = parse_uint(k, v);
       }},
      {"merge.weight",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.merge.weight = parse_double(k, v); }},
      {"merge.density",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.merge.density = parse_double(k, v); }},
      {"sgd.learning_rate",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.learning_rate = parse_double(k, v); }},
      {"sgd.batch_size",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.batch_size = parse_uint(k, v); }},
      {"sgd.steps_per_task",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.steps_per_task = parse_uint(k, v); }},
      {"sgd.shuffle_seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.shuffle_seed = parse_uint(k, v); }},
      {"eval.every",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.eval_every = parse_uint(k, v); }},
      {"eval.metric",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         try {
           c.eval_metric = eval_metric_from_string(v);
         } catch (const DomainError&) {
           throw ConfigError(k, "expected masked or global");
         }
       }},
      {"run.seeds",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.seeds = parse_list<std::uint64_t>(k, v);
         if (c.seeds.empty()) throw ConfigError(k, "at least one seed is required");
       }},
      {"run.output_dir",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
  };
  return table;
}

std::string join_list(const std::vector<std::int32_t>& v) { return fmt::format("{}", fmt::join(v, ",")); }

}  // namespace

StrategyConfig ExperimentConfig::strategy() const {
  if (strategy_kind == "sequential") return SequentialConfig{};
  if (strategy_kind == "sfa") return sfa;
  if (strategy_kind == "l2" || strategy_kind == "ewc") {
    PenaltyConfig p = penalty;
    p.kind = strategy_kind == "l2" ? PenaltyKind::l2 : PenaltyKind::ewc;
    return p;
  }
  if (strategy_kind == "rehearsal") return rehearsal;
  if (strategy_kind == "task_arithmetic" || strategy_kind == "ties") {
    MergeStrategyConfig m = merge;
    m.mode = strategy_kind == "ties" ? MergeMode::ties : MergeMode::task_arithmetic;
    return m;
  }
  if (strategy_kind == "multitask") return MultitaskConfig{};
  throw ConfigError("strategy", "unknown strategy '" + strategy_kind + "'");
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  it->second(config, key, expand_env(key, trim(value)));
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(trim(line), "line " + std::to_string(line_no) + " is not of the form key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(key, "set twice");
    set_config_value(config, key, line.substr(eq + 1));
  }
  if (!base_dir.empty()) {
    for (auto* p : {&config.stream.images, &config.stream.labels}) {
      if (!p->empty() && p->is_relative()) *p = base_dir / *p;
    }
  }
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.parent_path());
}

std::string echo_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  kv["data.source"] = c.stream.source == StreamSource::idx ? "idx" : "synthetic";
  kv["data.images"] = c.stream.images.generic_string();
  kv["data.labels"] = c.stream.labels.generic_string();
  std::vector<std::string> groups;
  for (const auto& g : c.stream.groups) groups.push_back(join_list(g));
  kv["data.groups"] = fmt::format("{}", fmt::join(groups, ";"));
  kv["data.split_seed"] = fmt::format("{}", c.stream.split_seed);
  kv["synthetic.seed"] = fmt::format("{}", c.stream.synthetic.seed);
  kv["synthetic.num_tasks"] = fmt::format("{}", c.stream.synthetic.num_tasks);
  kv["synthetic.classes_per_task"] = fmt::format("{}", c.stream.synthetic.classes_per_task);
  kv["synthetic.dim"] = fmt::format("{}", c.stream.synthetic.dim);
  kv["synthetic.n_per_class"] = fmt::format("{}", c.stream.synthetic.n_per_class);
  kv["synthetic.separation"] = fmt::format("{}", c.stream.synthetic.separation);
  kv["model.hidden"] = fmt::format("{}", fmt::join(c.hidden, ","));
  kv["model.activation"] = to_string(c.activation);
  kv["strategy"] = c.strategy_kind;
  kv["sfa.p"] = fmt::format("{}", c.sfa.p);
  kv["sfa.beta"] = fmt::format("{}", c.sfa.beta);
  kv["penalty.lambda"] = fmt::format("{}", c.penalty.lambda);
  kv["penalty.fisher_samples"] = fmt::format("{}", c.penalty.fisher_samples);
  kv["rehearsal.past_fraction"] = fmt::format("{}", c.rehearsal.past_fraction);
  kv["rehearsal.per_task_cap"] = fmt::format("{}", c.rehearsal.per_task_cap);
  kv["merge.weight"] = fmt::format("{}", c.merge.weight);
  kv["merge.density"] = fmt::format("{}", c.merge.density);
  kv["sgd.learning_rate"] = fmt::format("{}", c.sgd.learning_rate);
  kv["sgd.batch_size"] = fmt::format("{}", c.sgd.batch_size);
  kv["sgd.steps_per_task"] = fmt::format("{}", c.sgd.steps_per_task);
  kv["sgd.shuffle_seed"] = fmt::format("{}", c.sgd.shuffle_seed);
  kv["eval.every"] = fmt::format("{}", c.eval_every);
  kv["eval.metric"] = to_string(c.eval_metric);
  kv["run.seeds"] = fmt::format("{}", fmt::join(c.seeds, ","));
  kv["run.output_dir"] = c.output_dir.generic_string();
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string sweep_axis_key(const std::string& axis) {
  static const std::map<std::string, std::string> axes = {
      {"p", "sfa.p"},
      {"beta", "sfa.beta"},
      {"lambda", "penalty.lambda"},
      {"past_fraction", "rehearsal.past_fraction"},
      {"ta_weight", "merge.weight"},
      {"density", "merge.density"},
  };
  const auto it = axes.find(axis);
  if (it == axes.end()) throw ConfigError(axis, "not a sweepable axis (p, beta, lambda, past_fraction, ta_weight, density)");
  return it->second;
}

}  // namespace sfa
