// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/experiment.hpp"

#include <fmt/format.h>

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sfa/errors.hpp"
#include "sfa/merge.hpp"

namespace sfa {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Runs job(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
template <typename Job>
void run_pool(std::size_t n, std::size_t jobs, Job&& job) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

void write_run_outputs(const ExperimentConfig& config, const std::string& run_id, const RunHistory& history) {
  const auto dir = config.output_dir / run_id;
  make_dirs(dir);
  const EvalMetric other = history.metric == EvalMetric::masked ? EvalMetric::global : EvalMetric::masked;
  for (const bool primary : {true, false}) {
    const auto path = dir / (primary ? std::string("history.csv") : "history_" + to_string(other) + ".csv");
    auto out = open_output(path);
    write_history_csv(out, run_id, history, primary);
    close_output(out, path);
  }
  {
    const auto path = dir / "config.txt";
    auto out = open_output(path);
    out << history.config_echo;
    close_output(out, path);
  }
  const auto ckpts = boundary_checkpoints(history);
  for (std::size_t k = 0; k < ckpts.size(); ++k) save_checkpoint(ckpts[k], dir / fmt::format("task{}.sfac", k));
}

struct RunJob {
  const ExperimentConfig* config;
  const TaskStream* stream;
  std::uint64_t seed;
};

std::vector<RunHistory> execute(const std::vector<RunJob>& jobs, std::size_t threads) {
  std::vector<RunHistory> histories(jobs.size());
  run_pool(jobs.size(), threads, [&](std::size_t i) {
    const RunJob& job = jobs[i];
    histories[i] = run_single(*job.config, *job.stream, job.seed);
    write_run_outputs(*job.config, run_id_for(*job.config, job.seed), histories[i]);
  });
  return histories;
}

void write_summary(const ExperimentConfig& config, const std::vector<RunHistory>& histories) {
  make_dirs(config.output_dir);
  const auto path = config.output_dir / "summary.csv";
  auto out = open_output(path);
  out << summary_header(histories.front()) << '\n';
  for (const auto& h : histories) out << summary_row(run_id_for(config, h.seed), h) << '\n';
  close_output(out, path);
}

}  // namespace

std::string format_value(double v) { return fmt::format("{:.6g}", v); }

TaskStream build_stream(const ExperimentConfig& config) {
  const StreamConfig& s = config.stream;
  if (s.source == StreamSource::synthetic) return synthetic_gaussian_tasks(s.synthetic);
  if (s.images.empty() || s.labels.empty()) throw ConfigError("data.images", "idx source needs data.images and data.labels");
  const Dataset data = load_idx(s.images, s.labels);
  std::vector<std::vector<std::int32_t>> groups = s.groups;
  if (groups.empty()) groups = {{0, 2, 4, 6, 8}, {1, 3, 5, 7, 9}};
  return split_by_labels(data, groups, s.split_seed);
}

MlpSpec build_spec(const ExperimentConfig& config, const TaskStream& stream) {
  if (stream.size() == 0) throw DomainError("empty task stream");
  MlpSpec spec;
  spec.layer_sizes.push_back(stream.tasks.front().train.dim());
  spec.layer_sizes.insert(spec.layer_sizes.end(), config.hidden.begin(), config.hidden.end());
  spec.layer_sizes.push_back(static_cast<std::size_t>(stream.class_count));
  spec.activation = config.activation;
  spec.validate();
  return spec;
}

std::string run_id_for(const ExperimentConfig& config, std::uint64_t seed) {
  return fmt::format("{}-seed{}", config.strategy_kind, seed);
}

RunHistory run_single(const ExperimentConfig& config, const TaskStream& stream, std::uint64_t seed) {
  RunOptions options;
  options.eval_every = config.eval_every;
  options.metric = config.eval_metric;
  options.config_echo = echo_config(config);
  return sequential_run(stream, build_spec(config, stream), config.strategy(), config.sgd, seed, options);
}

void write_history_csv(std::ostream& out, const std::string& run_id, const RunHistory& history, bool primary) {
  out << "run_id,strategy,seed,global_step,train_task,eval_task,accuracy\n";
  for (const auto& r : history.records) {
    out << run_id << ',' << history.strategy << ',' << history.seed << ',' << r.global_step << ',' << r.train_task << ','
        << r.eval_task << ',' << format_value(primary ? r.accuracy : r.other_accuracy) << '\n';
  }
}

std::string summary_header(const RunHistory& history) {
  std::string h = "run_id,strategy,seed,final_avg_accuracy";
  for (const auto& name : history.task_names) h += ",final_acc_" + name;
  for (const auto& name : history.task_names) h += ",forgetting_" + name;
  return h + ",l2_to_anchor";
}

std::string summary_row(const std::string& run_id, const RunHistory& history) {
  std::string row = fmt::format("{},{},{},{}", run_id, history.strategy, history.seed,
                                format_value(final_average_accuracy(history)));
  for (const auto a : final_accuracies(history)) row += "," + format_value(a);
  for (std::size_t k = 0; k < history.num_tasks(); ++k) row += "," + format_value(forgetting(history, k));
  return row + "," + format_value(l2_to_anchor(history));
}

std::vector<Checkpoint> boundary_checkpoints(const RunHistory& history) {
  std::vector<Checkpoint> out;
  for (std::size_t k = 0; k < history.checkpoints.size(); ++k) {
    Checkpoint c;
    c.spec = history.spec;
    c.params = history.checkpoints[k];
    c.provenance.strategy = history.strategy;
    c.provenance.seed = history.seed;
    const std::size_t trained = std::min(k + 1, history.task_names.size());
    c.provenance.tasks.assign(history.task_names.begin(), history.task_names.begin() + static_cast<std::ptrdiff_t>(trained));
    if (k > 0) c.provenance.parents.push_back(digest_hex(checkpoint_digest(out.back())));
    out.push_back(std::move(c));
  }
  return out;
}

int run_experiment(const ExperimentConfig& config, const ExecutionOptions& exec) {
  const TaskStream stream = build_stream(config);
  std::vector<RunJob> jobs;
  for (const auto seed : config.seeds) jobs.push_back({&config, &stream, seed});
  write_summary(config, execute(jobs, exec.jobs));
  return 0;
}

int run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
              const ExecutionOptions& exec) {
  const std::string key = sweep_axis_key(axis);
  if (values.empty()) throw ConfigError(key, "sweep needs at least one value");
  const TaskStream stream = build_stream(base);

  std::vector<ExperimentConfig> configs;
  for (const auto v : values) {
    ExperimentConfig c = base;
    set_config_value(c, key, fmt::format("{}", v));
    c.output_dir = base.output_dir / fmt::format("{}={}", axis, format_value(v));
    configs.push_back(std::move(c));
  }
  std::vector<RunJob> jobs;
  for (const auto& c : configs) {
    for (const auto seed : c.seeds) jobs.push_back({&c, &stream, seed});
  }
  const auto histories = execute(jobs, exec.jobs);

  make_dirs(base.output_dir);
  const auto path = base.output_dir / "sweep.csv";
  auto out = open_output(path);
  out << "axis,value," << summary_header(histories.front()) << '\n';
  std::size_t i = 0;
  for (std::size_t v = 0; v < configs.size(); ++v) {
    std::vector<RunHistory> per_value;
    for (const auto seed : configs[v].seeds) {
      const RunHistory& h = histories[i++];
      out << axis << ',' << format_value(values[v]) << ',' << summary_row(run_id_for(configs[v], seed), h) << '\n';
      per_value.push_back(h);
    }
    write_summary(configs[v], per_value);
  }
  close_output(out, path);
  return 0;
}

MergeCommandMode merge_mode_from_string(const std::string& name) {
  if (name == "average") return MergeCommandMode::average;
  if (name == "task_arithmetic") return MergeCommandMode::task_arithmetic;
  if (name == "ties") return MergeCommandMode::ties;
  if (name == "fisher") return MergeCommandMode::fisher;
  throw DomainError("unknown merge mode '" + name + "' (average, task_arithmetic, ties, fisher)");
}

Checkpoint merge_checkpoints(const MergeRequest& req) {
  if (req.inputs.empty()) throw DomainError("merge: no input checkpoints");
  const MlpSpec& spec = req.inputs.front().spec;
  for (const auto& c : req.inputs) {
    if (!(c.spec == spec)) throw DomainError("merge: input checkpoints have different architectures");
  }
  if (req.base && !(req.base->spec == spec)) throw DomainError("merge: base checkpoint has a different architecture");
  if (!req.weights.empty() && req.weights.size() != req.inputs.size()) {
    throw DimensionError("merge: one weight per input checkpoint is required");
  }
  const std::size_t n = req.inputs.size();
  auto weights_or = [&](double fill) {
    return MergeWeights{req.weights.empty() ? std::vector<double>(n, fill) : req.weights};
  };

  Checkpoint out;
  out.spec = spec;
  switch (req.mode) {
    case MergeCommandMode::average: {
      const MergeWeights w = req.weights.empty() ? MergeWeights::uniform(n) : MergeWeights{req.weights};
      w.validate_convex();
      ParamVector acc = linear_combine(w.weights[0], req.inputs[0].params, 0.0, req.inputs[0].params);
      for (std::size_t k = 1; k < n; ++k) acc = linear_combine(1.0, acc, w.weights[k], req.inputs[k].params);
      out.params = std::move(acc);
      break;
    }
    case MergeCommandMode::task_arithmetic:
    case MergeCommandMode::ties: {
      if (!req.base) throw DomainError("merge: task_arithmetic and ties need a base checkpoint");
      std::vector<TaskVector> vectors;
      for (const auto& c : req.inputs) vectors.push_back(task_vector(req.base->params, c.params));
      out.params = req.mode == MergeCommandMode::ties
                       ? ties_merge(req.base->params, vectors, req.density, weights_or(1.0))
                       : task_arithmetic(req.base->params, vectors, weights_or(1.0));
      break;
    }
    case MergeCommandMode::fisher: {
      std::vector<ParamVector> models;
      std::vector<FisherDiagonal> fishers;
      for (const auto& c : req.inputs) {
        if (!c.fisher) throw DomainError("merge: fisher mode needs every input to carry a Fisher block");
        models.push_back(c.params);
        fishers.push_back(*c.fisher);
      }
      out.params = fisher_merge(models, fishers, req.weights.empty() ? MergeWeights::uniform(n) : MergeWeights{req.weights});
      break;
    }
  }

  static constexpr const char* kModeNames[] = {"average", "task_arithmetic", "ties", "fisher"};
  out.provenance.strategy = std::string("merge:") + kModeNames[static_cast<int>(req.mode)];
  out.provenance.seed = req.inputs.front().provenance.seed;
  if (req.base) {
    out.provenance.tasks = req.base->provenance.tasks;
    out.provenance.parents.push_back(digest_hex(checkpoint_digest(*req.base)));
  }
  for (const auto& c : req.inputs) {
    for (const auto& t : c.provenance.tasks) {
      if (std::find(out.provenance.tasks.begin(), out.provenance.tasks.end(), t) == out.provenance.tasks.end()) {
        out.provenance.tasks.push_back(t);
      }
    }
    out.provenance.parents.push_back(digest_hex(checkpoint_digest(c)));
  }
  return out;
}

}  // namespace sfa
