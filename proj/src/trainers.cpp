// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/trainers.hpp"

#include <cmath>

#include "sfa/errors.hpp"
#include "sfa/merge.hpp"

namespace sfa {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_task(const Dataset& task, const ModelParams& params) {
  if (task.size() == 0) throw DomainError("training task is empty");
  if (task.dim() != params.spec().input_dim()) throw DimensionError("task feature dim does not match the model");
}

// Runs `steps` iterations of `update` over seeded minibatches of `data`.
template <typename Update>
ModelParams run_steps(ModelParams params, const Dataset& data, const SgdConfig& sgd, const StepObserver& observer,
                      Update&& update) {
  sgd.validate();
  require_task(data, params);
  BatchSampler sampler(data.size(), sgd.batch_size, sgd.shuffle_seed);
  for (std::size_t step = 1; step <= sgd.steps_per_task; ++step) {
    const auto rows = sampler.next();
    const Batch batch = gather_rows(data.examples, rows);
    params = update(step, params, batch);
    if (observer) observer(step, params);
  }
  return params;
}

}  // namespace

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DomainError("sgd.learning_rate must be > 0");
  if (batch_size < 1) throw DomainError("sgd.batch_size must be >= 1");
  if (steps_per_task < 1) throw DomainError("sgd.steps_per_task must be >= 1");
}

std::size_t SfaConfig::merge_every(std::size_t steps) const {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(steps) + 1e-9));
}

void SfaConfig::validate(std::size_t steps) const {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("sfa.p must lie in (0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("sfa.beta must lie in [0, 1]");
  if (merge_every(steps) < 1) throw DomainError("sfa: floor(p * T) must be >= 1");
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("penalty.lambda must be finite and >= 0");
  if (fisher_samples < 0) throw DomainError("penalty.fisher_samples must be >= 0");
}

void RehearsalConfig::validate() const {
  if (!(past_fraction >= 0.0 && past_fraction < 1.0)) throw DomainError("rehearsal.past_fraction must lie in [0, 1)");
}

void MergeStrategyConfig::validate() const {
  if (!std::isfinite(weight)) throw DomainError("merge.weight must be finite");
  if (!(density > 0.0 && density <= 1.0)) throw DomainError("merge.density must lie in (0, 1]");
}

std::string strategy_name(const StrategyConfig& strategy) {
  return std::visit(Overloaded{
                        [](const SequentialConfig&) -> std::string { return "sequential"; },
                        [](const SfaConfig&) -> std::string { return "sfa"; },
                        [](const PenaltyConfig& c) -> std::string { return c.kind == PenaltyKind::l2 ? "l2" : "ewc"; },
                        [](const RehearsalConfig&) -> std::string { return "rehearsal"; },
                        [](const MergeStrategyConfig& c) -> std::string {
                          return c.mode == MergeMode::task_arithmetic ? "task_arithmetic" : "ties";
                        },
                        [](const MultitaskConfig&) -> std::string { return "multitask"; },
                    },
                    strategy);
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : order_(n), batch_size_(batch_size), cursor_(n), rng_(seed) {
  if (n == 0 || batch_size == 0) throw DomainError("BatchSampler: empty data or zero batch size");
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
}

std::span<const std::size_t> BatchSampler::next() {
  if (cursor_ >= order_.size()) {
    rng_.shuffle(order_);
    cursor_ = 0;
  }
  const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
  const auto out = std::span<const std::size_t>(order_).subspan(cursor_, count);
  cursor_ += count;
  return out;
}

ModelParams sgd_step(const ModelParams& params, const Batch& batch, double alpha) {
  const auto g = loss_and_grad(params, batch).grad;
  const ParamVector& theta = params.flat();
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta[i] - alpha * g[i];
  return params.with_flat(ParamVector(std::move(out)));
}

ModelParams l2_step(const ModelParams& params, const ParamVector& theta_o, const Batch& batch, double eta,
                    double lambda) {
  require_same_length(params.flat(), theta_o, "l2_step");
  const auto g = loss_and_grad(params, batch).grad;
  const ParamVector& theta = params.flat();
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta[i] - eta * (g[i] + lambda * (theta[i] - theta_o[i]));
  return params.with_flat(ParamVector(std::move(out)));
}

ModelParams ewc_step(const ModelParams& params, const ParamVector& theta_o, const FisherDiagonal& fisher_o,
                     const Batch& batch, double eta, double lambda) {
  require_same_length(params.flat(), theta_o, "ewc_step");
  if (fisher_o.size() != theta_o.size()) throw DimensionError("ewc_step: Fisher length mismatch");
  const auto g = loss_and_grad(params, batch).grad;
  const ParamVector& theta = params.flat();
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = theta[i] - eta * (g[i] + (lambda * fisher_o[i]) * (theta[i] - theta_o[i]));
  }
  return params.with_flat(ParamVector(std::move(out)));
}

ModelParams plain_train(const ModelParams& start, const Dataset& task, const SgdConfig& sgd,
                        const StepObserver& observer) {
  return run_steps(start, task, sgd, observer, [&](std::size_t, const ModelParams& p, const Batch& b) {
    return sgd_step(p, b, sgd.learning_rate);
  });
}

ModelParams sfa_train(const ModelParams& theta_o, const Dataset& task, const SgdConfig& sgd, const SfaConfig& sfa,
                      const StepObserver& observer) {
  sgd.validate();
  sfa.validate(sgd.steps_per_task);
  const std::size_t every = sfa.merge_every(sgd.steps_per_task);
  const ParamVector& anchor = theta_o.flat();
  ModelParams out = run_steps(theta_o, task, sgd, observer, [&](std::size_t step, const ModelParams& p, const Batch& b) {
    ModelParams next = sgd_step(p, b, sgd.learning_rate);
    if (step % every == 0) next = next.with_flat(weighted_average(anchor, next.flat(), sfa.beta));
    return next;
  });
  if (sgd.steps_per_task % every != 0) out = out.with_flat(weighted_average(anchor, out.flat(), sfa.beta));
  return out;
}

ModelParams l2_train(const ModelParams& theta_o, const Dataset& task, const SgdConfig& sgd, double lambda,
                     const StepObserver& observer) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("l2_train: lambda must be finite and >= 0");
  const ParamVector anchor = theta_o.flat();
  return run_steps(theta_o, task, sgd, observer, [&](std::size_t, const ModelParams& p, const Batch& b) {
    return l2_step(p, anchor, b, sgd.learning_rate, lambda);
  });
}

ModelParams ewc_train(const ModelParams& theta_o, const FisherDiagonal& fisher_o, const Dataset& task,
                      const SgdConfig& sgd, double lambda, const StepObserver& observer) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("ewc_train: lambda must be finite and >= 0");
  if (fisher_o.size() != theta_o.flat().size()) throw DimensionError("ewc_train: Fisher length mismatch");
  const ParamVector anchor = theta_o.flat();
  return run_steps(theta_o, task, sgd, observer, [&](std::size_t, const ModelParams& p, const Batch& b) {
    return ewc_step(p, anchor, fisher_o, b, sgd.learning_rate, lambda);
  });
}

ModelParams rehearsal_train(const ModelParams& theta_o, const Dataset& task, const RehearsalBuffer& buffer,
                            double past_fraction, const SgdConfig& sgd, const StepObserver& observer) {
  const Dataset mixed = mix_with_buffer(task, buffer, past_fraction, derive_seed(sgd.shuffle_seed, 0x6d6978));
  return plain_train(theta_o, mixed, sgd, observer);
}

namespace {

class Recorder {
 public:
  Recorder(const TaskStream& stream, RunHistory& history) : stream_(stream), history_(history) {}

  // Masked and global accuracy come from one forward pass; the run's metric
  // decides which is primary.

  void record(std::size_t global_step, std::size_t train_task, const ModelParams& params, bool boundary) {
    for (std::size_t k = 0; k < stream_.size(); ++k) {
      const Task& t = stream_.tasks[k];
      if (t.eval.size() == 0) continue;
      const Accuracy acc = evaluate(params, t.eval.examples, t.labels);
      const bool masked = history_.metric == EvalMetric::masked;
      history_.records.push_back(EvalRecord{global_step, static_cast<std::int32_t>(train_task),
                                            static_cast<std::int32_t>(k), masked ? acc.masked : acc.global,
                                            masked ? acc.global : acc.masked, boundary});
    }
  }

 private:
  const TaskStream& stream_;
  RunHistory& history_;
};

}  // namespace

RunHistory sequential_run(const TaskStream& stream, const MlpSpec& spec, const StrategyConfig& strategy,
                          const SgdConfig& sgd, std::uint64_t seed, const RunOptions& options) {
  if (stream.size() == 0) throw DomainError("sequential_run: empty task stream");
  sgd.validate();
  spec.validate();
  if (spec.num_classes() < static_cast<std::size_t>(stream.class_count)) {
    throw DimensionError("model output layer is smaller than the stream's class space");
  }
  std::visit(Overloaded{
                 [](const SequentialConfig&) {},
                 [&](const SfaConfig& c) { c.validate(sgd.steps_per_task); },
                 [](const PenaltyConfig& c) { c.validate(); },
                 [](const RehearsalConfig& c) { c.validate(); },
                 [](const MergeStrategyConfig& c) { c.validate(); },
                 [](const MultitaskConfig&) {},
             },
             strategy);

  const std::size_t steps = sgd.steps_per_task;
  const std::size_t eval_every = options.eval_every > 0 ? options.eval_every : std::max<std::size_t>(1, steps / 20);

  RunHistory history;
  history.strategy = strategy_name(strategy);
  history.seed = seed;
  history.metric = options.metric;
  history.spec = spec;
  history.config_echo = options.config_echo;
  for (const auto& t : stream.tasks) history.task_names.push_back(t.name);

  ModelParams params = init_params(spec, seed);
  history.initial = params.flat();
  Recorder recorder(stream, history);

  if (std::holds_alternative<MultitaskConfig>(strategy)) {
    std::vector<const Dataset*> parts;
    for (const auto& t : stream.tasks) parts.push_back(&t.train);
    const Dataset all = concatenate(parts);
    SgdConfig long_sgd = sgd;
    long_sgd.steps_per_task = steps * stream.size();
    long_sgd.shuffle_seed = derive_seed(sgd.shuffle_seed, seed);
    params = plain_train(params, all, long_sgd, [&](std::size_t step, const ModelParams& p) {
      const std::size_t task = std::min((step - 1) / steps, stream.size() - 1);
      if (step % steps == 0) {
        recorder.record(step, task, p, true);
        history.checkpoints.push_back(p.flat());
      } else if (step % eval_every == 0) {
        recorder.record(step, task, p, false);
      }
    });
    return history;
  }

  RehearsalBuffer buffer;
  buffer.retention_seed = derive_seed(seed, 0x62756666);
  FisherDiagonal fisher;

  for (std::size_t k = 0; k < stream.size(); ++k) {
    const Task& task = stream.tasks[k];
    SgdConfig task_sgd = sgd;
    task_sgd.shuffle_seed = derive_seed(sgd.shuffle_seed, seed, k);
    const std::size_t offset = k * steps;
    const StepObserver observer = [&](std::size_t step, const ModelParams& p) {
      if (step < steps && step % eval_every == 0) recorder.record(offset + step, k, p, false);
    };
    const bool first = k == 0;

    params = std::visit(
        Overloaded{
            [&](const SequentialConfig&) { return plain_train(params, task.train, task_sgd, observer); },
            [&](const MultitaskConfig&) { return plain_train(params, task.train, task_sgd, observer); },
            [&](const SfaConfig& c) {
              return first ? plain_train(params, task.train, task_sgd, observer)
                           : sfa_train(params, task.train, task_sgd, c, observer);
            },
            [&](const PenaltyConfig& c) {
              if (first) return plain_train(params, task.train, task_sgd, observer);
              return c.kind == PenaltyKind::l2 ? l2_train(params, task.train, task_sgd, c.lambda, observer)
                                               : ewc_train(params, fisher, task.train, task_sgd, c.lambda, observer);
            },
            [&](const RehearsalConfig& c) {
              if (first || buffer.total_size() == 0) return plain_train(params, task.train, task_sgd, observer);
              return rehearsal_train(params, task.train, buffer, c.past_fraction, task_sgd, observer);
            },
            [&](const MergeStrategyConfig& c) {
              const ModelParams tuned = plain_train(params, task.train, task_sgd, observer);
              if (first) return tuned;
              const TaskVector tau = task_vector(params.flat(), tuned.flat());
              if (c.mode == MergeMode::task_arithmetic) {
                return tuned.with_flat(task_arithmetic(params.flat(), {tau}, MergeWeights{{c.weight}}));
              }
              const ParamVector trimmed =
                  ties_merge(ParamVector::zeros(tau.delta.size()), {tau}, c.density, MergeWeights{{1.0}});
              return tuned.with_flat(linear_combine(1.0, params.flat(), c.weight, trimmed));
            },
        },
        strategy);

    recorder.record(offset + steps, k, params, true);
    history.checkpoints.push_back(params.flat());

    if (const auto* pen = std::get_if<PenaltyConfig>(&strategy); pen && pen->kind == PenaltyKind::ewc) {
      const std::int64_t n = pen->fisher_samples > 0 ? pen->fisher_samples : static_cast<std::int64_t>(task.train.size());
      fisher = fisher_diagonal(params, task.train.examples, n, derive_seed(seed, 0x66697368, k));
    }
    if (const auto* reh = std::get_if<RehearsalConfig>(&strategy)) {
      buffer = buffer_update(buffer, task.train, reh->per_task_cap);
    }
  }
  return history;
}

}  // namespace sfa
