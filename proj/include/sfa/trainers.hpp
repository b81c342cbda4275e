// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// SGD training with forgetting-mitigation strategies: plain sequential
// fine-tuning, SFA (periodic averaging with the previous-task model), L2 and
// EWC penalties toward that model, rehearsal, merge-after-training baselines,
// and the multitask upper bound.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>

#include "sfa/data.hpp"
#include "sfa/metrics.hpp"
#include "sfa/rng.hpp"
#include "sfa/mlp.hpp"

namespace sfa {

struct SgdConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t steps_per_task = 2000;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct SequentialConfig {};

struct SfaConfig {
  double p = 1.0;     // fraction of the task's steps between merges
  double beta = 0.5;  // weight on the anchor in each merge

  /// Steps between merges: floor(p * T), robust to p = k/T rounding.
  std::size_t merge_every(std::size_t steps) const;
  void validate(std::size_t steps) const;
};

enum class PenaltyKind { l2, ewc };

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::l2;
  double lambda = 0.0;
  std::int64_t fisher_samples = 0;  // ewc only; 0 means the whole task set

  void validate() const;
};

struct RehearsalConfig {
  double past_fraction = 0.1;
  std::size_t per_task_cap = 1000;

  void validate() const;
};

enum class MergeMode { task_arithmetic, ties };

/// Fine-tune plainly, then merge the task vector (relative to the
/// previous-task model) back with `weight`; TIES also trims to `density`.
struct MergeStrategyConfig {
  MergeMode mode = MergeMode::task_arithmetic;
  double weight = 1.0;
  double density = 0.2;

  void validate() const;
};

struct MultitaskConfig {};

using StrategyConfig = std::variant<SequentialConfig, SfaConfig, PenaltyConfig, RehearsalConfig,
                                    MergeStrategyConfig, MultitaskConfig>;

/// Short tag used in CSVs and checkpoint provenance ("sequential", "sfa", ...).
std::string strategy_name(const StrategyConfig& strategy);

/// Called after each completed step (after any merge) with the 1-based step.
using StepObserver = std::function<void(std::size_t step, const ModelParams& params)>;

/// Seeded minibatch order: each epoch is a fresh shuffle walked in chunks of
/// batch_size, so an epoch has ceil(n / batch_size) steps.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::span<const std::size_t> next();

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

/// theta - alpha * grad(L_task).
ModelParams sgd_step(const ModelParams& params, const Batch& batch, double alpha);

/// theta - eta (grad + lambda (theta - theta_o)).
ModelParams l2_step(const ModelParams& params, const ParamVector& theta_o, const Batch& batch, double eta,
                    double lambda);

/// theta - eta (grad + lambda F_o . (theta - theta_o)).
ModelParams ewc_step(const ModelParams& params, const ParamVector& theta_o, const FisherDiagonal& fisher_o,
                     const Batch& batch, double eta, double lambda);

ModelParams plain_train(const ModelParams& start, const Dataset& task, const SgdConfig& sgd,
                        const StepObserver& observer = {});

/// Starts from theta_o and holds it fixed as the anchor. After step t with
/// t mod floor(pT) == 0 the parameters become beta*theta_o + (1-beta)*theta;
/// a final merge follows step T when T mod floor(pT) != 0.
ModelParams sfa_train(const ModelParams& theta_o, const Dataset& task, const SgdConfig& sgd, const SfaConfig& sfa,
                      const StepObserver& observer = {});

ModelParams l2_train(const ModelParams& theta_o, const Dataset& task, const SgdConfig& sgd, double lambda,
                     const StepObserver& observer = {});

ModelParams ewc_train(const ModelParams& theta_o, const FisherDiagonal& fisher_o, const Dataset& task,
                      const SgdConfig& sgd, double lambda, const StepObserver& observer = {});

/// Plain SGD over mix_with_buffer(task, buffer, past_fraction).
ModelParams rehearsal_train(const ModelParams& theta_o, const Dataset& task, const RehearsalBuffer& buffer,
                            double past_fraction, const SgdConfig& sgd, const StepObserver& observer = {});

struct RunOptions {
  std::size_t eval_every = 0;  // 0: floor(T / 20), at least 1
  EvalMetric metric = EvalMetric::masked;
  std::string config_echo;
};

/// Trains the stream in order with the chosen strategy, starting from
/// init_params(spec, seed), and evaluates every task's eval split every
/// eval_every steps and at each task boundary.
///
/// The first task is always trained with plain SGD: there is no previous-task
/// model to anchor to and no buffer to rehearse. From the second task on the
/// anchor is the end-of-previous-task model; EWC recomputes the Fisher on the
/// just-finished task; rehearsal adds that task to its buffer. `multitask`
/// trains once on all training sets for num_tasks * T steps.
RunHistory sequential_run(const TaskStream& stream, const MlpSpec& spec, const StrategyConfig& strategy,
                          const SgdConfig& sgd, std::uint64_t seed, const RunOptions& options = {});

}  // namespace sfa
