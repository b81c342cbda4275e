// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Continual-learning scorekeeping over a run's evaluation records.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sfa/mlp.hpp"
#include "sfa/param_vector.hpp"

namespace sfa {

/// Which accuracy a run scores itself by. `masked` restricts the argmax to
/// the eval task's own labels; `global` takes it over the whole class space.
enum class EvalMetric { masked, global };

std::string to_string(EvalMetric m);
EvalMetric eval_metric_from_string(const std::string& name);

struct EvalRecord {
  std::size_t global_step = 0;
  std::int32_t train_task = 0;  // task being trained when the record was taken
  std::int32_t eval_task = 0;
  double accuracy = 0.0;        // under the run's metric
  double other_accuracy = 0.0;  // under the other metric
  bool boundary = false;        // taken at the end of train_task

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct RunHistory {
  std::string strategy;
  std::uint64_t seed = 0;
  EvalMetric metric = EvalMetric::masked;
  MlpSpec spec;
  std::vector<std::string> task_names;
  std::vector<EvalRecord> records;     // sorted by global_step
  ParamVector initial;                 // parameters before the first task
  std::vector<ParamVector> checkpoints;  // one per task boundary
  std::string config_echo;

  std::size_t num_tasks() const { return task_names.size(); }
  friend bool operator==(const RunHistory&, const RunHistory&) = default;
};

/// Last recorded accuracy for each eval task, in task order. Throws
/// DomainError if some task has no record.
std::vector<double> final_accuracies(const RunHistory& history);

/// Mean over tasks of the last recorded accuracy.
double final_average_accuracy(const RunHistory& history);

/// Accuracy at the task's own training boundary minus its final accuracy.
double forgetting(const RunHistory& history, std::size_t eval_task);

/// Distance between the final parameters and the anchor the last task was
/// trained against (the previous boundary checkpoint, or the initial
/// parameters for a one-task run).
double l2_to_anchor(const RunHistory& history);

}  // namespace sfa
