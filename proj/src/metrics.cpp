// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/metrics.hpp"

#include <optional>

#include "sfa/errors.hpp"

namespace sfa {

std::string to_string(EvalMetric m) { return m == EvalMetric::masked ? "masked" : "global"; }

EvalMetric eval_metric_from_string(const std::string& name) {
  if (name == "masked") return EvalMetric::masked;
  if (name == "global") return EvalMetric::global;
  throw DomainError("unknown eval metric '" + name + "' (masked, global)");
}

std::vector<double> final_accuracies(const RunHistory& history) {
  const std::size_t n = history.num_tasks();
  if (n == 0) throw DomainError("run history has no tasks");
  std::vector<std::optional<double>> last(n);
  for (const auto& r : history.records) {
    if (r.eval_task < 0 || static_cast<std::size_t>(r.eval_task) >= n) {
      throw DomainError("record eval_task out of range");
    }
    last[static_cast<std::size_t>(r.eval_task)] = r.accuracy;
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!last[k]) throw DomainError("incomplete history: no record for task " + std::to_string(k));
    out.push_back(*last[k]);
  }
  return out;
}

double final_average_accuracy(const RunHistory& history) {
  const auto finals = final_accuracies(history);
  double sum = 0.0;
  for (const auto a : finals) sum += a;
  return sum / static_cast<double>(finals.size());
}

double forgetting(const RunHistory& history, std::size_t eval_task) {
  std::optional<double> at_boundary;
  for (const auto& r : history.records) {
    if (r.boundary && static_cast<std::size_t>(r.train_task) == eval_task &&
        static_cast<std::size_t>(r.eval_task) == eval_task) {
      at_boundary = r.accuracy;
    }
  }
  if (!at_boundary) throw DomainError("forgetting: task " + std::to_string(eval_task) + " was never trained");
  return *at_boundary - final_accuracies(history).at(eval_task);
}

double l2_to_anchor(const RunHistory& history) {
  if (history.checkpoints.empty()) throw DomainError("l2_to_anchor: no checkpoints");
  const ParamVector& anchor =
      history.checkpoints.size() >= 2 ? history.checkpoints[history.checkpoints.size() - 2] : history.initial;
  return l2_distance(history.checkpoints.back(), anchor);
}

}  // namespace sfa
