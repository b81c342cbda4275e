// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Post-hoc merging operators. All are pure functions of parameter vectors;
// none reads data.

#pragma once

#include <vector>

#include "sfa/mlp.hpp"
#include "sfa/param_vector.hpp"

namespace sfa {

struct TaskVector {
  ParamVector delta;  // fine-tuned minus base
};

struct MergeWeights {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  /// Every weight finite.
  void validate() const;
  /// Additionally: non-negative and summing to 1 within 1e-12.
  void validate_convex() const;

  static MergeWeights uniform(std::size_t n);
};

inline constexpr double kDefaultTiesDensity = 0.2;

TaskVector task_vector(const ParamVector& base, const ParamVector& finetuned);

/// base + sum_i w_i * delta_i.
ParamVector task_arithmetic(const ParamVector& base, const std::vector<TaskVector>& vectors,
                            const MergeWeights& weights);

/// Linear interpolation between a base and a fine-tuned model; beta weights
/// the base. Identical to weighted_average(base, finetuned, beta).
ParamVector wise_ft(const ParamVector& base, const ParamVector& finetuned, double beta);

/// Trim / elect / disjoint-merge:
///  1. keep the ceil(density * n) largest-magnitude entries of each vector
///     (equal magnitudes: lower index wins), zero the rest;
///  2. elected sign at i = sign of sum_k w_k * trimmed_k[i], zero counts as +;
///  3. merged delta at i = sum of w_k * trimmed_k[i] over vectors whose entry
///     has the elected sign, divided by the sum of those w_k (0 if none).
ParamVector ties_merge(const ParamVector& base, const std::vector<TaskVector>& vectors, double density,
                       const MergeWeights& weights);

/// Zeroes all but the top ceil(density * n) entries by magnitude. Exposed for
/// the TIES stages to be tested on their own.
ParamVector ties_trim(const ParamVector& delta, double density);

/// theta(j) = sum_k l_k F_k(j) theta_k(j) / sum_k l_k F_k(j); coordinates with
/// a zero denominator take the unweighted mean of the models.
ParamVector fisher_merge(const std::vector<ParamVector>& models, const std::vector<FisherDiagonal>& fishers,
                         const MergeWeights& lambdas);

/// (1 - eta F_o(j)) theta_star(j) + eta F_o(j) theta_o(j). Requires eta F_o(j) <= 1.
ParamVector ewc_merge_step(const ParamVector& theta_star, const ParamVector& theta_o,
                           const FisherDiagonal& fisher_o, double eta);

}  // namespace sfa
