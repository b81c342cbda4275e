// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/merge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sfa/errors.hpp"

namespace sfa {

void MergeWeights::validate() const {
  for (const auto w : weights) {
    if (!std::isfinite(w)) throw NumericError("merge weights must be finite");
  }
}

void MergeWeights::validate_convex() const {
  validate();
  double sum = 0.0;
  for (const auto w : weights) {
    if (w < 0.0) throw DomainError("convex merge weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("convex merge weights must sum to 1");
}

MergeWeights MergeWeights::uniform(std::size_t n) {
  return MergeWeights{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

namespace {

void check_vectors(const ParamVector& base, const std::vector<TaskVector>& vectors, const MergeWeights& weights,
                   const char* what) {
  if (vectors.size() != weights.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(vectors.size()) + " vectors but " +
                         std::to_string(weights.size()) + " weights");
  }
  weights.validate();
  for (const auto& v : vectors) require_same_length(base, v.delta, what);
}

}  // namespace

TaskVector task_vector(const ParamVector& base, const ParamVector& finetuned) {
  return TaskVector{linear_combine(-1.0, base, 1.0, finetuned)};
}

ParamVector task_arithmetic(const ParamVector& base, const std::vector<TaskVector>& vectors,
                            const MergeWeights& weights) {
  check_vectors(base, vectors, weights, "task_arithmetic");
  ParamVector out = base;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    out = linear_combine(1.0, out, weights.weights[k], vectors[k].delta);
  }
  return out;
}

ParamVector wise_ft(const ParamVector& base, const ParamVector& finetuned, double beta) {
  return weighted_average(base, finetuned, beta);
}

ParamVector ties_trim(const ParamVector& delta, double density) {
  if (!(density > 0.0 && density <= 1.0)) throw DomainError("ties: density must lie in (0, 1]");
  const std::size_t n = delta.size();
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(density * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(delta[a]) > std::abs(delta[b]); });
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < keep; ++r) out[order[r]] = delta[order[r]];
  return ParamVector(std::move(out));
}

ParamVector ties_merge(const ParamVector& base, const std::vector<TaskVector>& vectors, double density,
                       const MergeWeights& weights) {
  if (!(density > 0.0 && density <= 1.0)) throw DomainError("ties: density must lie in (0, 1]");
  check_vectors(base, vectors, weights, "ties_merge");

  std::vector<ParamVector> trimmed;
  trimmed.reserve(vectors.size());
  for (const auto& v : vectors) trimmed.push_back(ties_trim(v.delta, density));

  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    double vote = 0.0;
    for (std::size_t k = 0; k < trimmed.size(); ++k) vote += weights.weights[k] * trimmed[k][i];
    const bool positive = vote >= 0.0;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < trimmed.size(); ++k) {
      const double t = trimmed[k][i];
      if ((positive && t > 0.0) || (!positive && t < 0.0)) {
        num += weights.weights[k] * t;
        den += weights.weights[k];
      }
    }
    out[i] = base[i] + (den != 0.0 ? num / den : 0.0);
  }
  return ParamVector(std::move(out));
}

ParamVector fisher_merge(const std::vector<ParamVector>& models, const std::vector<FisherDiagonal>& fishers,
                         const MergeWeights& lambdas) {
  if (models.empty()) throw DimensionError("fisher_merge: no models");
  if (fishers.size() != models.size() || lambdas.size() != models.size()) {
    throw DimensionError("fisher_merge: models, fishers and lambdas must have equal counts");
  }
  lambdas.validate();
  for (const auto l : lambdas.weights) {
    if (l < 0.0) throw DomainError("fisher_merge: lambdas must be non-negative");
  }
  const std::size_t n = models.front().size();
  for (std::size_t k = 0; k < models.size(); ++k) {
    require_same_length(models.front(), models[k], "fisher_merge");
    if (fishers[k].size() != n) throw DimensionError("fisher_merge: Fisher length mismatch");
  }

  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double num = 0.0;
    double den = 0.0;
    double plain = 0.0;
    for (std::size_t k = 0; k < models.size(); ++k) {
      const double w = lambdas.weights[k] * fishers[k][j];
      num += w * models[k][j];
      den += w;
      plain += models[k][j];
    }
    out[j] = den > 0.0 ? num / den : plain / static_cast<double>(models.size());
  }
  return ParamVector(std::move(out));
}

ParamVector ewc_merge_step(const ParamVector& theta_star, const ParamVector& theta_o, const FisherDiagonal& fisher_o,
                           double eta) {
  require_same_length(theta_star, theta_o, "ewc_merge_step");
  if (fisher_o.size() != theta_o.size()) throw DimensionError("ewc_merge_step: Fisher length mismatch");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("ewc_merge_step: eta must be finite and >= 0");
  std::vector<double> out(theta_o.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double w = eta * fisher_o[j];
    if (w > 1.0) {
      throw DomainError("ewc_merge_step: eta*F(" + std::to_string(j) + ") = " + std::to_string(w) +
                        " exceeds 1; use a smaller eta");
    }
    out[j] = (1.0 - w) * theta_star[j] + w * theta_o[j];
  }
  return ParamVector(std::move(out));
}

}  // namespace sfa
