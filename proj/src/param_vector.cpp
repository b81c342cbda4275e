// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/param_vector.hpp"

#include <cmath>
#include <string>

#include "sfa/errors.hpp"

namespace sfa {

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

void require_same_length(const ParamVector& x, const ParamVector& y, const char* what) {
  if (x.size() != y.size()) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()) + ")");
  }
}

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  require_finite(values_, "ParamVector");
}

ParamVector ParamVector::zeros(std::size_t n) { return ParamVector(std::vector<double>(n, 0.0)); }

ParamVector linear_combine(double a, const ParamVector& x, double b, const ParamVector& y) {
  require_same_length(x, y, "linear_combine");
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw NumericError("linear_combine: coefficients must be finite");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
  return ParamVector(std::move(out));
}

ParamVector weighted_average(const ParamVector& theta_o, const ParamVector& theta_star, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw DomainError("weighted_average: beta must lie in [0, 1], got " + std::to_string(beta));
  }
  return linear_combine(beta, theta_o, 1.0 - beta, theta_star);
}

double l2_distance(const ParamVector& x, const ParamVector& y) {
  require_same_length(x, y, "l2_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace sfa
