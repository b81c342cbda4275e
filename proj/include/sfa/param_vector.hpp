// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat parameter vectors: the common currency of training, merging and
// penalties. Values are 64-bit and always finite; the length is fixed at
// construction and binary operations refuse mismatched lengths.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sfa {

class ParamVector {
 public:
  ParamVector() = default;

  /// Takes ownership of `values`. Throws NumericError on any NaN/Inf.
  explicit ParamVector(std::vector<double> values);

  static ParamVector zeros(std::size_t n);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }

  /// Moves the storage out, leaving this vector empty. Used by trainers that
  /// update in place and re-wrap the result.
  std::vector<double> release() && { return std::move(values_); }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// result[i] = a*x[i] + b*y[i].
ParamVector linear_combine(double a, const ParamVector& x, double b, const ParamVector& y);

/// beta*theta_o + (1-beta)*theta_star, beta in [0, 1].
ParamVector weighted_average(const ParamVector& theta_o, const ParamVector& theta_star, double beta);

/// Euclidean distance.
double l2_distance(const ParamVector& x, const ParamVector& y);

/// Throws DimensionError naming `what` when the lengths differ.
void require_same_length(const ParamVector& x, const ParamVector& y, const char* what);

/// Throws NumericError if any entry is NaN or Inf.
void require_finite(std::span<const double> values, const char* what);

}  // namespace sfa
