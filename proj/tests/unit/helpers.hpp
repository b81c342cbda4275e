// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Generators and small fixtures shared by the unit tests.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sfa/data.hpp"
#include "sfa/mlp.hpp"
#include "sfa/param_vector.hpp"

namespace sfa::testing {

inline std::vector<double> random_values(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

inline ParamVector random_vector(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  return ParamVector(random_values(gen, n, scale));
}

inline Batch random_batch(std::mt19937_64& gen, std::size_t rows, std::size_t dim, std::int32_t classes) {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::int32_t> label(0, classes - 1);
  for (Eigen::Index r = 0; r < b.inputs.rows(); ++r) {
    for (Eigen::Index c = 0; c < b.inputs.cols(); ++c) b.inputs(r, c) = normal(gen);
    b.labels.push_back(label(gen));
  }
  return b;
}

inline Dataset random_dataset(std::mt19937_64& gen, std::size_t rows, std::size_t dim, std::int32_t classes) {
  Dataset d;
  d.examples = random_batch(gen, rows, dim, classes);
  d.class_count = classes;
  return d;
}

/// Rows whose first feature is the row index, for tracking which rows an
/// operation selected.
inline Dataset indexed_dataset(std::size_t rows, std::int32_t classes) {
  Dataset d;
  d.class_count = classes;
  d.examples.inputs.resize(static_cast<Eigen::Index>(rows), 2);
  for (std::size_t i = 0; i < rows; ++i) {
    d.examples.inputs(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    d.examples.inputs(static_cast<Eigen::Index>(i), 1) = 0.0;
    d.examples.labels.push_back(static_cast<std::int32_t>(i % static_cast<std::size_t>(classes)));
  }
  return d;
}

inline ModelParams with_values(const MlpSpec& spec, std::vector<double> v) {
  return ModelParams(spec, ParamVector(std::move(v)));
}

}  // namespace sfa::testing
