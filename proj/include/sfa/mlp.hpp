// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multilayer perceptron with exact backprop, softmax cross-entropy, and the
// diagonal empirical Fisher.
//
// Flat parameter layout, per layer in order: the weight matrix in row-major
// (output-neuron-major) order, fan_out x fan_in, followed by fan_out biases.

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfa/param_vector.hpp"

namespace sfa {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpSpec {
  /// Input dim, hidden widths..., number of classes.
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;

  /// Throws DomainError unless there are >= 2 sizes, all >= 1.
  void validate() const;

  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t param_count() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Batch {
  Matrix inputs;                  // one row per example
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Copies the listed rows of `src` into a new batch, in the given order.
Batch gather_rows(const Batch& src, std::span<const std::size_t> rows);

class ModelParams {
 public:
  ModelParams(MlpSpec spec, ParamVector flat);

  const MlpSpec& spec() const { return spec_; }
  const ParamVector& flat() const { return flat_; }

  using ConstWeights = Eigen::Map<const Matrix>;
  using ConstBias = Eigen::Map<const Eigen::RowVectorXd>;

  ConstWeights weights(std::size_t layer) const;
  ConstBias bias(std::size_t layer) const;

  /// Offset of layer `layer`'s weight block inside the flat vector.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const;

  /// Replaces the flat vector; the length must match the spec.
  ModelParams with_flat(ParamVector flat) const { return ModelParams(spec_, std::move(flat)); }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.spec_ == b.spec_ && a.flat_ == b.flat_;
  }

 private:
  MlpSpec spec_;
  ParamVector flat_;
  std::vector<std::size_t> offsets_;
};

/// Per-parameter non-negative weights aligned with ModelParams::flat().
class FisherDiagonal {
 public:
  FisherDiagonal() = default;
  /// Throws DomainError on negative entries, NumericError on NaN/Inf.
  explicit FisherDiagonal(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const FisherDiagonal&, const FisherDiagonal&) = default;

 private:
  std::vector<double> values_;
};

/// Glorot-uniform weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases.
ModelParams init_params(const MlpSpec& spec, std::uint64_t seed);

/// Raw logits, one row per input row.
Matrix forward(const ModelParams& params, const Matrix& inputs);

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean softmax cross-entropy over the batch and its exact gradient.
LossAndGrad loss_and_grad(const ModelParams& params, const Batch& batch);

struct Accuracy {
  double masked = 0.0;  // argmax restricted to the allowed classes
  double global = 0.0;  // argmax over all classes
};

/// Fraction of rows whose argmax logit equals the label; ties go to the lowest
/// class index. With an empty `allowed` list both fields are the global accuracy.
Accuracy evaluate(const ModelParams& params, const Batch& data,
                  std::span<const std::int32_t> allowed = {});

double accuracy(const ModelParams& params, const Batch& data,
                std::span<const std::int32_t> allowed = {});

/// Mean over n_samples examples of the squared per-example gradient of the
/// labeled class's log-likelihood. Examples are drawn without replacement
/// when n_samples <= |data| (all of them when equal), with replacement above.
FisherDiagonal fisher_diagonal(const ModelParams& params, const Batch& data,
                               std::int64_t n_samples, std::uint64_t seed = 0);

}  // namespace sfa
