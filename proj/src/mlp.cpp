// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "sfa/errors.hpp"
#include "sfa/rng.hpp"

namespace sfa {

namespace {

constexpr Eigen::Index kChunkRows = 2048;

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, evaluated from the
// post-activation values `out`.
void apply_activation_derivative(Activation act, const Matrix& out, Matrix& grad) {
  switch (act) {
    case Activation::relu:
      grad = (out.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::tanh:
      grad.array() *= 1.0 - out.array().square();
      break;
  }
}

void check_inputs(const ModelParams& params, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != params.spec().input_dim()) {
    throw DimensionError("input dim " + std::to_string(inputs.cols()) + " does not match spec input " +
                         std::to_string(params.spec().input_dim()));
  }
}

void check_labels(const ModelParams& params, const Batch& batch) {
  check_inputs(params, batch.inputs);
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.labels.size()) {
    throw DimensionError("batch has " + std::to_string(batch.inputs.rows()) + " rows but " +
                         std::to_string(batch.labels.size()) + " labels");
  }
  const auto classes = static_cast<std::int32_t>(params.spec().num_classes());
  for (const auto y : batch.labels) {
    if (y < 0 || y >= classes) throw DomainError("label " + std::to_string(y) + " outside class range");
  }
}

// Forward pass keeping every layer's post-activation output; acts[0] is the
// input, acts.back() the logits.
std::vector<Matrix> forward_all(const ModelParams& params, const Matrix& inputs) {
  const std::size_t layers = params.spec().num_layers();
  std::vector<Matrix> acts;
  acts.reserve(layers + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = acts.back() * params.weights(l).transpose();
    z.rowwise() += params.bias(l);
    if (l + 1 < layers) apply_activation(params.spec().activation, z);
    acts.push_back(std::move(z));
  }
  return acts;
}

// Row-wise softmax minus one-hot: the gradient of -log p(y) w.r.t. the logits.
Matrix logit_residual(const Matrix& logits, std::span<const std::int32_t> labels, double* loss_sum) {
  Matrix residual(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    double norm = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      residual(r, c) = std::exp(logits(r, c) - peak);
      norm += residual(r, c);
    }
    residual.row(r) /= norm;
    const auto y = labels[static_cast<std::size_t>(r)];
    total += std::log(norm) + peak - logits(r, y);
    residual(r, y) -= 1.0;
  }
  if (loss_sum != nullptr) *loss_sum = total;
  return residual;
}

std::int32_t argmax_row(const Matrix& logits, Eigen::Index r, std::span<const std::int32_t> allowed) {
  std::int32_t best = -1;
  double best_value = 0.0;
  if (allowed.empty()) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      if (best < 0 || logits(r, c) > best_value) {
        best = static_cast<std::int32_t>(c);
        best_value = logits(r, c);
      }
    }
    return best;
  }
  for (const auto c : allowed) {
    const double v = logits(r, c);
    if (best < 0 || v > best_value || (v == best_value && c < best)) {
      best = c;
      best_value = v;
    }
  }
  return best;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw DomainError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw DomainError("MlpSpec needs at least input and output sizes");
  for (const auto s : layer_sizes) {
    if (s < 1) throw DomainError("MlpSpec layer sizes must be >= 1");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return n;
}

Batch gather_rows(const Batch& src, std::span<const std::size_t> rows) {
  Batch out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), src.inputs.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = src.inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.labels[i] = src.labels[rows[i]];
  }
  return out;
}

ModelParams::ModelParams(MlpSpec spec, ParamVector flat) : spec_(std::move(spec)), flat_(std::move(flat)) {
  spec_.validate();
  if (flat_.size() != spec_.param_count()) {
    throw DimensionError("parameter vector has " + std::to_string(flat_.size()) + " entries, spec needs " +
                         std::to_string(spec_.param_count()));
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(offset);
    offset += spec_.layer_sizes[l] * spec_.layer_sizes[l + 1] + spec_.layer_sizes[l + 1];
  }
}

ModelParams::ConstWeights ModelParams::weights(std::size_t layer) const {
  const auto fan_in = static_cast<Eigen::Index>(spec_.layer_sizes[layer]);
  const auto fan_out = static_cast<Eigen::Index>(spec_.layer_sizes[layer + 1]);
  return ConstWeights(flat_.data() + offsets_[layer], fan_out, fan_in);
}

std::size_t ModelParams::bias_offset(std::size_t layer) const {
  return offsets_[layer] + spec_.layer_sizes[layer] * spec_.layer_sizes[layer + 1];
}

ModelParams::ConstBias ModelParams::bias(std::size_t layer) const {
  return ConstBias(flat_.data() + bias_offset(layer), static_cast<Eigen::Index>(spec_.layer_sizes[layer + 1]));
}

FisherDiagonal::FisherDiagonal(std::vector<double> values) : values_(std::move(values)) {
  require_finite(values_, "FisherDiagonal");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] < 0.0) throw DomainError("FisherDiagonal: negative entry at index " + std::to_string(i));
  }
}

ModelParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<double> flat;
  flat.reserve(spec.param_count());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) flat.push_back(rng.uniform(-s, s));
    flat.insert(flat.end(), fan_out, 0.0);
  }
  return ModelParams(spec, ParamVector(std::move(flat)));
}

Matrix forward(const ModelParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  return std::move(forward_all(params, inputs).back());
}

LossAndGrad loss_and_grad(const ModelParams& params, const Batch& batch) {
  if (batch.size() == 0) throw DomainError("loss_and_grad: empty batch");
  check_labels(params, batch);

  const MlpSpec& spec = params.spec();
  const std::size_t layers = spec.num_layers();
  const auto acts = forward_all(params, batch.inputs);

  double loss_sum = 0.0;
  Matrix delta = logit_residual(acts.back(), batch.labels, &loss_sum);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  delta *= inv_n;

  std::vector<double> grad(spec.param_count(), 0.0);
  for (std::size_t l = layers; l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(spec.layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
    Eigen::Map<Matrix> grad_w(grad.data() + params.weight_offset(l), fan_out, fan_in);
    Eigen::Map<Eigen::RowVectorXd> grad_b(grad.data() + params.bias_offset(l), fan_out);
    grad_w.noalias() = delta.transpose() * acts[l];
    grad_b = delta.colwise().sum();
    if (l > 0) {
      Matrix upstream = delta * params.weights(l);
      apply_activation_derivative(spec.activation, acts[l], upstream);
      delta = std::move(upstream);
    }
  }
  return {loss_sum * inv_n, ParamVector(std::move(grad))};
}

Accuracy evaluate(const ModelParams& params, const Batch& data, std::span<const std::int32_t> allowed) {
  if (data.size() == 0) throw DomainError("accuracy: empty data");
  check_labels(params, data);
  for (const auto c : allowed) {
    if (c < 0 || static_cast<std::size_t>(c) >= params.spec().num_classes()) {
      throw DomainError("accuracy: allowed class out of range");
    }
  }
  std::size_t hits_masked = 0;
  std::size_t hits_global = 0;
  const Eigen::Index n = data.inputs.rows();
  for (Eigen::Index start = 0; start < n; start += kChunkRows) {
    const Eigen::Index rows = std::min(kChunkRows, n - start);
    const Matrix logits = forward(params, data.inputs.middleRows(start, rows));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto y = data.labels[static_cast<std::size_t>(start + r)];
      if (argmax_row(logits, r, {}) == y) ++hits_global;
      if (!allowed.empty() && argmax_row(logits, r, allowed) == y) ++hits_masked;
    }
  }
  const double denom = static_cast<double>(n);
  Accuracy acc;
  acc.global = static_cast<double>(hits_global) / denom;
  acc.masked = allowed.empty() ? acc.global : static_cast<double>(hits_masked) / denom;
  return acc;
}

double accuracy(const ModelParams& params, const Batch& data, std::span<const std::int32_t> allowed) {
  return evaluate(params, data, allowed).masked;
}

FisherDiagonal fisher_diagonal(const ModelParams& params, const Batch& data, std::int64_t n_samples,
                               std::uint64_t seed) {
  if (n_samples <= 0) throw DomainError("fisher_diagonal: n_samples must be >= 1");
  if (data.size() == 0) throw DomainError("fisher_diagonal: empty data");
  check_labels(params, data);

  const auto n = static_cast<std::size_t>(n_samples);
  std::vector<std::size_t> rows;
  if (n == data.size()) {
    rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  } else if (n < data.size()) {
    Rng rng(seed);
    rows = rng.sample_without_replacement(data.size(), n);
  } else {
    Rng rng(seed);
    rows.resize(n);
    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(data.size()));
  }

  const MlpSpec& spec = params.spec();
  const std::size_t layers = spec.num_layers();
  std::vector<double> acc(spec.param_count(), 0.0);

  // The per-example weight gradient is an outer product delta_i a_i^T, so its
  // elementwise square is (delta_i^2)(a_i^2)^T and the chunk sum is one matmul.
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(kChunkRows)) {
    const std::size_t count = std::min(static_cast<std::size_t>(kChunkRows), rows.size() - start);
    const Batch chunk = gather_rows(data, std::span(rows).subspan(start, count));
    const auto acts = forward_all(params, chunk.inputs);
    Matrix delta = logit_residual(acts.back(), chunk.labels, nullptr);
    for (std::size_t l = layers; l-- > 0;) {
      const auto fan_in = static_cast<Eigen::Index>(spec.layer_sizes[l]);
      const auto fan_out = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
      Eigen::Map<Matrix> f_w(acc.data() + params.weight_offset(l), fan_out, fan_in);
      Eigen::Map<Eigen::RowVectorXd> f_b(acc.data() + params.bias_offset(l), fan_out);
      const Matrix delta_sq = delta.array().square().matrix();
      f_w.noalias() += delta_sq.transpose() * acts[l].array().square().matrix();
      f_b += delta_sq.colwise().sum();
      if (l > 0) {
        Matrix upstream = delta * params.weights(l);
        apply_activation_derivative(spec.activation, acts[l], upstream);
        delta = std::move(upstream);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& v : acc) v *= inv;
  return FisherDiagonal(std::move(acc));
}

}  // namespace sfa
