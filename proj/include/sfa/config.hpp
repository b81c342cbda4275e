// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: flat `key = value` text with dotted section
// prefixes, '#' comments and ${ENV} expansion in values. Unknown keys are
// rejected.
//
//   data.source = idx                 # idx | synthetic
//   data.images = ${SFA_MNIST_DIR}/train-images-idx3-ubyte
//   data.labels = ${SFA_MNIST_DIR}/train-labels-idx1-ubyte
//   data.groups = 0,2,4,6,8 ; 1,3,5,7,9
//   strategy = sfa
//   sfa.p = 0.25
//   sgd.learning_rate = 0.05

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sfa/data.hpp"
#include "sfa/trainers.hpp"

namespace sfa {

enum class StreamSource { idx, synthetic };

struct StreamConfig {
  StreamSource source = StreamSource::synthetic;
  std::filesystem::path images;
  std::filesystem::path labels;
  std::vector<std::vector<std::int32_t>> groups;
  std::uint64_t split_seed = 0;
  SyntheticStreamOptions synthetic;
};

struct ExperimentConfig {
  StreamConfig stream;
  std::vector<std::size_t> hidden{100};
  Activation activation = Activation::relu;

  std::string strategy_kind = "sequential";
  SfaConfig sfa;
  PenaltyConfig penalty;
  RehearsalConfig rehearsal;
  MergeStrategyConfig merge;

  SgdConfig sgd;
  std::size_t eval_every = 0;
  EvalMetric eval_metric = EvalMetric::masked;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs";

  /// Resolves strategy_kind and its section into the tagged union.
  StrategyConfig strategy() const;
};

/// Applies one `key = value` assignment. Throws ConfigError naming the key on
/// unknown keys or unparsable values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Parses config text; relative data paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical `key = value` listing of every resolved setting, in key order.
std::string echo_config(const ExperimentConfig& config);

/// Config key a sweep axis drives: p, beta, lambda, past_fraction,
/// ta_weight, density. Throws ConfigError for anything else.
std::string sweep_axis_key(const std::string& axis);

}  // namespace sfa
