// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task streams for continual learning: IDX (MNIST) ingestion, label-group
// splits, synthetic Gaussian streams and the rehearsal buffer.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfa/mlp.hpp"

namespace sfa {

struct Dataset {
  Batch examples;
  std::int32_t class_count = 0;

  std::size_t size() const { return examples.size(); }
  std::size_t dim() const { return examples.dim(); }

  /// Throws DomainError if labels fall outside [0, class_count) or rows and
  /// labels disagree. Emptiness is checked by consumers that need data.
  void validate() const;
};

/// Concatenates datasets that share a feature dim and class space.
Dataset concatenate(const std::vector<const Dataset*>& parts);

struct Task {
  std::string name;
  Dataset train;
  Dataset eval;
  /// Classes this task covers; evaluation masks logits to these.
  std::vector<std::int32_t> labels;
};

struct TaskStream {
  std::vector<Task> tasks;
  std::int32_t class_count = 0;

  std::size_t size() const { return tasks.size(); }
};

/// Parses an IDX3 image file and IDX1 label file (big-endian; gzip accepted
/// when the path ends in ".gz"). Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// One task per label group; each task holds out floor(n/6) examples for
/// evaluation after a seeded shuffle. Labels stay in the shared class space.
TaskStream split_by_labels(const Dataset& data, const std::vector<std::vector<std::int32_t>>& groups,
                           std::uint64_t seed = 0);

struct SyntheticStreamOptions {
  std::uint64_t seed = 0;
  std::size_t num_tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t dim = 10;
  std::size_t n_per_class = 120;
  double separation = 50.0;
};

/// Unit-variance Gaussian blobs, class means uniform in [0, separation]^dim.
TaskStream synthetic_gaussian_tasks(const SyntheticStreamOptions& options);

struct RehearsalBuffer {
  std::vector<Dataset> store;  // one entry per finished task
  std::uint64_t retention_seed = 0;

  std::size_t total_size() const;
};

/// Retains a seeded uniform sample of min(cap, |finished_task|) examples.
RehearsalBuffer buffer_update(const RehearsalBuffer& buffer, const Dataset& finished_task,
                              std::size_t per_task_cap);

/// Adds ceil(|current| * f / (1 - f)) buffered examples (uniform over the
/// pooled buffer; with replacement only when the pool is too small) to the
/// whole current set, then shuffles.
Dataset mix_with_buffer(const Dataset& current, const RehearsalBuffer& buffer, double past_fraction,
                        std::uint64_t seed = 0);

/// Number of buffered rows mix_with_buffer draws for a current set of size n.
std::size_t past_rows_for(std::size_t n, double past_fraction);

}  // namespace sfa
