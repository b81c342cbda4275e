// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: builds streams from a config, runs one sequential_run
// per seed (optionally in parallel), and writes CSVs and boundary checkpoints.
//
// Output layout under the output directory:
//   summary.csv                      one row per run
//   <run_id>/history.csv             per-task accuracy records (run's metric)
//   <run_id>/history_<other>.csv     same records under the other metric
//   <run_id>/config.txt              resolved configuration
//   <run_id>/task<k>.sfac            boundary checkpoints
// Sweeps write one such tree per axis value plus a combined sweep.csv.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfa/checkpoint.hpp"
#include "sfa/config.hpp"
#include "sfa/merge.hpp"
#include "sfa/metrics.hpp"

namespace sfa {

/// Floating values in every CSV: 6 significant digits, '.' separator.
std::string format_value(double v);

TaskStream build_stream(const ExperimentConfig& config);

/// Input width from the stream, configured hidden widths, one output per class.
MlpSpec build_spec(const ExperimentConfig& config, const TaskStream& stream);

std::string run_id_for(const ExperimentConfig& config, std::uint64_t seed);

RunHistory run_single(const ExperimentConfig& config, const TaskStream& stream, std::uint64_t seed);

/// `primary` selects the run's metric; false writes the other one.
void write_history_csv(std::ostream& out, const std::string& run_id, const RunHistory& history, bool primary = true);

/// Header and row of summary.csv (without trailing newline).
std::string summary_header(const RunHistory& history);
std::string summary_row(const std::string& run_id, const RunHistory& history);

/// Boundary checkpoints of a run, each listing the previous one as parent.
std::vector<Checkpoint> boundary_checkpoints(const RunHistory& history);

struct ExecutionOptions {
  std::size_t jobs = 1;
};

/// Runs every seed and writes the output tree. Returns 0 on success.
int run_experiment(const ExperimentConfig& config, const ExecutionOptions& exec = {});

/// One run_experiment per axis value (shared seeds) under
/// <out>/<axis>=<value>/, plus <out>/sweep.csv keyed by the axis value.
int run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
              const ExecutionOptions& exec = {});

enum class MergeCommandMode { average, task_arithmetic, ties, fisher };

MergeCommandMode merge_mode_from_string(const std::string& name);

struct MergeRequest {
  MergeCommandMode mode = MergeCommandMode::average;
  std::vector<Checkpoint> inputs;
  std::optional<Checkpoint> base;  // task_arithmetic / ties
  std::vector<double> weights;     // empty: uniform (average, fisher) or 1 each (task vectors)
  double density = kDefaultTiesDensity;
};

/// Dispatches to the merge module and stamps provenance with every parent.
Checkpoint merge_checkpoints(const MergeRequest& request);

}  // namespace sfa
