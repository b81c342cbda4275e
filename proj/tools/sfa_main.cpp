// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// sfa: command-line front end.
//
//   sfa train  --config exp.cfg [--out DIR] [--seed N] [--jobs N]
//   sfa sweep  --config exp.cfg --axis p --values 1,0.5,0.25 [--out DIR] [--seed N] [--jobs N]
//   sfa merge  --mode average|task_arithmetic|ties|fisher --inputs a.sfac,b.sfac
//              [--base base.sfac] [--weights 0.5,0.5] [--density 0.2] --out merged.sfac
//   sfa eval   --checkpoint m.sfac --images I --labels L [--classes 0,2,4]
//   sfa fisher --checkpoint m.sfac --images I --labels L [--samples N] [--seed N] [--out F.sfac]
//
// SFA_OUTPUT_DIR overrides the config's run.output_dir; --out overrides both.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fmt/format.h>
#include <iostream>

#include "sfa/checkpoint.hpp"
#include "sfa/config.hpp"
#include "sfa/data.hpp"
#include "sfa/errors.hpp"
#include "sfa/experiment.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  std::size_t jobs = 1;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory (overrides config and SFA_OUTPUT_DIR)");
  cmd->add_option("--seed", f.seed, "Run a single seed instead of run.seeds");
  cmd->add_option("--jobs", f.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
}

sfa::ExperimentConfig resolve_config(const RunFlags& f) {
  sfa::ExperimentConfig config = sfa::load_experiment_config(f.config);
  if (const char* env = std::getenv("SFA_OUTPUT_DIR"); env != nullptr && *env != '\0') config.output_dir = env;
  if (!f.out.empty()) config.output_dir = f.out;
  if (f.seed >= 0) config.seeds = {static_cast<std::uint64_t>(f.seed)};
  return config;
}

std::vector<std::int32_t> to_labels(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential fine-tuning with averaging: continual-learning experiments and checkpoint merging"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Run one experiment per seed");
  add_run_flags(train, train_flags);

  RunFlags sweep_flags;
  std::string axis;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment per value of one hyperparameter");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--axis", axis, "p, beta, lambda, past_fraction, ta_weight or density")->required();
  sweep->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');

  std::string merge_mode = "average";
  std::vector<std::string> merge_inputs;
  std::string merge_base;
  std::vector<double> merge_weights;
  double density = sfa::kDefaultTiesDensity;
  std::string merge_out;
  auto* merge = app.add_subcommand("merge", "Merge checkpoints");
  merge->add_option("--mode", merge_mode, "average, task_arithmetic, ties or fisher");
  merge->add_option("--inputs", merge_inputs, "Input checkpoints")->required()->delimiter(',');
  merge->add_option("--base", merge_base, "Base checkpoint (task_arithmetic, ties)");
  merge->add_option("--weights", merge_weights, "One weight per input")->delimiter(',');
  merge->add_option("--density", density, "TIES trim density in (0, 1]");
  merge->add_option("--out", merge_out, "Output checkpoint")->required();

  std::string ckpt_path, images, labels;
  std::vector<int> classes;
  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on an IDX dataset");
  eval->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--images", images)->required();
  eval->add_option("--labels", labels)->required();
  eval->add_option("--classes", classes, "Restrict to these labels and mask the argmax to them")->delimiter(',');

  std::int64_t fisher_samples = 0;
  std::uint64_t fisher_seed = 0;
  std::string fisher_out;
  auto* fisher = app.add_subcommand("fisher", "Compute a diagonal Fisher and append it to a checkpoint");
  fisher->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  fisher->add_option("--images", images)->required();
  fisher->add_option("--labels", labels)->required();
  fisher->add_option("--classes", classes, "Only use examples with these labels")->delimiter(',');
  fisher->add_option("--samples", fisher_samples, "Examples to average over (default: all)");
  fisher->add_option("--seed", fisher_seed);
  fisher->add_option("--out", fisher_out, "Output path (default: rewrite the input checkpoint)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      return sfa::run_experiment(resolve_config(train_flags), {train_flags.jobs});
    }
    if (*sweep) {
      return sfa::run_sweep(resolve_config(sweep_flags), axis, values, {sweep_flags.jobs});
    }
    if (*merge) {
      sfa::MergeRequest req;
      req.mode = sfa::merge_mode_from_string(merge_mode);
      for (const auto& p : merge_inputs) req.inputs.push_back(sfa::load_checkpoint(p));
      if (!merge_base.empty()) req.base = sfa::load_checkpoint(merge_base);
      req.weights = merge_weights;
      req.density = density;
      sfa::save_checkpoint(sfa::merge_checkpoints(req), merge_out);
      std::cout << merge_out << '\n';
      return 0;
    }

    const sfa::Checkpoint ckpt = sfa::load_checkpoint(ckpt_path);
    sfa::Dataset data = sfa::load_idx(images, labels);
    const auto allowed = to_labels(classes);
    if (!allowed.empty()) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (std::find(allowed.begin(), allowed.end(), data.examples.labels[i]) != allowed.end()) rows.push_back(i);
      }
      data.examples = sfa::gather_rows(data.examples, rows);
    }
    if (*eval) {
      const auto acc = sfa::evaluate(ckpt.model(), data.examples, allowed);
      std::cout << "examples " << data.size() << "\naccuracy " << sfa::format_value(acc.masked) << "\nglobal_accuracy "
                << sfa::format_value(acc.global) << '\n';
      return 0;
    }
    sfa::Checkpoint with_fisher = ckpt;
    const std::int64_t n = fisher_samples > 0 ? fisher_samples : static_cast<std::int64_t>(data.size());
    with_fisher.fisher = sfa::fisher_diagonal(ckpt.model(), data.examples, n, fisher_seed);
    const std::string out = fisher_out.empty() ? ckpt_path : fisher_out;
    sfa::save_checkpoint(with_fisher, out);
    std::cout << out << '\n';
    return 0;
  } catch (const sfa::Error& e) {
    std::cerr << "sfa: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sfa: unexpected error: " << e.what() << '\n';
    return 2;
  }
}
