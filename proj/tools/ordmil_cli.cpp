// Copyright 2026 The ordmil Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ordmil command-line driver. Every subcommand takes --config and --out;
// see README.md for the run-directory layout.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ordmil/ordmil.h"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode = "all";
  std::optional<int> fold;
  std::optional<double> grid_step;
};

void AddCommon(CLI::App* cmd, Common& c, bool mode, bool fold, bool grid) {
  cmd->add_option("--config", c.config, "Run config (JSON)")->required()->check(
      CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Run directory")->required();
  cmd->add_option("--seed", c.seed, "Override the root seed");
  if (mode)
    cmd->add_option("--mode", c.mode, "binary:M | ensemble | regression | all")
        ->capture_default_str();
  if (fold) cmd->add_option("--fold", c.fold, "Run a single fold")->check(CLI::NonNegativeNumber);
  if (grid)
    cmd->add_option("--grid-step", c.grid_step, "Threshold grid step")
        ->check(CLI::PositiveNumber);
}

using CmdFn = ordmil_status (*)(const ordmil_config*, const ordmil_cmd_options*);

int Run(const Common& c, CmdFn fn) {
  ordmil_config* config = nullptr;
  const std::uint64_t seed = c.seed.value_or(0);
  ordmil_status st =
      ordmil_config_load(c.config.c_str(), c.seed ? &seed : nullptr, &config);
  if (st != ORDMIL_OK) {
    std::fprintf(stderr, "ordmil: %s: %s\n", ordmil_status_name(st), ordmil_last_error());
    return 2;
  }
  ordmil_cmd_options opts = ordmil_cmd_options_default();
  opts.out_dir = c.out.c_str();
  opts.mode = c.mode.c_str();
  opts.fold = c.fold.value_or(-1);
  opts.grid_step = c.grid_step.value_or(0.0);
  st = fn(config, &opts);
  ordmil_config_free(config);
  if (st != ORDMIL_OK) {
    std::fprintf(stderr, "ordmil: %s: %s\n", ordmil_status_name(st), ordmil_last_error());
    return 1;
  }
  std::fputs(ordmil_last_summary(), stdout);
  const std::string s = ordmil_last_summary();
  if (!s.empty() && s.back() != '\n') std::fputc('\n', stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ordmil: weakly supervised ordinal severity scoring from bags of frames"};
  app.set_version_flag("--version", std::string(ordmil_version()));
  app.require_subcommand(1);

  Common gen, qc_train, qc_filter, train, tune, eval;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  AddCommon(gen_cmd, gen, false, false, false);

  CLI::App* qc = app.add_subcommand("qc", "Artifact-frame filter");
  qc->require_subcommand(1);
  CLI::App* qc_train_cmd = qc->add_subcommand("train", "Train the frame SVM");
  AddCommon(qc_train_cmd, qc_train, false, false, false);
  CLI::App* qc_filter_cmd = qc->add_subcommand("filter", "Remove artifact frames");
  AddCommon(qc_filter_cmd, qc_filter, false, false, false);

  CLI::App* train_cmd = app.add_subcommand("train", "Train per-fold models");
  AddCommon(train_cmd, train, true, true, false);
  CLI::App* tune_cmd = app.add_subcommand("tune", "Grid-search per-fold thresholds");
  AddCommon(tune_cmd, tune, true, true, true);
  CLI::App* eval_cmd = app.add_subcommand("eval", "Write the metrics report");
  AddCommon(eval_cmd, eval, true, true, false);

  CLI11_PARSE(app, argc, argv);

  if (*gen_cmd) return Run(gen, ordmil_cmd_gen);
  if (*qc_train_cmd) return Run(qc_train, ordmil_cmd_qc_train);
  if (*qc_filter_cmd) return Run(qc_filter, ordmil_cmd_qc_filter);
  if (*train_cmd) return Run(train, ordmil_cmd_train);
  if (*tune_cmd) return Run(tune, ordmil_cmd_tune);
  if (*eval_cmd) return Run(eval, ordmil_cmd_eval);
  return 1;
}
