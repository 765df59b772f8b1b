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

// End-to-end orchestration behind the `ordmil` commands. A run directory
// has a fixed layout:
//
//   <out>/config.json
//   <out>/dataset/dataset.jsonl, filtered.jsonl
//   <out>/qc/svm.json, svm_train.json, filter_stats.json
//   <out>/models/folds.json, fold<f>/gt<m>.json, regression.json, *.loss.tsv
//                 (*.timing.tsv adds wall-clock seconds per epoch)
//   <out>/thresholds/thresholds.json
//   <out>/reports/report.json, frame_scores.tsv, regression_scores.tsv,
//                 confusion_<level>_<method>.tsv

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "json.hpp"
#include "mil.hpp"
#include "ordinal.hpp"
#include "qcfilter.hpp"

namespace ordmil {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kThresholdsVersion = 1;
inline constexpr int kReportVersion = 1;

struct QcConfig {
  SvmConfig svm;
  // Fraction of subjects whose frames train the SVM; the rest validate it.
  double train_fraction = 0.5;
};

struct RunConfig {
  nlohmann::json source;  // the parsed config document, echoed into outputs
  std::uint64_t seed = 0;
  SyntheticSpec synthetic;
  int folds = 5;
  std::uint64_t fold_seed = 0;
  std::array<TrainConfig, kEnsembleSize> ensemble;
  TrainConfig regression;
  double grid_step_binary = kDefaultGridStep;
  double grid_step_ordinal = kDefaultGridStep;
  QcConfig qc;
  bool train_on_filtered = false;

  /// Effective settings, seeds resolved, as written to run outputs.
  nlohmann::json Resolved() const;
};

/// Parses and validates a run config. Section seeds that are not given
/// explicitly are derived from the root `seed`.
RunConfig ParseRunConfig(const std::string& text,
                         std::optional<std::uint64_t> seed_override = {});
RunConfig LoadRunConfig(const std::filesystem::path& path,
                        std::optional<std::uint64_t> seed_override = {});

enum class TrainMode { kBinary, kEnsemble, kRegression, kAll };

struct ModeSpec {
  TrainMode mode = TrainMode::kAll;
  int binary_class = 0;  // for kBinary: the m of "severity > m"
};

/// "binary:M", "ensemble", "regression" or "all".
ModeSpec ParseMode(const std::string& s);

struct CommandOptions {
  std::filesystem::path out;
  ModeSpec mode;
  std::optional<int> fold;
  std::optional<double> grid_step;
};

/// Each command returns a human-readable summary; failures throw Error.
std::string CmdGen(const RunConfig& config, const CommandOptions& opts);
std::string CmdQcTrain(const RunConfig& config, const CommandOptions& opts);
std::string CmdQcFilter(const RunConfig& config, const CommandOptions& opts);
std::string CmdTrain(const RunConfig& config, const CommandOptions& opts);
std::string CmdTune(const RunConfig& config, const CommandOptions& opts);
std::string CmdEval(const RunConfig& config, const CommandOptions& opts);

// -- building blocks shared by commands and tests ----------------------------

/// Cached held-out frame scores for one bag. `triples` is empty when no
/// ensemble was scored and `regression` (unclipped) when no regressor was.
struct BagScores {
  std::vector<FrameTriple> triples;
  std::vector<double> regression;
};

struct FoldThresholds {
  int fold = 0;
  std::optional<BinaryGridResult> threshold_method;
  std::optional<OrdinalGridResult> sum_method;
  std::optional<OrdinalGridResult> regression;
};

/// Grid-searches the thresholds of one fold on its held-out bags.
FoldThresholds TuneFold(const Dataset& dataset,
                        const std::vector<std::size_t>& held_out,
                        const std::vector<BagScores>& scores, int fold,
                        double step_binary, double step_ordinal);

/// Video- and frame-level metrics from cached scores and tuned thresholds.
/// `scores` is indexed like dataset.bags. Frame-level entries appear only
/// when planted labels exist; those labels are min-adjusted to the bag label.
nlohmann::json BuildReport(const Dataset& dataset, const FoldAssignment& folds,
                           const std::vector<BagScores>& scores,
                           const std::vector<FoldThresholds>& thresholds,
                           const nlohmann::json& config_echo);

/// Structural check of a report document; throws Error(kParse) on the first
/// missing or mistyped field.
void ValidateReport(const nlohmann::json& report);

nlohmann::json ThresholdsToJson(const std::vector<FoldThresholds>& folds,
                                double step_binary, double step_ordinal,
                                const nlohmann::json& config_echo);
std::vector<FoldThresholds> ThresholdsFromJson(const nlohmann::json& j);

}  // namespace ordmil
