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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace ordmil {

struct SvmConfig {
  double lambda = 1e-3;
  int epochs = 20;
  std::uint64_t seed = 0;
};

/// Linear max-margin frame classifier; +1 marks an artifact frame.
struct LinearSvm {
  std::vector<double> w;
  double b = 0.0;
  double lambda = 1e-3;
  int epochs = 0;
  std::uint64_t seed = 0;

  bool operator==(const LinearSvm&) const = default;
};

struct SvmTrainResult {
  LinearSvm model;
  // lambda/2 (|w|^2 + b^2) + mean hinge loss, at w = 0 and after training.
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

/// Primal stochastic subgradient descent (Pegasos): step 1/(lambda t), the
/// bias carried as a constant-1 feature, iterates projected onto the ball of
/// radius 1/sqrt(lambda). Sampling order is a seeded per-epoch shuffle.
SvmTrainResult TrainSvm(const std::vector<FrameVec>& features,
                        std::span<const int> labels, const SvmConfig& config);

double SvmObjective(const LinearSvm& model, const std::vector<FrameVec>& features,
                    std::span<const int> labels);

double SvmScore(const LinearSvm& model, std::span<const double> frame);
/// sign(score); a zero score counts as an artifact (+1).
int SvmPredict(const LinearSvm& model, std::span<const double> frame);

struct FilterStats {
  std::size_t frames_before = 0;
  std::size_t frames_removed = 0;
  std::size_t bags_before = 0;
  std::size_t bags_dropped = 0;
  // Bags whose surviving planted labels no longer reach the bag label; their
  // planted labels are discarded.
  std::size_t planted_labels_dropped = 0;
  // Mean over input bags of the percentage of frames removed.
  double mean_percent_decrease = 0.0;
};

struct FilterResult {
  Dataset dataset;
  FilterStats stats;
};

/// Removes frames predicted +1, preserving order; bags left empty are
/// dropped. Labels are never changed.
FilterResult FilterDataset(const Dataset& dataset, const LinearSvm& model);

/// Frames and +/-1 labels from bags carrying an artifact mask.
void CollectArtifactFrames(const Dataset& dataset,
                           std::span<const std::size_t> bag_indices,
                           std::vector<FrameVec>& features,
                           std::vector<int>& labels);

double SvmAccuracy(const LinearSvm& model, const std::vector<FrameVec>& features,
                   std::span<const int> labels);

void SaveSvm(const LinearSvm& model, const std::filesystem::path& path);
LinearSvm LoadSvm(const std::filesystem::path& path);
std::string SvmToJson(const LinearSvm& model);
LinearSvm SvmFromJson(const std::string& text);

}  // namespace ordmil
