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
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "scorer.hpp"

namespace ordmil {

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-5;
  double weight_decay = 0.01;
  LossKind loss = LossKind::kBCE;
  // Frames kept per negative (class-0) bag.
  std::size_t k_negative = 1;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::vector<std::size_t> hidden{64, 32};

  void Validate() const;
};

struct Representative {
  std::size_t frame_index = 0;
  double target = 0.0;

  bool operator==(const Representative&) const = default;
};
using Representatives = std::vector<Representative>;

/// forward() on every frame of the bag, in order.
std::vector<double> ScoreBag(const ScorerModel& model, const VideoBag& bag);

/// Index of the largest score; ties go to the lowest index.
std::size_t ArgMax(std::span<const double> scores);

/// Positive bags contribute their argmax frame with target `positive_target`;
/// negative bags contribute their min(K, F) highest-scoring frames with
/// target 0 (ordered by score, ties by lowest index).
Representatives SelectRepresentatives(std::span<const double> scores,
                                      int binary_label, std::size_t k,
                                      double positive_target = 1.0);

struct EpochStat {
  int epoch = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ScorerModel model;
  // Mean per-bag loss of the untrained model, selection included.
  double initial_loss = 0.0;
  std::vector<EpochStat> trace;
  // Frames selected for each input bag during the final epoch.
  std::vector<std::size_t> selected_per_bag;
};

/// Max-aggregation MIL with BCE. Each epoch visits the bags (shuffled when
/// configured), rescoring every frame with the current model; the selected
/// frames' losses are averaged and one Adam step is taken per bag.
TrainResult TrainBinaryMil(const std::vector<LabeledBag>& bags,
                           const TrainConfig& config);

/// Ordinal MIL regression on a linear head. MES-0 bags regress their top-K
/// frames to 0; other bags regress their max frame to the MES value. The loss
/// sees unclipped outputs.
TrainResult TrainRegressionMil(const std::vector<const VideoBag*>& bags,
                               const TrainConfig& config);

struct BinaryPrediction {
  double p_v = 0.0;
  std::size_t frame = 0;
  int label = 0;
};

/// Bag probability is the max frame probability; label = 1 iff p_v >= t.
BinaryPrediction PredictVideoBinary(const ScorerModel& model,
                                    const VideoBag& bag, double threshold);

/// Tab-separated (epoch, mean_loss, wall_time) table with header row.
std::string LossTraceTsv(const std::vector<EpochStat>& trace,
                         bool include_wall_time = true);

/// Gradient check of loss(max-selected frame) over a whole bag: every
/// parameter is perturbed by +/- kFiniteDifferenceStep and the bag is
/// rescored, so the numeric side re-runs the max selection itself.
/// Perturbations that move the argmax or any regime key are skipped.
double MaxBagGradientCheck(const ScorerModel& model,
                           const std::vector<FrameVec>& frames, LossKind kind,
                           double target);

}  // namespace ordmil
