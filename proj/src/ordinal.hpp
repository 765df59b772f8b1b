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

#include <array>
#include <span>
#include <vector>

#include "dataset.hpp"
#include "mil.hpp"
#include "scorer.hpp"

namespace ordmil {

inline constexpr int kEnsembleSize = kNumClasses - 1;

/// Ranked binary ensemble: members[m] scores P(severity > m).
struct EnsembleModel {
  std::array<ScorerModel, kEnsembleSize> members;
  std::array<std::size_t, kEnsembleSize> k_values{};
};

struct EnsembleTrainResult {
  EnsembleModel model;
  std::array<TrainResult, kEnsembleSize> members;
};

/// Trains each member on RelabelBinary(dataset, m) independently.
EnsembleTrainResult TrainEnsemble(
    const Dataset& dataset, const std::array<TrainConfig, kEnsembleSize>& configs);

struct FrameTriple {
  double p_gt0 = 0.0;
  double p_gt1 = 0.0;
  double p_gt2 = 0.0;

  double operator[](int m) const { return m == 0 ? p_gt0 : m == 1 ? p_gt1 : p_gt2; }
  bool operator==(const FrameTriple&) const = default;
};

/// One threshold per ranked classifier; no ordering between them.
struct BinaryThresholds {
  double t1 = 0.5;
  double t2 = 0.5;
  double t3 = 0.5;

  double operator[](int m) const { return m == 0 ? t1 : m == 1 ? t2 : t3; }
  bool operator==(const BinaryThresholds&) const = default;
};

/// Cut points over [0, 3] with 0 < t0 < t1 < t2 < 3.
struct OrdinalThresholds {
  double t0 = 0.5;
  double t1 = 1.5;
  double t2 = 2.5;

  void Validate() const;
  bool operator==(const OrdinalThresholds&) const = default;
};

std::vector<FrameTriple> ScoreBagTriples(const EnsembleModel& model,
                                         const VideoBag& bag);

struct ConvertResult {
  int label = 0;
  std::array<double, kNumClasses> probs{};
};

/// Difference-to-multiclass conversion, then argmax (lowest class on ties).
/// Entries may be negative when the triple is not monotone.
ConvertResult AggregateConvert(const FrameTriple& triple);

/// Sum of the per-classifier decisions p_gt{m} >= t_{m+1}.
int AggregateThreshold(const FrameTriple& triple, const BinaryThresholds& bt);

/// Continuous severity p_gt0 + p_gt1 + p_gt2 in [0, 3].
double AggregateSum(const FrameTriple& triple);

/// Half-open bins: [.., t0) -> 0, [t0, t1) -> 1, [t1, t2) -> 2, [t2, ..) -> 3.
int BinOrdinal(double score, const OrdinalThresholds& ot);

/// Maximum frame class.
int VideoClass(std::span<const int> frame_classes);

struct RegressionPrediction {
  double s_v = 0.0;
  int label = 0;
};

/// s_v = ClipScore(max unclipped frame score), then binned.
RegressionPrediction PredictVideoRegression(const ScorerModel& model,
                                            const VideoBag& bag,
                                            const OrdinalThresholds& ot);

// -- threshold search -------------------------------------------------------

inline constexpr double kDefaultGridStep = 0.01;

/// Grid points k * step for k = 0..round(span/step). Rejects steps that do
/// not divide `span`.
std::vector<double> GridValues(double step, double span);

struct BinaryGridResult {
  BinaryThresholds thresholds;
  double kappa = 0.0;
};

struct OrdinalGridResult {
  OrdinalThresholds thresholds;
  double kappa = 0.0;
};

/// Exhaustive search over the [0,1]^3 grid maximizing video-level quadratic
/// weighted kappa of the Threshold method. Ties resolve to the
/// lexicographically smallest (t1, t2, t3). Uses the cached triples only.
BinaryGridResult GridSearchBinaryThresholds(
    const std::vector<std::vector<FrameTriple>>& bag_triples,
    std::span<const int> video_labels, double step = kDefaultGridStep);

/// Exhaustive search over ordered interior grid triples t0 < t1 < t2 of
/// (0, 3), binning each bag's max frame score. Lexicographic tie-break.
OrdinalGridResult GridSearchOrdinalThresholds(
    const std::vector<std::vector<double>>& bag_scores,
    std::span<const int> video_labels, double step = kDefaultGridStep);

/// Video-level kappa of the Threshold method for one threshold triple.
double ThresholdMethodKappa(const std::vector<std::vector<FrameTriple>>& bag_triples,
                            std::span<const int> video_labels,
                            const BinaryThresholds& bt);

}  // namespace ordmil
