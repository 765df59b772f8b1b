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

namespace ordmil {

/// Square count table, rows = truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  static ConfusionMatrix FromLabels(std::span<const int> truth,
                                    std::span<const int> pred, int classes);

  int classes() const { return classes_; }
  std::uint64_t at(int truth, int pred) const;
  void Add(int truth, int pred, std::uint64_t n = 1);
  void Merge(const ConfusionMatrix& other);
  std::uint64_t total() const;
  bool IsDiagonal() const;
  std::span<const std::uint64_t> counts() const { return counts_; }

  /// Tab-separated table with a header row of predicted classes.
  std::string ToTsv() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counted 1/2.
/// Rejects inputs missing either class.
double RocAuc(std::span<const double> scores, std::span<const int> labels);

/// Quadratic weighted Cohen's kappa, weights (i-j)^2/(M-1)^2 and expected
/// counts from the marginal products. Returns exactly 1 when the observed
/// weighted disagreement is zero. Throws ErrorKind::kUndefined when expected
/// disagreement is zero but observed is not.
double CohenKappaQuadratic(const ConfusionMatrix& cm);
/// Same statistic over a row-major classes x classes count table.
double CohenKappaQuadratic(std::span<const std::uint64_t> counts, int classes);
double CohenKappaQuadratic(std::span<const int> truth,
                           std::span<const int> pred, int classes);

/// items x raters table of category indices in [0, categories).
struct RatingTable {
  std::size_t items = 0;
  std::size_t raters = 0;
  int categories = 4;
  std::vector<int> ratings;  // row-major, items x raters

  int at(std::size_t item, std::size_t rater) const {
    return ratings[item * raters + rater];
  }
};

/// Unweighted Fleiss kappa. A table in which every rating falls in a single
/// category has no chance-corrected scale; it is reported as 1.
double FleissKappa(const RatingTable& table);

struct FoldCi {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline constexpr double kNormalZ95 = 1.96;

/// Normal approximation over fold values: mean +/- z * sd / sqrt(n), with
/// the sample (n-1) standard deviation. Needs at least two values.
FoldCi FoldConfidenceInterval(std::span<const double> values,
                              double z = kNormalZ95);

/// A frame cannot be more severe than its video.
int AdjustFrameLabel(int frame_label, int video_label);

/// Modal rating; ties resolve to the lower class.
int MajorityConsensus(std::span<const int> ratings);

}  // namespace ordmil
