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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ordmil {

/// Number of ordinal severity classes (MES 0..3).
inline constexpr int kNumClasses = 4;

using FrameVec = std::vector<double>;

/// One weakly labeled video. Only `mes` is visible to training; the planted
/// frame labels and artifact mask are synthetic ground truth.
struct VideoBag {
  std::string video_id;
  std::string subject_id;
  int mes = 0;
  std::vector<FrameVec> frames;
  std::optional<std::vector<int>> planted_frame_labels;
  std::optional<std::vector<bool>> artifact_frames;

  std::size_t size() const { return frames.size(); }
  bool operator==(const VideoBag&) const = default;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<VideoBag> bags;

  bool operator==(const Dataset&) const = default;
};

/// Throws Error(kInvalidArgument) naming the first violated invariant.
void ValidateBag(const VideoBag& bag, std::size_t dim);
void ValidateDataset(const Dataset& dataset);

/// Per-class counts of bag labels.
std::array<std::size_t, kNumClasses> ClassHistogram(const Dataset& dataset);

struct SyntheticSpec {
  std::size_t n_videos = 100;
  std::size_t frames_min = 20;
  std::size_t frames_max = 60;
  std::size_t dim = 16;
  std::array<double, kNumClasses> class_mix{167, 220, 492, 1002};
  // Ratio between the weights of consecutive frame severities inside a bag;
  // smaller values make the bag-maximum severity more localized.
  double frame_severity_decay = 0.5;
  double noise_std = 0.5;
  double anchor_separation = 1.0;
  // Fraction of each bag's frames replaced with artifact-cluster frames.
  double artifact_rate = 0.0;
  std::size_t max_videos_per_subject = 4;
  std::uint64_t seed = 1;
};

void ValidateSpec(const SyntheticSpec& spec);

/// Class mean of the synthetic feature model. Anchors lie on a common axis
/// (component 0, spaced by `separation`) plus a class-specific one-hot offset
/// when dim > 4, so severity is linearly recoverable.
FrameVec ClassAnchor(int severity, std::size_t dim, double separation);

/// Artifact cluster mean: mimics maximal severity on the shared axis but is
/// displaced along the last component. Requires dim >= 2.
FrameVec ArtifactAnchor(std::size_t dim, double separation);

/// Deterministic for a fixed seed. Bag classes are allocated by largest
/// remainder so class counts track class_mix as closely as integers allow.
Dataset GenerateSynthetic(const SyntheticSpec& spec);

struct LabeledBag {
  const VideoBag* bag = nullptr;
  int label = 0;
};

/// Ranked binary relabeling: label = 1 iff mes > threshold_class.
std::vector<LabeledBag> RelabelBinary(const Dataset& dataset,
                                      int threshold_class);

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> fold_of_subject;

  int FoldOf(const VideoBag& bag) const;
  /// Indices of bags inside / outside `fold`.
  std::vector<std::size_t> HeldOut(const Dataset& dataset, int fold) const;
  std::vector<std::size_t> Training(const Dataset& dataset, int fold) const;
};

/// Subject-grouped k-fold split. Subjects are visited by descending bag
/// count and placed in the fold holding the fewest bags of the subject's
/// modal class (ties: fewest bags overall, then lowest fold index).
FoldAssignment GroupedKFold(const Dataset& dataset, int k, std::uint64_t seed);

/// Line-delimited JSON: a header record then one bag per line.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset LoadDataset(const std::filesystem::path& path);

std::string DatasetToJsonl(const Dataset& dataset);
Dataset DatasetFromJsonl(const std::string& text);

/// Returns a copy holding only the bags at `indices`, in that order.
Dataset Subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace ordmil
