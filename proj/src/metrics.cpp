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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "common.hpp"

namespace ordmil {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes),
      counts_(static_cast<std::size_t>(classes) * classes, 0) {
  Require(classes >= 2, "confusion matrix needs at least 2 classes");
}

ConfusionMatrix ConfusionMatrix::FromLabels(std::span<const int> truth,
                                            std::span<const int> pred,
                                            int classes) {
  Require(truth.size() == pred.size(), "truth/prediction length mismatch",
          ErrorKind::kShapeMismatch);
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.Add(truth[i], pred[i]);
  return cm;
}

std::uint64_t ConfusionMatrix::at(int truth, int pred) const {
  return counts_[static_cast<std::size_t>(truth) * classes_ + pred];
}

void ConfusionMatrix::Add(int truth, int pred, std::uint64_t n) {
  Require(truth >= 0 && truth < classes_ && pred >= 0 && pred < classes_,
          "label outside confusion matrix range");
  counts_[static_cast<std::size_t>(truth) * classes_ + pred] += n;
}

void ConfusionMatrix::Merge(const ConfusionMatrix& other) {
  Require(other.classes_ == classes_, "confusion matrix size mismatch",
          ErrorKind::kShapeMismatch);
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

bool ConfusionMatrix::IsDiagonal() const {
  for (int i = 0; i < classes_; ++i)
    for (int j = 0; j < classes_; ++j)
      if (i != j && at(i, j) != 0) return false;
  return true;
}

std::string ConfusionMatrix::ToTsv() const {
  std::string out = "truth\\pred";
  for (int j = 0; j < classes_; ++j) out += "\t" + std::to_string(j);
  out += "\n";
  for (int i = 0; i < classes_; ++i) {
    out += std::to_string(i);
    for (int j = 0; j < classes_; ++j) out += "\t" + std::to_string(at(i, j));
    out += "\n";
  }
  return out;
}

double RocAuc(std::span<const double> scores, std::span<const int> labels) {
  Require(scores.size() == labels.size(), "scores/labels length mismatch",
          ErrorKind::kShapeMismatch);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      const int y = labels[order[k]];
      Require(y == 0 || y == 1, "AUC labels must be 0 or 1");
      if (y == 1) {
        positive_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    Fail(ErrorKind::kUndefined, "AUC is undefined unless both classes are present");
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) /
         (np * static_cast<double>(n_neg));
}

double CohenKappaQuadratic(std::span<const std::uint64_t> counts, int m) {
  Require(m >= 2 && counts.size() == static_cast<std::size_t>(m) * m,
          "kappa count table must be classes x classes", ErrorKind::kShapeMismatch);
  auto at = [&](int i, int j) {
    return static_cast<double>(counts[static_cast<std::size_t>(i) * m + j]);
  };
  double rows[16] = {}, cols[16] = {};
  std::vector<double> rows_heap, cols_heap;
  double* r = rows;
  double* c = cols;
  if (m > 16) {
    rows_heap.assign(m, 0.0);
    cols_heap.assign(m, 0.0);
    r = rows_heap.data();
    c = cols_heap.data();
  }
  double n = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      r[i] += at(i, j);
      c[j] += at(i, j);
      n += at(i, j);
    }
  Require(n > 0.0, "kappa of an empty confusion matrix");
  const double scale = static_cast<double>((m - 1) * (m - 1));
  double observed = 0.0, expected = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double w = static_cast<double>((i - j) * (i - j)) / scale;
      observed += w * at(i, j);
      expected += w * r[i] * c[j] / n;
    }
  if (observed == 0.0) return 1.0;
  if (expected == 0.0)
    Fail(ErrorKind::kUndefined,
         "weighted kappa undefined: no expected disagreement but observed > 0");
  return 1.0 - observed / expected;
}

double CohenKappaQuadratic(const ConfusionMatrix& cm) {
  return CohenKappaQuadratic(cm.counts(), cm.classes());
}

double CohenKappaQuadratic(std::span<const int> truth,
                           std::span<const int> pred, int classes) {
  return CohenKappaQuadratic(ConfusionMatrix::FromLabels(truth, pred, classes));
}

double FleissKappa(const RatingTable& table) {
  Require(table.raters >= 2, "Fleiss kappa needs at least 2 raters");
  Require(table.items >= 1, "Fleiss kappa needs at least 1 item");
  Require(table.categories >= 1, "Fleiss kappa needs at least 1 category");
  Require(table.ratings.size() == table.items * table.raters,
          "rating table is incomplete", ErrorKind::kShapeMismatch);

  const int k = table.categories;
  const double r = static_cast<double>(table.raters);
  std::vector<double> category_totals(k, 0.0);
  std::vector<int> counts(k);
  double agreement_sum = 0.0;
  for (std::size_t i = 0; i < table.items; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < table.raters; ++j) {
      const int c = table.at(i, j);
      Require(c >= 0 && c < k, "rating outside category range");
      ++counts[c];
    }
    double sq = 0.0;
    for (int c = 0; c < k; ++c) {
      sq += static_cast<double>(counts[c]) * counts[c];
      category_totals[c] += counts[c];
    }
    agreement_sum += (sq - r) / (r * (r - 1.0));
  }
  const double n = static_cast<double>(table.items);
  const double p_bar = agreement_sum / n;
  double p_e = 0.0;
  for (double t : category_totals) {
    const double p = t / (n * r);
    p_e += p * p;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

FoldCi FoldConfidenceInterval(std::span<const double> values, double z) {
  Require(values.size() >= 2, "confidence interval needs at least 2 values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double half = z * sd / std::sqrt(n);
  return {mean, mean - half, mean + half};
}

int AdjustFrameLabel(int frame_label, int video_label) {
  Require(frame_label >= 0 && frame_label < 4 && video_label >= 0 && video_label < 4,
          "severity labels must lie in 0..3");
  return std::min(frame_label, video_label);
}

int MajorityConsensus(std::span<const int> ratings) {
  Require(!ratings.empty(), "consensus of no ratings");
  std::map<int, int> counts;
  for (int r : ratings) {
    Require(r >= 0 && r < 4, "severity labels must lie in 0..3");
    ++counts[r];
  }
  int best = counts.begin()->first;
  int best_count = counts.begin()->second;
  for (const auto& [label, count] : counts)
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

}  // namespace ordmil
