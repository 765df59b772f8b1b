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

#include "ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "common.hpp"
#include "metrics.hpp"
#include "parallel.hpp"

namespace ordmil {

void OrdinalThresholds::Validate() const {
  Require(0.0 < t0 && t0 < t1 && t1 < t2 && t2 < 3.0,
          "ordinal thresholds must satisfy 0 < t0 < t1 < t2 < 3");
}

EnsembleTrainResult TrainEnsemble(
    const Dataset& dataset, const std::array<TrainConfig, kEnsembleSize>& configs) {
  for (const TrainConfig& c : configs) c.Validate();
  EnsembleTrainResult out;
  std::array<TrainResult, kEnsembleSize> results;
  ParallelFor(kEnsembleSize, [&](std::size_t m) {
    results[m] = TrainBinaryMil(RelabelBinary(dataset, static_cast<int>(m)),
                                configs[m]);
  });
  for (int m = 0; m < kEnsembleSize; ++m) {
    out.model.members[m] = results[m].model;
    out.model.k_values[m] = configs[m].k_negative;
  }
  out.members = std::move(results);
  return out;
}

std::vector<FrameTriple> ScoreBagTriples(const EnsembleModel& model,
                                         const VideoBag& bag) {
  Require(!bag.frames.empty(), "cannot score an empty bag");
  std::vector<FrameTriple> out;
  out.reserve(bag.frames.size());
  for (const FrameVec& f : bag.frames)
    out.push_back({Forward(model.members[0], f), Forward(model.members[1], f),
                   Forward(model.members[2], f)});
  return out;
}

ConvertResult AggregateConvert(const FrameTriple& t) {
  ConvertResult r;
  r.probs = {1.0 - t.p_gt0, t.p_gt0 - t.p_gt1, t.p_gt1 - t.p_gt2, t.p_gt2};
  r.label = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (r.probs[c] > r.probs[r.label]) r.label = c;
  return r;
}

int AggregateThreshold(const FrameTriple& t, const BinaryThresholds& bt) {
  return (t.p_gt0 >= bt.t1 ? 1 : 0) + (t.p_gt1 >= bt.t2 ? 1 : 0) +
         (t.p_gt2 >= bt.t3 ? 1 : 0);
}

double AggregateSum(const FrameTriple& t) { return t.p_gt0 + t.p_gt1 + t.p_gt2; }

int BinOrdinal(double score, const OrdinalThresholds& ot) {
  ot.Validate();
  if (score < ot.t0) return 0;
  if (score < ot.t1) return 1;
  if (score < ot.t2) return 2;
  return 3;
}

int VideoClass(std::span<const int> frame_classes) {
  Require(!frame_classes.empty(), "video class of an empty frame list");
  return *std::max_element(frame_classes.begin(), frame_classes.end());
}

RegressionPrediction PredictVideoRegression(const ScorerModel& model,
                                            const VideoBag& bag,
                                            const OrdinalThresholds& ot) {
  Require(model.head == Head::kLinear, "regression prediction needs a linear head");
  const std::vector<double> scores = ScoreBag(model, bag);
  RegressionPrediction p;
  p.s_v = ClipScore(*std::max_element(scores.begin(), scores.end()));
  p.label = BinOrdinal(p.s_v, ot);
  return p;
}

std::vector<double> GridValues(double step, double span) {
  Require(std::isfinite(step) && step > 0.0 && step <= span,
          "grid step must be in (0, " + std::to_string(span) + "]");
  const double ratio = span / step;
  const long long n = std::llround(ratio);
  Require(n >= 1 && std::abs(ratio - static_cast<double>(n)) <= 1e-9 * ratio,
          "grid step " + std::to_string(step) + " does not divide " +
              std::to_string(span));
  std::vector<double> v(static_cast<std::size_t>(n) + 1);
  for (long long k = 0; k <= n; ++k)
    v[k] = static_cast<double>(k) * span / static_cast<double>(n);
  return v;
}

namespace {

// Count of grid values <= p, minus one: p >= grid[k] iff k <= GridIndex(p).
int GridIndex(const std::vector<double>& grid, double p) {
  return static_cast<int>(std::upper_bound(grid.begin(), grid.end(), p) -
                          grid.begin()) - 1;
}

using IndexTriple = std::array<int, kEnsembleSize>;

// Frames whose grid-index triple is dominated by another frame never decide
// the video class, so only the Pareto-maximal ones are kept.
std::vector<IndexTriple> ParetoFront(std::vector<IndexTriple> pts) {
  std::sort(pts.begin(), pts.end(), std::greater<>());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<IndexTriple> front;
  for (const IndexTriple& p : pts) {
    bool dominated = false;
    for (const IndexTriple& q : front)
      if (q[0] >= p[0] && q[1] >= p[1] && q[2] >= p[2]) {
        dominated = true;
        break;
      }
    if (!dominated) front.push_back(p);
  }
  return front;
}

using Counts = std::array<std::uint64_t, kNumClasses * kNumClasses>;

// Quadratic kappa as the exact fraction 1 - a/b, so that equal kappas from
// different tables compare equal and ties resolve by grid order alone.
struct KappaKey {
  unsigned __int128 a = 0;
  unsigned __int128 b = 1;
};

KappaKey ExactKappa(const Counts& counts) {
  std::array<std::uint64_t, kNumClasses> r{}, c{};
  std::uint64_t n = 0;
  for (int i = 0; i < kNumClasses; ++i)
    for (int j = 0; j < kNumClasses; ++j) {
      const std::uint64_t x = counts[i * kNumClasses + j];
      r[i] += x;
      c[j] += x;
      n += x;
    }
  unsigned __int128 observed = 0, expected = 0;
  for (int i = 0; i < kNumClasses; ++i)
    for (int j = 0; j < kNumClasses; ++j) {
      const unsigned w = static_cast<unsigned>((i - j) * (i - j));
      observed += static_cast<unsigned __int128>(w) * counts[i * kNumClasses + j];
      expected += static_cast<unsigned __int128>(w) * r[i] * c[j];
    }
  if (observed == 0) return {0, 1};
  return {observed * n, expected};
}

// True when kappa(x) > kappa(y).
bool Higher(const KappaKey& x, const KappaKey& y) { return x.a * y.b < y.a * x.b; }

void CheckLabels(std::size_t n_bags, std::span<const int> labels) {
  Require(n_bags > 0, "threshold search needs a non-empty evaluation set");
  Require(n_bags == labels.size(), "bag/label count mismatch",
          ErrorKind::kShapeMismatch);
  for (int y : labels) Require(y >= 0 && y < kNumClasses, "video label outside 0..3");
}

}  // namespace

double ThresholdMethodKappa(const std::vector<std::vector<FrameTriple>>& bag_triples,
                            std::span<const int> video_labels,
                            const BinaryThresholds& bt) {
  CheckLabels(bag_triples.size(), video_labels);
  ConfusionMatrix cm(kNumClasses);
  for (std::size_t b = 0; b < bag_triples.size(); ++b) {
    Require(!bag_triples[b].empty(), "empty bag in evaluation set");
    int cls = 0;
    for (const FrameTriple& t : bag_triples[b])
      cls = std::max(cls, AggregateThreshold(t, bt));
    cm.Add(video_labels[b], cls);
  }
  return CohenKappaQuadratic(cm);
}

BinaryGridResult GridSearchBinaryThresholds(
    const std::vector<std::vector<FrameTriple>>& bag_triples,
    std::span<const int> video_labels, double step) {
  CheckLabels(bag_triples.size(), video_labels);
  const std::vector<double> grid = GridValues(step, 1.0);
  const int n = static_cast<int>(grid.size());

  std::vector<std::vector<IndexTriple>> fronts;
  fronts.reserve(bag_triples.size());
  for (const auto& frames : bag_triples) {
    Require(!frames.empty(), "empty bag in evaluation set");
    std::vector<IndexTriple> pts;
    pts.reserve(frames.size());
    for (const FrameTriple& t : frames)
      pts.push_back({GridIndex(grid, t.p_gt0), GridIndex(grid, t.p_gt1),
                     GridIndex(grid, t.p_gt2)});
    fronts.push_back(ParetoFront(std::move(pts)));
  }

  struct Best {
    bool set = false;
    KappaKey key;
    Counts counts{};
    IndexTriple at{};
  };
  std::vector<Best> per_outer(n);
  ParallelFor(static_cast<std::size_t>(n), [&](std::size_t oi) {
    const int i = static_cast<int>(oi);
    Best best;
    Counts counts;
    for (int j = 0; j < n; ++j) {
      for (int l = 0; l < n; ++l) {
        counts.fill(0);
        for (std::size_t b = 0; b < fronts.size(); ++b) {
          int cls = 0;
          for (const IndexTriple& p : fronts[b]) {
            const int c = (p[0] >= i) + (p[1] >= j) + (p[2] >= l);
            if (c > cls) cls = c;
            if (cls == kNumClasses - 1) break;
          }
          ++counts[video_labels[b] * kNumClasses + cls];
        }
        const KappaKey key = ExactKappa(counts);
        if (!best.set || Higher(key, best.key)) best = {true, key, counts, {i, j, l}};
      }
    }
    per_outer[oi] = best;
  });

  Best best;
  for (const Best& b : per_outer)
    if (b.set && (!best.set || Higher(b.key, best.key))) best = b;
  const double kappa = CohenKappaQuadratic(best.counts, kNumClasses);
  return {{grid[best.at[0]], grid[best.at[1]], grid[best.at[2]]}, kappa};
}

OrdinalGridResult GridSearchOrdinalThresholds(
    const std::vector<std::vector<double>>& bag_scores,
    std::span<const int> video_labels, double step) {
  CheckLabels(bag_scores.size(), video_labels);
  const std::vector<double> grid = GridValues(step, 3.0);
  const int n = static_cast<int>(grid.size()) - 1;
  Require(n >= 4, "ordinal grid needs at least three interior points");

  // Binning is monotone, so the max frame class is the class of the max
  // frame score.
  std::vector<double> video_score;
  video_score.reserve(bag_scores.size());
  for (const auto& s : bag_scores) {
    Require(!s.empty(), "empty bag in evaluation set");
    video_score.push_back(*std::max_element(s.begin(), s.end()));
  }

  // below[k][y]: bags of label y scoring strictly below grid[k].
  std::vector<std::array<std::uint64_t, kNumClasses>> below(n + 1);
  std::array<std::uint64_t, kNumClasses> totals{};
  for (std::size_t b = 0; b < video_score.size(); ++b) ++totals[video_labels[b]];
  for (int k = 0; k <= n; ++k) {
    below[k].fill(0);
    for (std::size_t b = 0; b < video_score.size(); ++b)
      if (video_score[b] < grid[k]) ++below[k][video_labels[b]];
  }

  struct Best {
    bool set = false;
    KappaKey key;
    Counts counts{};
    std::array<int, 3> at{};
  };
  std::vector<Best> per_outer(n - 1);
  ParallelFor(static_cast<std::size_t>(n - 1), [&](std::size_t oi) {
    const int a = static_cast<int>(oi) + 1;
    Best best;
    Counts counts;
    for (int b = a + 1; b < n; ++b) {
      for (int c = b + 1; c < n; ++c) {
        for (int y = 0; y < kNumClasses; ++y) {
          std::uint64_t* row = &counts[y * kNumClasses];
          row[0] = below[a][y];
          row[1] = below[b][y] - below[a][y];
          row[2] = below[c][y] - below[b][y];
          row[3] = totals[y] - below[c][y];
        }
        const KappaKey key = ExactKappa(counts);
        if (!best.set || Higher(key, best.key)) best = {true, key, counts, {a, b, c}};
      }
    }
    per_outer[oi] = best;
  });

  Best best;
  for (const Best& b : per_outer)
    if (b.set && (!best.set || Higher(b.key, best.key))) best = b;
  Require(best.set, "ordinal grid too coarse for three thresholds");
  const double kappa = CohenKappaQuadratic(best.counts, kNumClasses);
  return {{grid[best.at[0]], grid[best.at[1]], grid[best.at[2]]}, kappa};
}

}  // namespace ordmil
