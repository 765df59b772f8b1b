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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "doctest.h"
#include "metrics.hpp"
#include "mil.hpp"
#include "oracles.hpp"

using namespace ordmil;

TEST_CASE("representative selection matches a full sort") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> s(1 + rng.Below(30));
    for (double& v : s) v = std::floor(rng.Uniform() * 5.0);  // many ties
    const std::size_t k = 1 + rng.Below(40);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    const Representatives neg = SelectRepresentatives(s, 0, k);
    REQUIRE(neg.size() == std::min(k, s.size()));
    for (std::size_t i = 0; i < neg.size(); ++i) {
      CHECK(neg[i].frame_index == order[i]);
      CHECK(neg[i].target == 0.0);
    }
    const Representatives pos = SelectRepresentatives(s, 1, k, 2.0);
    REQUIRE(pos.size() == 1);
    CHECK(pos[0].frame_index == order[0]);
    CHECK(pos[0].target == 2.0);
  }
  const std::vector<double> tie{0.5, 0.9, 0.9};
  CHECK(ArgMax(tie) == 1);
  const std::vector<double> empty;
  CHECK_THROWS_AS(ArgMax(empty), Error);
}

TEST_CASE("gradient through the max matches central differences") {
  Rng rng(2);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const bool bce = trial % 2 == 0;
    const ScorerModel m =
        CreateScorer({4, 6, 3, 1}, bce ? Head::kSigmoid : Head::kLinear, 50 + trial);
    std::vector<FrameVec> frames(3 + rng.Below(5), FrameVec(4));
    for (auto& f : frames)
      for (double& v : f) v = rng.Normal();
    const double target = bce ? 1.0 : 2.0;
    const LossKind kind = bce ? LossKind::kBCE : LossKind::kMAE;

    std::vector<double> scores;
    for (const auto& f : frames) scores.push_back(oracle::Score(m, f));
    const std::size_t arg =
        std::max_element(scores.begin(), scores.end()) - scores.begin();
    const Gradients g =
        Backward(m, frames[arg], LossAndGrad(kind, scores[arg], target).grad);

    auto bag_loss = [&](const ScorerModel& mm, std::size_t* which, std::vector<int>* signs) {
      double best = -1e300;
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const double s = oracle::Score(mm, frames[i]);
        if (s > best) {
          best = s;
          *which = i;
        }
      }
      *signs = oracle::Forward(mm, frames[*which]).signs;
      return bce ? oracle::Bce(best, target) : oracle::Mae(best, target);
    };
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t li = 0; li < m.layers.size(); ++li)
      for (std::size_t k = 0; k < m.layers[li].weights.size(); ++k) {
        ScorerModel p = m, q = m;
        p.layers[li].weights[k] += h;
        q.layers[li].weights[k] -= h;
        std::size_t wp, wq;
        std::vector<int> sp, sq;
        const double lp = bag_loss(p, &wp, &sp), lq = bag_loss(q, &wq, &sq);
        if (wp != arg || wq != arg || sp != sq) continue;
        if (!bce && ((oracle::Score(p, frames[arg]) > target) !=
                     (oracle::Score(q, frames[arg]) > target)))
          continue;
        const double num = (lp - lq) / (2 * h);
        const double ana = g.layers[li].weights[k];
        worst = std::max(worst, std::fabs(ana - num) /
                                    std::max({std::fabs(ana), std::fabs(num), 1e-6}));
      }
    CHECK(worst < 1e-4);
    CHECK(MaxBagGradientCheck(m, frames, kind, target) < 1e-4);
    ++checked;
  }
  CHECK(checked == 40);
}

namespace {

Dataset Toy(std::uint64_t seed, std::size_t n = 80) {
  SyntheticSpec s;
  s.n_videos = n;
  s.frames_min = 6;
  s.frames_max = 14;
  s.dim = 8;
  s.noise_std = 0.4;
  s.anchor_separation = 1.5;
  s.seed = seed;
  return GenerateSynthetic(s);
}

TrainConfig Quick(std::size_t k) {
  TrainConfig c;
  c.epochs = 15;
  c.lr = 2e-3;
  c.k_negative = k;
  c.hidden = {16, 8};
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("binary training reduces loss and ranks bags") {
  const Dataset d = Toy(1);
  const auto bags = RelabelBinary(d, 1);
  const TrainResult r = TrainBinaryMil(bags, Quick(5));
  REQUIRE(r.trace.size() == 15);
  CHECK(r.trace.back().mean_loss < r.initial_loss);
  std::vector<double> pv;
  std::vector<int> y;
  for (const LabeledBag& b : bags) {
    pv.push_back(PredictVideoBinary(r.model, *b.bag, 0.5).p_v);
    y.push_back(b.label);
  }
  CHECK(RocAuc(pv, y) > 0.9);
}

TEST_CASE("training bookkeeping counts min(K, F) negatives") {
  const Dataset d = Toy(2, 30);
  for (std::size_t k : {1, 3, 10, 100}) {
    TrainConfig c = Quick(k);
    c.epochs = 1;
    const auto bags = RelabelBinary(d, 0);
    const TrainResult r = TrainBinaryMil(bags, c);
    REQUIRE(r.selected_per_bag.size() == bags.size());
    for (std::size_t i = 0; i < bags.size(); ++i)
      CHECK(r.selected_per_bag[i] ==
            (bags[i].label == 0 ? std::min(k, bags[i].bag->size()) : 1));
  }
}

TEST_CASE("training is deterministic per seed") {
  const Dataset d = Toy(3, 40);
  const auto bags = RelabelBinary(d, 0);
  const TrainResult a = TrainBinaryMil(bags, Quick(2));
  const TrainResult b = TrainBinaryMil(bags, Quick(2));
  CHECK(a.model == b.model);
  CHECK(LossTraceTsv(a.trace, false) == LossTraceTsv(b.trace, false));
  TrainConfig other = Quick(2);
  other.seed = 5;
  CHECK_FALSE(TrainBinaryMil(bags, other).model == a.model);
}

TEST_CASE("regression training fits severities") {
  const Dataset d = Toy(4);
  std::vector<const VideoBag*> bags;
  for (const VideoBag& b : d.bags) bags.push_back(&b);
  TrainConfig c = Quick(3);
  c.loss = LossKind::kMAE;
  c.epochs = 25;
  const TrainResult r = TrainRegressionMil(bags, c);
  CHECK(r.model.head == Head::kLinear);
  CHECK(r.trace.back().mean_loss < r.initial_loss);
  double err = 0.0;
  for (const VideoBag& b : d.bags) {
    const auto s = ScoreBag(r.model, b);
    err += std::fabs(ClipScore(*std::max_element(s.begin(), s.end())) - b.mes);
  }
  CHECK(err / d.bags.size() < 0.5);
}

TEST_CASE("training rejects mismatched losses and bad configs") {
  const Dataset d = Toy(5, 20);
  std::vector<const VideoBag*> bags;
  for (const VideoBag& b : d.bags) bags.push_back(&b);
  TrainConfig c = Quick(1);
  c.loss = LossKind::kBCE;
  CHECK_THROWS_AS(TrainRegressionMil(bags, c), Error);
  c.loss = LossKind::kMAE;
  CHECK_THROWS_AS(TrainBinaryMil(RelabelBinary(d, 0), c), Error);
  TrainConfig bad = Quick(0);
  CHECK_THROWS_AS(bad.Validate(), Error);
  bad = Quick(1);
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.Validate(), Error);
  CHECK_THROWS_AS(TrainBinaryMil({}, Quick(1)), Error);
}

TEST_CASE("video prediction uses the max frame regardless of K") {
  ScorerModel m = ZeroScorer({1, 1}, Head::kSigmoid);
  m.layers[0].weights = {1.0};
  VideoBag bag{"V1", "S1", 1, {{-2.0}, {0.5}, {0.1}}, {}, {}};
  const BinaryPrediction p = PredictVideoBinary(m, bag, 0.6);
  CHECK(p.frame == 1);
  CHECK(p.p_v == doctest::Approx(oracle::Sigmoid(0.5)));
  CHECK(p.label == 1);
  CHECK(PredictVideoBinary(m, bag, 0.7).label == 0);
}

TEST_CASE("loss trace table layout") {
  std::vector<EpochStat> t{{1, 0.5, 0.25}, {2, 0.125, 0.5}};
  CHECK(LossTraceTsv(t, false) == "epoch\tmean_loss\n1\t0.5\n2\t0.125\n");
  CHECK(LossTraceTsv(t).rfind("epoch\tmean_loss\twall_time\n", 0) == 0);
}
