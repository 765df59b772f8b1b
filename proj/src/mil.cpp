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

#include "mil.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "common.hpp"

namespace ordmil {

void TrainConfig::Validate() const {
  Require(epochs >= 1, "epochs must be >= 1");
  Require(k_negative >= 1, "k_negative must be >= 1");
  Require(std::isfinite(lr) && lr > 0.0, "lr must be > 0");
  Require(std::isfinite(weight_decay) && weight_decay >= 0.0,
          "weight_decay must be >= 0");
  for (std::size_t h : hidden) Require(h >= 1, "hidden sizes must be >= 1");
}

std::vector<double> ScoreBag(const ScorerModel& model, const VideoBag& bag) {
  Require(!bag.frames.empty(), "cannot score an empty bag");
  std::vector<double> scores;
  scores.reserve(bag.frames.size());
  for (const FrameVec& f : bag.frames) scores.push_back(Forward(model, f));
  return scores;
}

std::size_t ArgMax(std::span<const double> scores) {
  Require(!scores.empty(), "argmax of empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

Representatives SelectRepresentatives(std::span<const double> scores,
                                      int binary_label, std::size_t k,
                                      double positive_target) {
  Require(!scores.empty(), "cannot select representatives of an empty bag");
  if (binary_label != 0) return {{ArgMax(scores), positive_target}};
  Require(k >= 1, "K must be >= 1");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(k, scores.size());
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  Representatives reps;
  reps.reserve(take);
  for (std::size_t i = 0; i < take; ++i) reps.push_back({order[i], 0.0});
  return reps;
}

namespace {

struct MilItem {
  const VideoBag* bag;
  int binary_label;  // 0 selects top-K
  double positive_target;
};

// Per-bag objective under the current model. Selection runs on raw outputs;
// the sigmoid is monotone so the order matches forward() scores.
double BagLossAndGrad(const ScorerModel& model, const MilItem& item,
                      const TrainConfig& config, Gradients* grads,
                      std::size_t* selected) {
  const VideoBag& bag = *item.bag;
  std::vector<double> raw;
  raw.reserve(bag.frames.size());
  for (const FrameVec& f : bag.frames) raw.push_back(ForwardRaw(model, f));
  const Representatives reps = SelectRepresentatives(
      raw, item.binary_label, config.k_negative, item.positive_target);
  const double inv = 1.0 / static_cast<double>(reps.size());
  double loss = 0.0;
  for (const Representative& r : reps) {
    const LossGrad lg =
        RawLossAndGrad(model.head, config.loss, raw[r.frame_index], r.target);
    loss += lg.loss * inv;
    if (grads)
      AccumulateRawBackward(model, bag.frames[r.frame_index], lg.grad * inv,
                            *grads);
  }
  if (selected) *selected = reps.size();
  return loss;
}

TrainResult TrainMil(const std::vector<MilItem>& items, Head head,
                     const TrainConfig& config) {
  config.Validate();
  Require(!items.empty(), "no training bags");
  Require(LossMatchesHead(config.loss, head),
          "loss " + ToString(config.loss) + " is not valid for a " +
              ToString(head) + " head");
  const std::size_t dim = items.front().bag->frames.front().size();
  for (const MilItem& it : items) {
    Require(!it.bag->frames.empty(), "training bag '" + it.bag->video_id + "' is empty");
    Require(it.bag->frames.front().size() == dim, "inconsistent frame dimension",
            ErrorKind::kShapeMismatch);
  }

  std::vector<std::size_t> dims{dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);

  TrainResult result;
  result.model = CreateScorer(dims, head, MixSeed(config.seed, 0));
  Rng order_rng(MixSeed(config.seed, 1));

  AdamConfig adam;
  adam.lr = config.lr;
  adam.weight_decay = config.weight_decay;
  AdamState state = AdamState::For(result.model, adam);

  double initial = 0.0;
  for (const MilItem& it : items)
    initial += BagLossAndGrad(result.model, it, config, nullptr, nullptr);
  result.initial_loss = initial / static_cast<double>(items.size());

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  result.selected_per_bag.assign(items.size(), 0);
  Gradients grads = Gradients::ZerosLike(result.model);

  const auto start = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) order_rng.Shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      grads.Scale(0.0);
      total += BagLossAndGrad(result.model, items[idx], config, &grads,
                              &result.selected_per_bag[idx]);
      AdamStep(result.model, grads, state);
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    result.trace.push_back(
        {epoch, total / static_cast<double>(items.size()), elapsed.count()});
  }
  return result;
}

}  // namespace

TrainResult TrainBinaryMil(const std::vector<LabeledBag>& bags,
                           const TrainConfig& config) {
  std::vector<MilItem> items;
  items.reserve(bags.size());
  for (const LabeledBag& lb : bags) {
    Require(lb.label == 0 || lb.label == 1,
            "binary MIL labels must be 0 or 1, got " + std::to_string(lb.label));
    items.push_back({lb.bag, lb.label, 1.0});
  }
  Require(config.loss == LossKind::kBCE, "binary MIL trains with BCE");
  return TrainMil(items, Head::kSigmoid, config);
}

TrainResult TrainRegressionMil(const std::vector<const VideoBag*>& bags,
                               const TrainConfig& config) {
  Require(config.loss != LossKind::kBCE,
          "regression MIL needs MAE, MSE, SmoothL1 or LogCosh loss, not BCE");
  std::vector<MilItem> items;
  items.reserve(bags.size());
  for (const VideoBag* bag : bags) {
    Require(bag->mes >= 0 && bag->mes < kNumClasses, "mes outside 0..3");
    items.push_back({bag, bag->mes == 0 ? 0 : 1, static_cast<double>(bag->mes)});
  }
  return TrainMil(items, Head::kLinear, config);
}

BinaryPrediction PredictVideoBinary(const ScorerModel& model,
                                    const VideoBag& bag, double threshold) {
  Require(model.head == Head::kSigmoid, "binary prediction needs a sigmoid head");
  Require(threshold >= 0.0 && threshold <= 1.0, "threshold must be in [0,1]");
  const std::vector<double> scores = ScoreBag(model, bag);
  BinaryPrediction p;
  p.frame = ArgMax(scores);
  p.p_v = scores[p.frame];
  p.label = p.p_v >= threshold ? 1 : 0;
  return p;
}

std::string LossTraceTsv(const std::vector<EpochStat>& trace,
                         bool include_wall_time) {
  std::string out = include_wall_time ? "epoch\tmean_loss\twall_time\n"
                                      : "epoch\tmean_loss\n";
  char buf[96];
  for (const EpochStat& e : trace) {
    if (include_wall_time)
      std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%.3f\n", e.epoch, e.mean_loss,
                    e.wall_seconds);
    else
      std::snprintf(buf, sizeof(buf), "%d\t%.17g\n", e.epoch, e.mean_loss);
    out += buf;
  }
  return out;
}

double MaxBagGradientCheck(const ScorerModel& model,
                           const std::vector<FrameVec>& frames, LossKind kind,
                           double target) {
  Require(!frames.empty(), "empty bag");
  auto bag_state = [&](const ScorerModel& m, double* loss,
                       std::vector<std::int8_t>* key) {
    std::vector<double> raw;
    raw.reserve(frames.size());
    for (const FrameVec& f : frames) raw.push_back(ForwardRaw(m, f));
    const std::size_t v = ArgMax(raw);
    *loss = RawLossAndGrad(m.head, kind, raw[v], target).loss;
    *key = RegimeKey(m, frames[v], kind, target);
    key->push_back(static_cast<std::int8_t>(v & 0x7f));
    key->push_back(static_cast<std::int8_t>((v >> 7) & 0x7f));
    return v;
  };

  double base_loss = 0.0;
  std::vector<std::int8_t> base_key;
  const std::size_t v = bag_state(model, &base_loss, &base_key);
  const LossGrad lg = RawLossAndGrad(model.head, kind, ForwardRaw(model, frames[v]), target);
  Gradients analytic = Gradients::ZerosLike(model);
  AccumulateRawBackward(model, frames[v], lg.grad, analytic);

  ScorerModel probe = model;
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    double f_plus = 0.0, f_minus = 0.0;
    std::vector<std::int8_t> k_plus, k_minus;
    param = saved + kFiniteDifferenceStep;
    bag_state(probe, &f_plus, &k_plus);
    param = saved - kFiniteDifferenceStep;
    bag_state(probe, &f_minus, &k_minus);
    param = saved;
    if (k_plus != base_key || k_minus != base_key) return;
    const double numeric = (f_plus - f_minus) / (2.0 * kFiniteDifferenceStep);
    const double denom =
        std::max({std::abs(a), std::abs(numeric), kGradientRelativeFloor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  for (std::size_t li = 0; li < probe.layers.size(); ++li) {
    for (std::size_t i = 0; i < probe.layers[li].weights.size(); ++i)
      check(probe.layers[li].weights[i], analytic.layers[li].weights[i]);
    for (std::size_t i = 0; i < probe.layers[li].bias.size(); ++i)
      check(probe.layers[li].bias[i], analytic.layers[li].bias[i]);
  }
  return worst;
}

}  // namespace ordmil
