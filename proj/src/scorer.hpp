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

namespace ordmil {

enum class Head { kSigmoid, kLinear };
enum class LossKind { kBCE, kMAE, kMSE, kSmoothL1, kLogCosh };

std::string ToString(Head head);
std::string ToString(LossKind kind);
Head ParseHead(const std::string& s);
LossKind ParseLossKind(const std::string& s);

/// True when `kind` can be paired with `head` (BCE needs a sigmoid output).
bool LossMatchesHead(LossKind kind, Head head);

/// Dense layer, weights row-major [out x in].
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const Layer&) const = default;
};

/// Fully connected scorer: leaky-ReLU hidden layers, a single output unit,
/// and a sigmoid (probability) or linear (severity) head.
struct ScorerModel {
  std::vector<std::size_t> layer_dims;
  Head head = Head::kSigmoid;
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t parameter_count() const;
  bool operator==(const ScorerModel&) const = default;
};

inline constexpr double kLeakySlope = 0.01;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of every weight
/// and bias, seeded.
ScorerModel CreateScorer(std::vector<std::size_t> layer_dims, Head head,
                         std::uint64_t seed);
ScorerModel ZeroScorer(std::vector<std::size_t> layer_dims, Head head);

/// Output before the head nonlinearity (logit for sigmoid heads).
double ForwardRaw(const ScorerModel& model, std::span<const double> frame);
double Forward(const ScorerModel& model, std::span<const double> frame);
double ApplyHead(Head head, double raw);

/// Parameter-shaped container; also used for Adam moments.
struct Gradients {
  std::vector<Layer> layers;

  static Gradients ZerosLike(const ScorerModel& model);
  void Scale(double factor);
  void Add(const Gradients& other);
  double MaxAbs() const;
};

/// Accumulates scale * d(raw output)/d(params) into `grads`.
void AccumulateRawBackward(const ScorerModel& model,
                           std::span<const double> frame, double dloss_draw,
                           Gradients& grads);

/// Exact parameter gradients of a loss given its derivative w.r.t. the
/// model's (post-head) score.
Gradients Backward(const ScorerModel& model, std::span<const double> frame,
                   double dloss_dscore);

struct LossGrad {
  double loss = 0.0;
  double grad = 0.0;
};

/// Pointwise loss and d(loss)/d(pred). BCE requires pred in (0, 1).
LossGrad LossAndGrad(LossKind kind, double pred, double target);

/// Loss and gradient w.r.t. the raw output. Sigmoid+BCE is evaluated from the
/// logit directly, so saturated probabilities never reach log(0).
LossGrad RawLossAndGrad(Head head, LossKind kind, double raw, double target);

inline constexpr double kSmoothL1Beta = 1.0;

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  AdamConfig config;
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;

  static AdamState For(const ScorerModel& model, const AdamConfig& config);
};

/// One bias-corrected Adam update. Weight decay is coupled: decay * theta is
/// added to the gradient before the moment updates.
void AdamStep(ScorerModel& model, const Gradients& grads, AdamState& state);

/// min(3, max(0, s)); rejects non-finite input.
double ClipScore(double s);

/// Regime key of a forward pass: hidden-unit signs plus the loss branch.
/// Two evaluations with equal keys lie on the same smooth piece.
std::vector<std::int8_t> RegimeKey(const ScorerModel& model,
                                   std::span<const double> frame,
                                   LossKind kind, double target);

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientRelativeFloor = 1e-6;

/// Worst relative error |analytic - numeric| / max(|analytic|, |numeric|,
/// kGradientRelativeFloor) over all parameters, using central differences.
/// Parameters whose +/- step changes the regime key are skipped.
double GradientCheck(const ScorerModel& model, std::span<const double> frame,
                     LossKind kind, double target);

void SaveScorer(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel LoadScorer(const std::filesystem::path& path);
std::string ScorerToJson(const ScorerModel& model);
ScorerModel ScorerFromJson(const std::string& text);

}  // namespace ordmil
