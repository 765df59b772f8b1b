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

#include "scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace ordmil {

using nlohmann::json;

std::string ToString(Head head) {
  return head == Head::kSigmoid ? "sigmoid" : "linear";
}

std::string ToString(LossKind kind) {
  switch (kind) {
    case LossKind::kBCE: return "bce";
    case LossKind::kMAE: return "mae";
    case LossKind::kMSE: return "mse";
    case LossKind::kSmoothL1: return "smooth_l1";
    case LossKind::kLogCosh: return "log_cosh";
  }
  return "?";
}

Head ParseHead(const std::string& s) {
  if (s == "sigmoid") return Head::kSigmoid;
  if (s == "linear") return Head::kLinear;
  Fail(ErrorKind::kInvalidArgument, "unknown head '" + s + "'");
}

LossKind ParseLossKind(const std::string& s) {
  if (s == "bce") return LossKind::kBCE;
  if (s == "mae") return LossKind::kMAE;
  if (s == "mse") return LossKind::kMSE;
  if (s == "smooth_l1") return LossKind::kSmoothL1;
  if (s == "log_cosh") return LossKind::kLogCosh;
  Fail(ErrorKind::kInvalidArgument, "unknown loss '" + s + "'");
}

bool LossMatchesHead(LossKind kind, Head head) {
  return (kind == LossKind::kBCE) == (head == Head::kSigmoid);
}

std::size_t ScorerModel::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

namespace {

void CheckDims(const std::vector<std::size_t>& dims) {
  Require(dims.size() >= 2, "scorer needs at least input and output sizes");
  Require(dims.back() == 1, "scorer output layer must have exactly one unit");
  for (std::size_t d : dims) Require(d >= 1, "layer sizes must be >= 1");
}

inline double Leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double LeakyGrad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

inline double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Keeps pre-activations of every layer for the backward pass.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> act;
};

double RunForward(const ScorerModel& model, std::span<const double> frame,
                  ForwardTrace* trace) {
  Require(frame.size() == model.input_dim(),
          "frame dimension " + std::to_string(frame.size()) +
              " != model input " + std::to_string(model.input_dim()),
          ErrorKind::kShapeMismatch);
  std::vector<double> x(frame.begin(), frame.end());
  std::vector<double> z;
  const std::size_t n_layers = model.layers.size();
  if (trace) {
    trace->pre.assign(n_layers, {});
    trace->act.assign(n_layers + 1, {});
    trace->act[0] = x;
  }
  for (std::size_t li = 0; li < n_layers; ++li) {
    const Layer& layer = model.layers[li];
    z.assign(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = &layer.weights[o * layer.in];
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
      z[o] = acc;
    }
    const bool hidden = li + 1 < n_layers;
    if (trace) trace->pre[li] = z;
    if (hidden) {
      for (double& v : z) v = Leaky(v);
    }
    x.swap(z);
    if (trace) trace->act[li + 1] = x;
  }
  return x[0];
}

}  // namespace

ScorerModel ZeroScorer(std::vector<std::size_t> layer_dims, Head head) {
  CheckDims(layer_dims);
  ScorerModel m;
  m.layer_dims = std::move(layer_dims);
  m.head = head;
  for (std::size_t i = 0; i + 1 < m.layer_dims.size(); ++i) {
    Layer l;
    l.in = m.layer_dims[i];
    l.out = m.layer_dims[i + 1];
    l.weights.assign(l.in * l.out, 0.0);
    l.bias.assign(l.out, 0.0);
    m.layers.push_back(std::move(l));
  }
  return m;
}

ScorerModel CreateScorer(std::vector<std::size_t> layer_dims, Head head,
                         std::uint64_t seed) {
  ScorerModel m = ZeroScorer(std::move(layer_dims), head);
  Rng rng(seed);
  for (Layer& l : m.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (double& w : l.weights) w = rng.Uniform(-bound, bound);
    for (double& b : l.bias) b = rng.Uniform(-bound, bound);
  }
  return m;
}

double ApplyHead(Head head, double raw) {
  return head == Head::kSigmoid ? Sigmoid(raw) : raw;
}

double ForwardRaw(const ScorerModel& model, std::span<const double> frame) {
  return RunForward(model, frame, nullptr);
}

double Forward(const ScorerModel& model, std::span<const double> frame) {
  return ApplyHead(model.head, ForwardRaw(model, frame));
}

Gradients Gradients::ZerosLike(const ScorerModel& model) {
  Gradients g;
  g.layers.reserve(model.layers.size());
  for (const Layer& l : model.layers) {
    Layer z;
    z.in = l.in;
    z.out = l.out;
    z.weights.assign(l.weights.size(), 0.0);
    z.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

void Gradients::Scale(double factor) {
  for (Layer& l : layers) {
    for (double& w : l.weights) w *= factor;
    for (double& b : l.bias) b *= factor;
  }
}

void Gradients::Add(const Gradients& other) {
  Require(other.layers.size() == layers.size(), "gradient shape mismatch",
          ErrorKind::kShapeMismatch);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Require(other.layers[li].weights.size() == layers[li].weights.size() &&
                other.layers[li].bias.size() == layers[li].bias.size(),
            "gradient shape mismatch", ErrorKind::kShapeMismatch);
    for (std::size_t i = 0; i < layers[li].weights.size(); ++i)
      layers[li].weights[i] += other.layers[li].weights[i];
    for (std::size_t i = 0; i < layers[li].bias.size(); ++i)
      layers[li].bias[i] += other.layers[li].bias[i];
  }
}

double Gradients::MaxAbs() const {
  double m = 0.0;
  for (const Layer& l : layers) {
    for (double w : l.weights) m = std::max(m, std::abs(w));
    for (double b : l.bias) m = std::max(m, std::abs(b));
  }
  return m;
}

void AccumulateRawBackward(const ScorerModel& model,
                           std::span<const double> frame, double dloss_draw,
                           Gradients& grads) {
  if (dloss_draw == 0.0) {
    // Still validates the frame shape.
    RunForward(model, frame, nullptr);
    return;
  }
  ForwardTrace trace;
  RunForward(model, frame, &trace);
  std::vector<double> delta{dloss_draw};
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const Layer& layer = model.layers[li];
    Layer& g = grads.layers[li];
    const std::vector<double>& input = trace.act[li];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* gw = &g.weights[o * layer.in];
      for (std::size_t i = 0; i < layer.in; ++i) gw[i] += d * input[i];
      g.bias[o] += d;
    }
    if (li == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = &layer.weights[o * layer.in];
      for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * d;
    }
    const std::vector<double>& pre = trace.pre[li - 1];
    for (std::size_t i = 0; i < layer.in; ++i) prev[i] *= LeakyGrad(pre[i]);
    delta.swap(prev);
  }
}

Gradients Backward(const ScorerModel& model, std::span<const double> frame,
                   double dloss_dscore) {
  Gradients g = Gradients::ZerosLike(model);
  double dloss_draw = dloss_dscore;
  if (model.head == Head::kSigmoid && dloss_dscore != 0.0) {
    const double p = Forward(model, frame);
    dloss_draw = dloss_dscore * p * (1.0 - p);
  }
  AccumulateRawBackward(model, frame, dloss_draw, g);
  return g;
}

LossGrad LossAndGrad(LossKind kind, double pred, double target) {
  const double d = pred - target;
  switch (kind) {
    case LossKind::kBCE: {
      Require(pred > 0.0 && pred < 1.0,
              "BCE prediction must lie in (0,1), got " + std::to_string(pred));
      Require(target == 0.0 || target == 1.0, "BCE target must be 0 or 1");
      const double loss =
          -(target * std::log(pred) + (1.0 - target) * std::log1p(-pred));
      return {loss, -target / pred + (1.0 - target) / (1.0 - pred)};
    }
    case LossKind::kMAE:
      return {std::abs(d), static_cast<double>((d > 0.0) - (d < 0.0))};
    case LossKind::kMSE:
      return {d * d, 2.0 * d};
    case LossKind::kSmoothL1: {
      const double a = std::abs(d);
      if (a < kSmoothL1Beta) return {0.5 * d * d / kSmoothL1Beta, d / kSmoothL1Beta};
      return {a - 0.5 * kSmoothL1Beta, static_cast<double>((d > 0.0) - (d < 0.0))};
    }
    case LossKind::kLogCosh: {
      // log(cosh(d)) = |d| + log1p(exp(-2|d|)) - log 2
      const double a = std::abs(d);
      return {a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0), std::tanh(d)};
    }
  }
  Fail(ErrorKind::kInvalidArgument, "unknown loss kind");
}

LossGrad RawLossAndGrad(Head head, LossKind kind, double raw, double target) {
  Require(LossMatchesHead(kind, head),
          "loss " + ToString(kind) + " cannot train a " + ToString(head) + " head");
  if (head == Head::kLinear) return LossAndGrad(kind, raw, target);
  Require(target == 0.0 || target == 1.0, "BCE target must be 0 or 1");
  // softplus(z) - t*z
  const double loss =
      std::max(raw, 0.0) - target * raw + std::log1p(std::exp(-std::abs(raw)));
  return {loss, Sigmoid(raw) - target};
}

AdamState AdamState::For(const ScorerModel& model, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.m = Gradients::ZerosLike(model);
  s.v = Gradients::ZerosLike(model);
  return s;
}

void AdamStep(ScorerModel& model, const Gradients& grads, AdamState& state) {
  const std::size_t n = model.layers.size();
  Require(grads.layers.size() == n && state.m.layers.size() == n &&
              state.v.layers.size() == n,
          "adam: layer count mismatch", ErrorKind::kShapeMismatch);
  for (std::size_t li = 0; li < n; ++li) {
    const auto& l = model.layers[li];
    Require(grads.layers[li].weights.size() == l.weights.size() &&
                grads.layers[li].bias.size() == l.bias.size() &&
                state.m.layers[li].weights.size() == l.weights.size() &&
                state.v.layers[li].bias.size() == l.bias.size(),
            "adam: parameter shape mismatch", ErrorKind::kShapeMismatch);
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](std::vector<double>& theta, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + c.weight_decay * theta[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      theta[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  };
  for (std::size_t li = 0; li < n; ++li) {
    update(model.layers[li].weights, grads.layers[li].weights,
           state.m.layers[li].weights, state.v.layers[li].weights);
    update(model.layers[li].bias, grads.layers[li].bias,
           state.m.layers[li].bias, state.v.layers[li].bias);
  }
}

double ClipScore(double s) {
  Require(std::isfinite(s), "clip_score: non-finite input");
  return std::min(3.0, std::max(0.0, s));
}

std::vector<std::int8_t> RegimeKey(const ScorerModel& model,
                                   std::span<const double> frame,
                                   LossKind kind, double target) {
  ForwardTrace trace;
  const double raw = RunForward(model, frame, &trace);
  std::vector<std::int8_t> key;
  for (std::size_t li = 0; li + 1 < trace.pre.size(); ++li)
    for (double z : trace.pre[li]) key.push_back(z > 0.0 ? 1 : 0);
  const double d = ApplyHead(model.head, raw) - target;
  switch (kind) {
    case LossKind::kMAE:
      key.push_back(static_cast<std::int8_t>((d > 0.0) - (d < 0.0)));
      break;
    case LossKind::kSmoothL1:
      key.push_back(static_cast<std::int8_t>((d > 0.0) - (d < 0.0)));
      key.push_back(std::abs(d) < kSmoothL1Beta ? 1 : 0);
      break;
    default:
      break;
  }
  return key;
}

namespace {

double ScalarLoss(const ScorerModel& model, std::span<const double> frame,
                  LossKind kind, double target) {
  return RawLossAndGrad(model.head, kind, ForwardRaw(model, frame), target).loss;
}

}  // namespace

double GradientCheck(const ScorerModel& model, std::span<const double> frame,
                     LossKind kind, double target) {
  const double raw = ForwardRaw(model, frame);
  const LossGrad lg = RawLossAndGrad(model.head, kind, raw, target);
  Gradients analytic = Gradients::ZerosLike(model);
  AccumulateRawBackward(model, frame, lg.grad, analytic);

  const auto base_key = RegimeKey(model, frame, kind, target);
  ScorerModel probe = model;
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + kFiniteDifferenceStep;
    const bool plus_ok = RegimeKey(probe, frame, kind, target) == base_key;
    const double f_plus = ScalarLoss(probe, frame, kind, target);
    param = saved - kFiniteDifferenceStep;
    const bool minus_ok = RegimeKey(probe, frame, kind, target) == base_key;
    const double f_minus = ScalarLoss(probe, frame, kind, target);
    param = saved;
    if (!plus_ok || !minus_ok) return;
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

// -- persistence ------------------------------------------------------------

namespace {
constexpr int kScorerVersion = 1;
constexpr const char* kScorerFormat = "ordmil-scorer";
}  // namespace

std::string ScorerToJson(const ScorerModel& model) {
  json j;
  j["format"] = kScorerFormat;
  j["version"] = kScorerVersion;
  j["layer_dims"] = model.layer_dims;
  j["head"] = ToString(model.head);
  j["activation"] = "leaky_relu";
  json layers = json::array();
  for (const Layer& l : model.layers)
    layers.push_back({{"weights", l.weights}, {"bias", l.bias}});
  j["layers"] = std::move(layers);
  return j.dump(1) + "\n";
}

ScorerModel ScorerFromJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kScorerFormat)
      Fail(ErrorKind::kParse, "not an ordmil scorer file");
    if (j.at("version").get<int>() != kScorerVersion)
      Fail(ErrorKind::kParse, "unsupported scorer version");
    ScorerModel m = ZeroScorer(j.at("layer_dims").get<std::vector<std::size_t>>(),
                               ParseHead(j.at("head").get<std::string>()));
    const json& layers = j.at("layers");
    Require(layers.size() == m.layers.size(), "layer count mismatch",
            ErrorKind::kParse);
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
      auto w = layers[li].at("weights").get<std::vector<double>>();
      auto b = layers[li].at("bias").get<std::vector<double>>();
      Require(w.size() == m.layers[li].weights.size() &&
                  b.size() == m.layers[li].bias.size(),
              "layer " + std::to_string(li) + " parameter count mismatch",
              ErrorKind::kParse);
      for (double x : w) Require(std::isfinite(x), "non-finite weight", ErrorKind::kParse);
      for (double x : b) Require(std::isfinite(x), "non-finite bias", ErrorKind::kParse);
      m.layers[li].weights = std::move(w);
      m.layers[li].bias = std::move(b);
    }
    return m;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParse, std::string("scorer file: ") + e.what());
  }
}

void SaveScorer(const ScorerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << ScorerToJson(model);
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

ScorerModel LoadScorer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ScorerFromJson(buf.str());
}

}  // namespace ordmil
