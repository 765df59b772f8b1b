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

#include "qcfilter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace ordmil {

using nlohmann::json;

namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double SvmScore(const LinearSvm& model, std::span<const double> frame) {
  Require(frame.size() == model.w.size(),
          "frame dimension " + std::to_string(frame.size()) + " != svm dimension " +
              std::to_string(model.w.size()),
          ErrorKind::kShapeMismatch);
  return Dot(model.w, frame) + model.b;
}

int SvmPredict(const LinearSvm& model, std::span<const double> frame) {
  return SvmScore(model, frame) >= 0.0 ? 1 : -1;
}

double SvmObjective(const LinearSvm& model, const std::vector<FrameVec>& features,
                    std::span<const int> labels) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i)
    hinge += std::max(0.0, 1.0 - labels[i] * SvmScore(model, features[i]));
  const double norm = Dot(model.w, model.w) + model.b * model.b;
  return 0.5 * model.lambda * norm + hinge / static_cast<double>(features.size());
}

SvmTrainResult TrainSvm(const std::vector<FrameVec>& features,
                        std::span<const int> labels, const SvmConfig& config) {
  Require(!features.empty(), "svm training set is empty");
  Require(features.size() == labels.size(), "feature/label count mismatch",
          ErrorKind::kShapeMismatch);
  Require(config.lambda > 0.0, "svm lambda must be > 0");
  Require(config.epochs >= 1, "svm epochs must be >= 1");
  const std::size_t dim = features.front().size();
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    Require(features[i].size() == dim, "inconsistent feature dimension",
            ErrorKind::kShapeMismatch);
    Require(labels[i] == 1 || labels[i] == -1, "svm labels must be -1 or +1");
    has_pos |= labels[i] == 1;
    has_neg |= labels[i] == -1;
  }
  Require(has_pos && has_neg, "svm training needs both classes");

  SvmTrainResult out;
  LinearSvm& m = out.model;
  m.w.assign(dim, 0.0);
  m.b = 0.0;
  m.lambda = config.lambda;
  m.epochs = config.epochs;
  m.seed = config.seed;
  out.initial_objective = SvmObjective(m, features, labels);

  Rng rng(config.seed);
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  const double radius = 1.0 / std::sqrt(config.lambda);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    for (std::size_t idx : order) {
      ++t;
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const double y = labels[idx];
      const double margin = y * SvmScore(m, features[idx]);
      const double shrink = 1.0 - eta * config.lambda;
      for (double& wi : m.w) wi *= shrink;
      m.b *= shrink;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < dim; ++j) m.w[j] += eta * y * features[idx][j];
        m.b += eta * y;
      }
      const double norm = std::sqrt(Dot(m.w, m.w) + m.b * m.b);
      if (norm > radius) {
        const double s = radius / norm;
        for (double& wi : m.w) wi *= s;
        m.b *= s;
      }
    }
  }
  out.final_objective = SvmObjective(m, features, labels);
  return out;
}

double SvmAccuracy(const LinearSvm& model, const std::vector<FrameVec>& features,
                   std::span<const int> labels) {
  Require(!features.empty() && features.size() == labels.size(),
          "accuracy needs matching non-empty inputs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < features.size(); ++i)
    hit += SvmPredict(model, features[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(features.size());
}

FilterResult FilterDataset(const Dataset& dataset, const LinearSvm& model) {
  Require(model.w.size() == dataset.dim, "svm dimension does not match dataset",
          ErrorKind::kShapeMismatch);
  FilterResult out;
  out.dataset.dim = dataset.dim;
  FilterStats& st = out.stats;
  st.bags_before = dataset.bags.size();
  double percent_sum = 0.0;

  for (const VideoBag& bag : dataset.bags) {
    VideoBag kept;
    kept.video_id = bag.video_id;
    kept.subject_id = bag.subject_id;
    kept.mes = bag.mes;
    std::vector<int> planted;
    std::vector<bool> artifact;
    for (std::size_t i = 0; i < bag.frames.size(); ++i) {
      if (SvmPredict(model, bag.frames[i]) == 1) continue;
      kept.frames.push_back(bag.frames[i]);
      if (bag.planted_frame_labels) planted.push_back((*bag.planted_frame_labels)[i]);
      if (bag.artifact_frames) artifact.push_back((*bag.artifact_frames)[i]);
    }
    const std::size_t removed = bag.frames.size() - kept.frames.size();
    st.frames_before += bag.frames.size();
    st.frames_removed += removed;
    percent_sum += 100.0 * static_cast<double>(removed) /
                   static_cast<double>(bag.frames.size());
    if (kept.frames.empty()) {
      ++st.bags_dropped;
      continue;
    }
    if (bag.planted_frame_labels) {
      if (*std::max_element(planted.begin(), planted.end()) == bag.mes)
        kept.planted_frame_labels = std::move(planted);
      else
        ++st.planted_labels_dropped;
    }
    if (bag.artifact_frames) kept.artifact_frames = std::move(artifact);
    out.dataset.bags.push_back(std::move(kept));
  }
  if (st.bags_before > 0)
    st.mean_percent_decrease = percent_sum / static_cast<double>(st.bags_before);
  return out;
}

void CollectArtifactFrames(const Dataset& dataset,
                           std::span<const std::size_t> bag_indices,
                           std::vector<FrameVec>& features,
                           std::vector<int>& labels) {
  for (std::size_t b : bag_indices) {
    const VideoBag& bag = dataset.bags.at(b);
    if (!bag.artifact_frames) continue;
    for (std::size_t i = 0; i < bag.frames.size(); ++i) {
      features.push_back(bag.frames[i]);
      labels.push_back((*bag.artifact_frames)[i] ? 1 : -1);
    }
  }
}

namespace {
constexpr int kSvmVersion = 1;
constexpr const char* kSvmFormat = "ordmil-svm";
}  // namespace

std::string SvmToJson(const LinearSvm& model) {
  json j = {{"format", kSvmFormat}, {"version", kSvmVersion},
            {"dim", model.w.size()}, {"lambda", model.lambda},
            {"epochs", model.epochs}, {"seed", model.seed},
            {"w", model.w},          {"b", model.b}};
  return j.dump(1) + "\n";
}

LinearSvm SvmFromJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kSvmFormat)
      Fail(ErrorKind::kParse, "not an ordmil svm file");
    if (j.at("version").get<int>() != kSvmVersion)
      Fail(ErrorKind::kParse, "unsupported svm version");
    LinearSvm m;
    m.w = j.at("w").get<std::vector<double>>();
    m.b = j.at("b").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.epochs = j.at("epochs").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    Require(m.w.size() == j.at("dim").get<std::size_t>(), "svm dim mismatch",
            ErrorKind::kParse);
    for (double x : m.w) Require(std::isfinite(x), "non-finite svm weight", ErrorKind::kParse);
    Require(std::isfinite(m.b), "non-finite svm bias", ErrorKind::kParse);
    return m;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParse, std::string("svm file: ") + e.what());
  }
}

void SaveSvm(const LinearSvm& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << SvmToJson(model);
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

LinearSvm LoadSvm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open svm " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return SvmFromJson(buf.str());
}

}  // namespace ordmil
