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

#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace ordmil {

using nlohmann::json;

namespace {

constexpr int kDatasetVersion = 1;
constexpr const char* kDatasetFormat = "ordmil-dataset";

std::string Padded(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, n);
  return buf;
}

// Largest-remainder allocation of n items over weights.
std::array<std::size_t, kNumClasses> Allocate(
    std::size_t n, const std::array<double, kNumClasses>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double exact = static_cast<double>(n) * weights[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += counts[c];
  }
  while (assigned < n) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (remainder[c] > remainder[best]) best = c;
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

FrameVec Jitter(const FrameVec& mean, double noise_std, Rng& rng) {
  FrameVec x(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j)
    x[j] = mean[j] + noise_std * rng.Normal();
  return x;
}

}  // namespace

void ValidateBag(const VideoBag& bag, std::size_t dim) {
  const std::string who = "bag '" + bag.video_id + "': ";
  Require(bag.mes >= 0 && bag.mes < kNumClasses,
          who + "mes " + std::to_string(bag.mes) + " outside 0..3");
  Require(!bag.frames.empty(), who + "bag has no frames");
  for (const FrameVec& f : bag.frames) {
    Require(f.size() == dim, who + "frame dimension " +
                                 std::to_string(f.size()) + " != " +
                                 std::to_string(dim));
    for (double v : f) Require(std::isfinite(v), who + "non-finite feature");
  }
  if (bag.planted_frame_labels) {
    const auto& labels = *bag.planted_frame_labels;
    Require(labels.size() == bag.frames.size(),
            who + "planted label count != frame count");
    int top = -1;
    for (int l : labels) {
      Require(l >= 0 && l < kNumClasses, who + "planted label outside 0..3");
      top = std::max(top, l);
    }
    Require(top == bag.mes, who + "max planted label " + std::to_string(top) +
                                " != mes " + std::to_string(bag.mes));
  }
  if (bag.artifact_frames) {
    Require(bag.artifact_frames->size() == bag.frames.size(),
            who + "artifact mask length != frame count");
  }
}

void ValidateDataset(const Dataset& dataset) {
  Require(dataset.dim >= 1, "dataset dimension must be >= 1");
  std::set<std::string> ids;
  for (const VideoBag& bag : dataset.bags) {
    ValidateBag(bag, dataset.dim);
    Require(ids.insert(bag.video_id).second,
            "duplicate video_id '" + bag.video_id + "'");
  }
}

std::array<std::size_t, kNumClasses> ClassHistogram(const Dataset& dataset) {
  std::array<std::size_t, kNumClasses> h{};
  for (const VideoBag& bag : dataset.bags) ++h[bag.mes];
  return h;
}

void ValidateSpec(const SyntheticSpec& spec) {
  Require(spec.n_videos >= 1, "n_videos must be >= 1");
  Require(spec.frames_min >= 1, "frames_min must be >= 1");
  Require(spec.frames_min <= spec.frames_max, "frames_min > frames_max");
  Require(spec.dim >= 1, "dim must be >= 1");
  double total = 0.0;
  for (double w : spec.class_mix) {
    Require(std::isfinite(w) && w >= 0.0, "class_mix weights must be >= 0");
    total += w;
  }
  Require(total > 0.0, "class_mix must have a positive sum");
  Require(spec.frame_severity_decay > 0.0 && spec.frame_severity_decay <= 1.0,
          "frame_severity_decay must be in (0, 1]");
  Require(std::isfinite(spec.noise_std) && spec.noise_std >= 0.0,
          "noise_std must be >= 0");
  Require(spec.anchor_separation > 0.0, "anchor_separation must be > 0");
  Require(spec.artifact_rate >= 0.0 && spec.artifact_rate < 1.0,
          "artifact_rate must be in [0, 1)");
  Require(spec.artifact_rate == 0.0 || spec.dim >= 2,
          "artifact frames need dim >= 2");
  Require(spec.max_videos_per_subject >= 1,
          "max_videos_per_subject must be >= 1");
}

FrameVec ClassAnchor(int severity, std::size_t dim, double separation) {
  FrameVec mu(dim, 0.0);
  mu[0] = separation * severity;
  if (dim > kNumClasses) mu[1 + severity] += separation;
  return mu;
}

FrameVec ArtifactAnchor(std::size_t dim, double separation) {
  FrameVec mu(dim, 0.0);
  mu[0] = separation * (kNumClasses - 1);
  mu[dim - 1] += separation * (kNumClasses - 1);
  return mu;
}

Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  ValidateSpec(spec);
  Rng rng(spec.seed);

  const auto counts = Allocate(spec.n_videos, spec.class_mix);
  std::vector<int> classes;
  classes.reserve(spec.n_videos);
  for (int c = 0; c < kNumClasses; ++c)
    classes.insert(classes.end(), counts[c], c);
  rng.Shuffle(classes);

  std::array<FrameVec, kNumClasses> anchors;
  for (int c = 0; c < kNumClasses; ++c)
    anchors[c] = ClassAnchor(c, spec.dim, spec.anchor_separation);
  const FrameVec artifact =
      spec.artifact_rate > 0.0 ? ArtifactAnchor(spec.dim, spec.anchor_separation)
                               : FrameVec{};

  Dataset out;
  out.dim = spec.dim;
  out.bags.reserve(spec.n_videos);

  std::size_t subject = 0;
  std::size_t left_for_subject = 0;
  const std::size_t span = spec.frames_max - spec.frames_min + 1;

  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    if (left_for_subject == 0) {
      ++subject;
      left_for_subject = 1 + rng.Below(spec.max_videos_per_subject);
    }
    --left_for_subject;

    VideoBag bag;
    bag.video_id = Padded("V", v + 1, 5);
    bag.subject_id = Padded("S", subject, 4);
    bag.mes = classes[v];

    const std::size_t n_frames = spec.frames_min + rng.Below(span);
    std::size_t n_artifact = static_cast<std::size_t>(
        std::llround(spec.artifact_rate * static_cast<double>(n_frames)));
    n_artifact = std::min(n_artifact, n_frames - 1);
    const std::size_t n_clean = n_frames - n_artifact;

    // Frame severities: one frame pinned to the bag label, the rest drawn
    // from 0..mes with weights decay^level.
    std::vector<double> weights(bag.mes + 1);
    for (int l = 0; l <= bag.mes; ++l)
      weights[l] = std::pow(spec.frame_severity_decay, l);
    std::vector<int> clean(n_clean);
    const std::size_t pinned = rng.Below(n_clean);
    for (std::size_t i = 0; i < n_clean; ++i)
      clean[i] = i == pinned ? bag.mes : static_cast<int>(rng.Categorical(weights));

    std::vector<bool> is_artifact(n_frames, false);
    if (n_artifact > 0) {
      std::vector<std::size_t> slots(n_frames);
      std::iota(slots.begin(), slots.end(), 0);
      rng.Shuffle(slots);
      for (std::size_t i = 0; i < n_artifact; ++i) is_artifact[slots[i]] = true;
    }

    std::vector<int> planted(n_frames, 0);
    bag.frames.reserve(n_frames);
    std::size_t next_clean = 0;
    for (std::size_t i = 0; i < n_frames; ++i) {
      if (is_artifact[i]) {
        planted[i] = 0;
        bag.frames.push_back(Jitter(artifact, spec.noise_std, rng));
      } else {
        planted[i] = clean[next_clean++];
        bag.frames.push_back(Jitter(anchors[planted[i]], spec.noise_std, rng));
      }
    }
    bag.planted_frame_labels = std::move(planted);
    if (spec.artifact_rate > 0.0) bag.artifact_frames = std::move(is_artifact);
    out.bags.push_back(std::move(bag));
  }
  return out;
}

std::vector<LabeledBag> RelabelBinary(const Dataset& dataset,
                                      int threshold_class) {
  Require(threshold_class >= 0 && threshold_class <= 2,
          "binary relabel threshold must be 0, 1 or 2, got " +
              std::to_string(threshold_class));
  std::vector<LabeledBag> out;
  out.reserve(dataset.bags.size());
  for (const VideoBag& bag : dataset.bags)
    out.push_back({&bag, bag.mes > threshold_class ? 1 : 0});
  return out;
}

int FoldAssignment::FoldOf(const VideoBag& bag) const {
  auto it = fold_of_subject.find(bag.subject_id);
  Require(it != fold_of_subject.end(),
          "subject '" + bag.subject_id + "' has no fold");
  return it->second;
}

std::vector<std::size_t> FoldAssignment::HeldOut(const Dataset& dataset,
                                                 int fold) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dataset.bags.size(); ++i)
    if (FoldOf(dataset.bags[i]) == fold) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> FoldAssignment::Training(const Dataset& dataset,
                                                  int fold) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dataset.bags.size(); ++i)
    if (FoldOf(dataset.bags[i]) != fold) idx.push_back(i);
  return idx;
}

FoldAssignment GroupedKFold(const Dataset& dataset, int k, std::uint64_t seed) {
  Require(k >= 2, "k must be >= 2");

  struct Subject {
    std::string id;
    std::array<std::size_t, kNumClasses> per_class{};
    std::size_t total = 0;
  };
  std::map<std::string, Subject> by_id;
  for (const VideoBag& bag : dataset.bags) {
    Subject& s = by_id[bag.subject_id];
    s.id = bag.subject_id;
    ++s.per_class[bag.mes];
    ++s.total;
  }
  Require(by_id.size() >= static_cast<std::size_t>(k),
          "grouped k-fold needs at least k=" + std::to_string(k) +
              " subjects, found " + std::to_string(by_id.size()));

  std::vector<Subject> subjects;
  subjects.reserve(by_id.size());
  for (auto& [id, s] : by_id) subjects.push_back(std::move(s));
  Rng rng(seed);
  rng.Shuffle(subjects);
  std::stable_sort(subjects.begin(), subjects.end(),
                   [](const Subject& a, const Subject& b) {
                     return a.total > b.total;
                   });

  std::vector<std::array<std::size_t, kNumClasses>> fold_class(k);
  std::vector<std::size_t> fold_total(k, 0);
  FoldAssignment out;
  out.k = k;
  for (const Subject& s : subjects) {
    const int modal = static_cast<int>(
        std::max_element(s.per_class.begin(), s.per_class.end()) -
        s.per_class.begin());
    int best = 0;
    for (int f = 1; f < k; ++f) {
      const auto key = std::make_pair(fold_class[f][modal], fold_total[f]);
      const auto best_key =
          std::make_pair(fold_class[best][modal], fold_total[best]);
      if (key < best_key) best = f;
    }
    for (int c = 0; c < kNumClasses; ++c) fold_class[best][c] += s.per_class[c];
    fold_total[best] += s.total;
    out.fold_of_subject[s.id] = best;
  }
  return out;
}

// -- persistence ------------------------------------------------------------

namespace {

json BagToJson(const VideoBag& bag) {
  json j;
  j["video_id"] = bag.video_id;
  j["subject_id"] = bag.subject_id;
  j["mes"] = bag.mes;
  j["frames"] = bag.frames;
  if (bag.planted_frame_labels) j["planted_frame_labels"] = *bag.planted_frame_labels;
  if (bag.artifact_frames) {
    std::vector<int> mask(bag.artifact_frames->begin(), bag.artifact_frames->end());
    j["artifact_frames"] = mask;
  }
  return j;
}

int ExpectInt(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) Fail(ErrorKind::kParse, std::string(key) + " must be an integer");
  return v.get<int>();
}

VideoBag BagFromJson(const json& j) {
  VideoBag bag;
  bag.video_id = j.at("video_id").get<std::string>();
  bag.subject_id = j.at("subject_id").get<std::string>();
  bag.mes = ExpectInt(j, "mes");
  for (const json& frame : j.at("frames")) {
    FrameVec f;
    f.reserve(frame.size());
    for (const json& x : frame) {
      if (!x.is_number()) Fail(ErrorKind::kParse, "frame entries must be numbers");
      f.push_back(x.get<double>());
    }
    bag.frames.push_back(std::move(f));
  }
  if (auto it = j.find("planted_frame_labels"); it != j.end() && !it->is_null()) {
    std::vector<int> labels;
    for (const json& x : *it) {
      if (!x.is_number_integer()) Fail(ErrorKind::kParse, "planted labels must be integers");
      labels.push_back(x.get<int>());
    }
    bag.planted_frame_labels = std::move(labels);
  }
  if (auto it = j.find("artifact_frames"); it != j.end() && !it->is_null()) {
    std::vector<bool> mask;
    for (const json& x : *it) mask.push_back(x.get<int>() != 0);
    bag.artifact_frames = std::move(mask);
  }
  return bag;
}

}  // namespace

std::string DatasetToJsonl(const Dataset& dataset) {
  std::string out;
  json header = {{"format", kDatasetFormat},
                 {"version", kDatasetVersion},
                 {"dim", dataset.dim}};
  out += header.dump();
  out += '\n';
  for (const VideoBag& bag : dataset.bags) {
    out += BagToJson(bag).dump();
    out += '\n';
  }
  return out;
}

Dataset DatasetFromJsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Dataset out;
  bool have_header = false;
  std::set<std::string> ids;

  auto fail = [&](const std::string& what) {
    Fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(std::string("malformed record: ") + e.what());
    }
    if (!have_header) {
      try {
        if (j.at("format").get<std::string>() != kDatasetFormat)
          fail("not an ordmil dataset file");
        if (j.at("version").get<int>() != kDatasetVersion)
          fail("unsupported dataset version");
        out.dim = j.at("dim").get<std::size_t>();
      } catch (const json::exception& e) {
        fail(std::string("bad header: ") + e.what());
      }
      if (out.dim < 1) fail("dim must be >= 1");
      have_header = true;
      continue;
    }
    try {
      VideoBag bag = BagFromJson(j);
      ValidateBag(bag, out.dim);
      if (!ids.insert(bag.video_id).second)
        fail("duplicate video_id '" + bag.video_id + "'");
      out.bags.push_back(std::move(bag));
    } catch (const json::exception& e) {
      fail(e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParse &&
          std::string(e.what()).rfind("line ", 0) == 0)
        throw;
      fail(e.what());
    }
  }
  if (!have_header) Fail(ErrorKind::kParse, "missing dataset header record");
  return out;
}

void SaveDataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << DatasetToJsonl(dataset);
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

Dataset LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return DatasetFromJsonl(buf.str());
}

Dataset Subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.dim = dataset.dim;
  out.bags.reserve(indices.size());
  for (std::size_t i : indices) {
    Require(i < dataset.bags.size(), "bag index " + std::to_string(i) + " out of range");
    out.bags.push_back(dataset.bags[i]);
  }
  return out;
}

}  // namespace ordmil
