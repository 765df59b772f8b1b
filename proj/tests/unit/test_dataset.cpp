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
#include <atomic>
#include <set>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "doctest.h"
#include "parallel.hpp"

using namespace ordmil;

TEST_CASE("rng streams are reproducible") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.NextU64() == b.NextU64());
  Rng c(6);
  std::vector<int> v(20);
  for (int i = 0; i < 20; ++i) v[i] = i;
  auto w = v;
  c.Shuffle(w);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.Uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.Below(7) < 7);
  }
  CHECK(MixSeed(1, 2) != MixSeed(1, 3));
  CHECK(MixSeed(1, 2) == MixSeed(1, 2));
}

TEST_CASE("normal draws have unit moments") {
  Rng r(8);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.Normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("parallel for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(1000);
  ParallelFor(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(ParallelFor(10,
                              [](std::size_t i) {
                                if (i == 7) Fail(ErrorKind::kIo, "boom");
                              }),
                  Error);
  ParallelFor(0, [](std::size_t) { FAIL("called"); });
}

namespace {

SyntheticSpec SmallSpec() {
  SyntheticSpec s;
  s.n_videos = 60;
  s.frames_min = 5;
  s.frames_max = 12;
  s.dim = 8;
  s.seed = 3;
  return s;
}

}  // namespace

TEST_CASE("synthetic generation is seeded and consistent") {
  const Dataset a = GenerateSynthetic(SmallSpec());
  const Dataset b = GenerateSynthetic(SmallSpec());
  CHECK(a == b);
  SyntheticSpec other = SmallSpec();
  other.seed = 4;
  CHECK_FALSE(a == GenerateSynthetic(other));
  CHECK_NOTHROW(ValidateDataset(a));
  CHECK(a.bags.size() == 60);
  for (const VideoBag& bag : a.bags) {
    CHECK(bag.size() >= 5);
    CHECK(bag.size() <= 12);
    REQUIRE(bag.planted_frame_labels);
    CHECK(*std::max_element(bag.planted_frame_labels->begin(),
                            bag.planted_frame_labels->end()) == bag.mes);
    CHECK_FALSE(bag.artifact_frames);
  }
}

TEST_CASE("class counts follow the mix by largest remainder") {
  SyntheticSpec s = SmallSpec();
  s.n_videos = 1881;
  const auto h = ClassHistogram(GenerateSynthetic(s));
  CHECK(h[0] == 167);
  CHECK(h[1] == 220);
  CHECK(h[2] == 492);
  CHECK(h[3] == 1002);
  s.n_videos = 400;
  const auto h4 = ClassHistogram(GenerateSynthetic(s));
  // 400 * {167,220,492,1002} / 1881 = {35.51, 46.78, 104.63, 213.08}.
  CHECK(h4[0] == 35);
  CHECK(h4[1] == 47);
  CHECK(h4[2] == 105);
  CHECK(h4[3] == 213);
}

TEST_CASE("artifact frames are planted at the requested rate") {
  SyntheticSpec s = SmallSpec();
  s.artifact_rate = 0.25;
  s.frames_min = s.frames_max = 20;
  const Dataset d = GenerateSynthetic(s);
  for (const VideoBag& bag : d.bags) {
    REQUIRE(bag.artifact_frames);
    const auto n = std::count(bag.artifact_frames->begin(), bag.artifact_frames->end(), true);
    CHECK(n == 5);
    for (std::size_t i = 0; i < bag.size(); ++i)
      if ((*bag.artifact_frames)[i]) CHECK((*bag.planted_frame_labels)[i] == 0);
  }
}

TEST_CASE("spec validation names the problem") {
  SyntheticSpec s = SmallSpec();
  s.class_mix = {1, -1, 1, 1};
  CHECK_THROWS_WITH_AS(ValidateSpec(s), doctest::Contains("class_mix"), Error);
  s = SmallSpec();
  s.frames_min = 10;
  s.frames_max = 5;
  CHECK_THROWS_AS(ValidateSpec(s), Error);
  s = SmallSpec();
  s.artifact_rate = 1.0;
  CHECK_THROWS_AS(ValidateSpec(s), Error);
}

TEST_CASE("anchors are separated along the severity axis") {
  for (int c = 0; c < 4; ++c) {
    const FrameVec mu = ClassAnchor(c, 16, 1.5);
    CHECK(mu[0] == 1.5 * c);
    CHECK(mu[1 + c] == 1.5);
  }
  const FrameVec art = ArtifactAnchor(16, 1.0);
  CHECK(art[0] == 3.0);
  CHECK(art[15] == 3.0);
}

TEST_CASE("binary relabeling counts") {
  const Dataset d = GenerateSynthetic(SmallSpec());
  const auto h = ClassHistogram(d);
  for (int m = 0; m < 3; ++m) {
    const auto lb = RelabelBinary(d, m);
    std::size_t pos = 0;
    for (const LabeledBag& b : lb) {
      CHECK(b.label == (b.bag->mes > m ? 1 : 0));
      pos += b.label;
    }
    std::size_t want = 0;
    for (int c = m + 1; c < 4; ++c) want += h[c];
    CHECK(pos == want);
  }
  CHECK_THROWS_AS(RelabelBinary(d, 3), Error);
  CHECK_THROWS_AS(RelabelBinary(d, -1), Error);
}

TEST_CASE("grouped k-fold keeps subjects together and partitions bags") {
  SyntheticSpec s = SmallSpec();
  s.n_videos = 300;
  const Dataset d = GenerateSynthetic(s);
  const FoldAssignment f = GroupedKFold(d, 5, 9);
  const FoldAssignment g = GroupedKFold(d, 5, 9);
  CHECK(f.fold_of_subject == g.fold_of_subject);
  std::vector<int> seen(d.bags.size(), 0);
  for (int k = 0; k < 5; ++k) {
    const auto held = f.HeldOut(d, k);
    const auto train = f.Training(d, k);
    CHECK(held.size() + train.size() == d.bags.size());
    std::set<std::string> held_subjects;
    for (std::size_t i : held) {
      held_subjects.insert(d.bags[i].subject_id);
      ++seen[i];
    }
    for (std::size_t i : train) CHECK(held_subjects.count(d.bags[i].subject_id) == 0);
  }
  for (int c : seen) CHECK(c == 1);
  CHECK_THROWS_AS(GroupedKFold(d, 1, 0), Error);
  Dataset tiny;
  tiny.dim = 1;
  tiny.bags.push_back({"V1", "S1", 0, {{0.0}}, {}, {}});
  CHECK_THROWS_AS(GroupedKFold(tiny, 2, 0), Error);
}

TEST_CASE("dataset JSONL round-trips and reports line numbers") {
  SyntheticSpec s = SmallSpec();
  s.artifact_rate = 0.2;
  const Dataset d = GenerateSynthetic(s);
  const std::string text = DatasetToJsonl(d);
  CHECK(DatasetFromJsonl(text) == d);
  CHECK(DatasetToJsonl(DatasetFromJsonl(text)) == text);

  // Corrupt the third line (second bag).
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i)
    if (text[i] == '\n') {
      lines.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  lines[2] = "{\"video_id\": oops";
  std::string bad;
  for (const auto& l : lines) bad += l + "\n";
  CHECK_THROWS_WITH_AS(DatasetFromJsonl(bad), doctest::Contains("line 3"), Error);

  const std::string wrong_dim =
      "{\"format\":\"ordmil-dataset\",\"version\":1,\"dim\":2}\n"
      "{\"video_id\":\"V1\",\"subject_id\":\"S1\",\"mes\":1,\"frames\":[[1,2,3]]}\n";
  CHECK_THROWS_WITH_AS(DatasetFromJsonl(wrong_dim), doctest::Contains("line 2"), Error);
  const std::string bad_planted =
      "{\"format\":\"ordmil-dataset\",\"version\":1,\"dim\":1}\n"
      "{\"video_id\":\"V1\",\"subject_id\":\"S1\",\"mes\":2,\"frames\":[[1],[2]],"
      "\"planted_frame_labels\":[0,1]}\n";
  CHECK_THROWS_AS(DatasetFromJsonl(bad_planted), Error);
  CHECK_THROWS_AS(DatasetFromJsonl(""), Error);
  CHECK_THROWS_AS(LoadDataset("/nonexistent/dir/x.jsonl"), Error);
}

TEST_CASE("subset preserves order") {
  const Dataset d = GenerateSynthetic(SmallSpec());
  const Dataset sub = Subset(d, {4, 1, 9});
  REQUIRE(sub.bags.size() == 3);
  CHECK(sub.bags[0] == d.bags[4]);
  CHECK(sub.bags[2] == d.bags[9]);
  CHECK_THROWS_AS(Subset(d, {1000}), Error);
}
