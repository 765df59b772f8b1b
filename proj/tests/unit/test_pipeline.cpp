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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "common.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"

using namespace ordmil;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"({
  "schema_version": 1,
  "seed": 17,
  "train_on": "filtered",
  "folds": 3,
  "hidden": [8, 4],
  "synthetic": {"n_videos": 45, "frames_min": 5, "frames_max": 9, "dim": 6,
                "artifact_rate": 0.2},
  "ensemble": {"epochs": 3, "lr": 0.003, "k_negative": [1, 2, 1]},
  "regression": {"epochs": 3, "lr": 0.003, "loss": "mae", "k_negative": 2},
  "grid_step_binary": 0.25,
  "grid_step_ordinal": 0.25,
  "qc": {"lambda": 0.001, "epochs": 5}
})";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("ordmil_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CommandOptions Opts(const fs::path& out, const std::string& mode = "all") {
  CommandOptions o;
  o.out = out;
  o.mode = ParseMode(mode);
  return o;
}

void RunAll(const RunConfig& c, const fs::path& out) {
  CmdGen(c, Opts(out));
  CmdQcTrain(c, Opts(out));
  CmdQcFilter(c, Opts(out));
  CmdTrain(c, Opts(out));
  CmdTune(c, Opts(out));
  CmdEval(c, Opts(out));
}

}  // namespace

TEST_CASE("config parsing resolves seeds and validates fields") {
  const RunConfig c = ParseRunConfig(kTinyConfig);
  CHECK(c.seed == 17);
  CHECK(c.folds == 3);
  CHECK(c.train_on_filtered);
  CHECK(c.ensemble[1].k_negative == 2);
  CHECK(c.regression.loss == LossKind::kMAE);
  CHECK(c.synthetic.seed == MixSeed(17, 1));
  CHECK(c.ensemble[0].seed != c.ensemble[1].seed);
  const json r = c.Resolved();
  CHECK(r["ensemble"][2]["seed"] == c.ensemble[2].seed);
  CHECK(r["synthetic"]["seed"] == c.synthetic.seed);

  const RunConfig o = ParseRunConfig(kTinyConfig, 99);
  CHECK(o.seed == 99);
  CHECK(o.synthetic.seed == MixSeed(99, 1));

  json j = json::parse(kTinyConfig);
  j["synthetic"]["class_mix"] = {1, 2, -3, 4};
  CHECK_THROWS_WITH_AS(ParseRunConfig(j.dump()), doctest::Contains("class_mix"), Error);
  j = json::parse(kTinyConfig);
  j["synthetic"]["class_mix"] = {1, 2};
  CHECK_THROWS_WITH_AS(ParseRunConfig(j.dump()), doctest::Contains("class_mix"), Error);
  j = json::parse(kTinyConfig);
  j["regression"]["loss"] = "bce";
  CHECK_THROWS_AS(ParseRunConfig(j.dump()), Error);
  j = json::parse(kTinyConfig);
  j["epochz"] = 3;
  CHECK_THROWS_WITH_AS(ParseRunConfig(j.dump()), doctest::Contains("epochz"), Error);
  j = json::parse(kTinyConfig);
  j["schema_version"] = 2;
  CHECK_THROWS_AS(ParseRunConfig(j.dump()), Error);
  j = json::parse(kTinyConfig);
  j["grid_step_binary"] = 0.3;
  CHECK_THROWS_AS(ParseRunConfig(j.dump()), Error);
  CHECK_THROWS_AS(ParseRunConfig("{"), Error);
}

TEST_CASE("mode parsing") {
  CHECK(ParseMode("binary:2").mode == TrainMode::kBinary);
  CHECK(ParseMode("binary:2").binary_class == 2);
  CHECK(ParseMode("ensemble").mode == TrainMode::kEnsemble);
  CHECK_THROWS_AS(ParseMode("binary:3"), Error);
  CHECK_THROWS_AS(ParseMode("sum"), Error);
}

TEST_CASE("commands fail cleanly on missing inputs") {
  TempDir tmp("missing");
  const RunConfig c = ParseRunConfig(kTinyConfig);
  CHECK_THROWS_WITH_AS(CmdTrain(c, Opts(tmp.path)), doctest::Contains("missing"), Error);
  CHECK_THROWS_AS(CmdQcTrain(c, Opts(tmp.path)), Error);
  CmdGen(c, Opts(tmp.path));
  CHECK_THROWS_WITH_AS(CmdQcFilter(c, Opts(tmp.path)), doctest::Contains("svm"), Error);
  CHECK_THROWS_AS(CmdTune(c, Opts(tmp.path)), Error);
  CHECK_THROWS_AS(CmdEval(c, Opts(tmp.path)), Error);
}

TEST_CASE("full pipeline writes the fixed layout deterministically") {
  TempDir a("run_a"), b("run_b");
  const RunConfig c = ParseRunConfig(kTinyConfig);
  RunAll(c, a.path);
  RunAll(c, b.path);
  for (const char* rel :
       {"config.json", "dataset/dataset.jsonl", "dataset/filtered.jsonl", "qc/svm.json",
        "qc/svm_train.json", "qc/filter_stats.json", "models/folds.json",
        "models/fold0/gt0.json", "models/fold2/gt2.json", "models/fold1/regression.json",
        "models/fold1/gt1.loss.tsv", "thresholds/thresholds.json", "reports/report.json",
        "reports/frame_scores.tsv", "reports/regression_scores.tsv",
        "reports/confusion_video_sum.tsv", "reports/confusion_frame_regression.tsv"}) {
    INFO(rel);
    REQUIRE(fs::exists(a.path / rel));
    CHECK(Slurp(a.path / rel) == Slurp(b.path / rel));
  }
  const json report = json::parse(Slurp(a.path / "reports/report.json"));
  CHECK_NOTHROW(ValidateReport(report));
  CHECK(report["summary"]["video_kappa"].contains("sum"));
  CHECK(report["summary"]["frame_kappa"].contains("regression"));
  CHECK(report.contains("qc"));
  CHECK(report["config"]["source"] == json::parse(kTinyConfig));
  const std::string header = Slurp(a.path / "reports/frame_scores.tsv").substr(0, 80);
  CHECK(header.rfind("video_id\tframe_index\tp_gt0\tp_gt1\tp_gt2\tq\tclass_convert", 0) == 0);
}

TEST_CASE("ensemble mode trains three members per fold; single fold runs") {
  TempDir tmp("modes");
  const RunConfig c = ParseRunConfig(kTinyConfig);
  CmdGen(c, Opts(tmp.path));
  CmdQcTrain(c, Opts(tmp.path));
  CmdQcFilter(c, Opts(tmp.path));
  CommandOptions o = Opts(tmp.path, "ensemble");
  o.fold = 1;
  CmdTrain(c, o);
  CHECK(fs::exists(tmp.path / "models/fold1/gt0.json"));
  CHECK(fs::exists(tmp.path / "models/fold1/gt2.json"));
  CHECK_FALSE(fs::exists(tmp.path / "models/fold1/regression.json"));
  CHECK_FALSE(fs::exists(tmp.path / "models/fold0/gt0.json"));
  CmdTune(c, o);
  const auto t = ThresholdsFromJson(json::parse(Slurp(tmp.path / "thresholds/thresholds.json")));
  REQUIRE(t.size() == 1);
  CHECK(t[0].fold == 1);
  REQUIRE(t[0].threshold_method);
  for (int m = 0; m < 3; ++m) {
    CHECK(t[0].threshold_method->thresholds[m] >= 0.0);
    CHECK(t[0].threshold_method->thresholds[m] <= 1.0);
  }
  REQUIRE(t[0].sum_method);
  CHECK_FALSE(t[0].regression);
  CHECK_THROWS_AS(CmdTune(c, Opts(tmp.path, "regression")), Error);
  o.fold = 7;
  CHECK_THROWS_AS(CmdTrain(c, o), Error);
}

TEST_CASE("tuned thresholds match exhaustive search on the cached scores") {
  TempDir tmp("tune");
  const RunConfig c = ParseRunConfig(kTinyConfig);
  RunAll(c, tmp.path);
  const auto tuned =
      ThresholdsFromJson(json::parse(Slurp(tmp.path / "thresholds/thresholds.json")));
  // Rebuild per-fold held-out scores from the frame score dumps.
  std::map<std::string, std::vector<std::array<double, 3>>> triples;
  std::map<std::string, std::vector<double>> regression;
  {
    std::istringstream in(Slurp(tmp.path / "reports/frame_scores.tsv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream f(line);
      std::string id;
      int idx;
      double p0, p1, p2;
      f >> id >> idx >> p0 >> p1 >> p2;
      triples[id].push_back({p0, p1, p2});
    }
    std::istringstream rin(Slurp(tmp.path / "reports/regression_scores.tsv"));
    std::getline(rin, line);
    while (std::getline(rin, line)) {
      std::istringstream f(line);
      std::string id;
      int idx;
      double s, clipped;
      f >> id >> idx >> s >> clipped;
      regression[id].push_back(clipped);
    }
  }
  const Dataset ds = LoadDataset(tmp.path / "dataset/filtered.jsonl");
  const FoldAssignment folds = GroupedKFold(ds, c.folds, c.fold_seed);
  for (const FoldThresholds& ft : tuned) {
    std::vector<std::vector<std::array<double, 3>>> bt;
    std::vector<std::vector<double>> sums, reg;
    std::vector<int> labels;
    for (std::size_t i : folds.HeldOut(ds, ft.fold)) {
      const auto& t = triples.at(ds.bags[i].video_id);
      bt.push_back(t);
      std::vector<double> q;
      for (const auto& p : t) q.push_back(p[0] + p[1] + p[2]);
      sums.push_back(q);
      reg.push_back(regression.at(ds.bags[i].video_id));
      labels.push_back(ds.bags[i].mes);
    }
    const auto want_b = oracle::BruteBinary(bt, labels, 0.25);
    CHECK(ft.threshold_method->thresholds.t1 == want_b.t[0]);
    CHECK(ft.threshold_method->thresholds.t2 == want_b.t[1]);
    CHECK(ft.threshold_method->thresholds.t3 == want_b.t[2]);
    const auto want_s = oracle::BruteOrdinal(sums, labels, 0.25);
    CHECK(ft.sum_method->thresholds.t0 == want_s.t[0]);
    CHECK(ft.sum_method->thresholds.t1 == want_s.t[1]);
    CHECK(ft.sum_method->thresholds.t2 == want_s.t[2]);
    const auto want_r = oracle::BruteOrdinal(reg, labels, 0.25);
    CHECK(ft.regression->thresholds.t0 == want_r.t[0]);
    CHECK(ft.regression->kappa == doctest::Approx(want_r.kappa).epsilon(1e-12));
  }
}

TEST_CASE("a perfect scorer yields kappa one everywhere") {
  SyntheticSpec spec;
  spec.n_videos = 40;
  spec.frames_min = 4;
  spec.frames_max = 8;
  spec.seed = 2;
  const Dataset ds = GenerateSynthetic(spec);
  const FoldAssignment folds = GroupedKFold(ds, 2, 1);
  // Scores derived from the planted labels themselves.
  std::vector<BagScores> scores(ds.bags.size());
  for (std::size_t i = 0; i < ds.bags.size(); ++i)
    for (int l : *ds.bags[i].planted_frame_labels) {
      scores[i].triples.push_back(
          {l > 0 ? 0.9 : 0.1, l > 1 ? 0.9 : 0.1, l > 2 ? 0.9 : 0.1});
      scores[i].regression.push_back(static_cast<double>(l));
    }
  std::vector<FoldThresholds> th;
  for (int f = 0; f < 2; ++f)
    th.push_back(TuneFold(ds, folds.HeldOut(ds, f), scores, f, 0.1, 0.1));
  const json r = BuildReport(ds, folds, scores, th, json{{"resolved", {{"seed", 1}}}});
  CHECK_NOTHROW(ValidateReport(r));
  for (const char* level : {"video_kappa", "frame_kappa"})
    for (const char* m : {"convert", "threshold", "sum", "regression"}) {
      INFO(level << " " << m);
      CHECK(r["summary"][level][m]["pooled"] == 1.0);
    }
  for (const char* m : {"gt0", "gt1", "gt2"}) CHECK(r["summary"]["auc"][m]["mean"] == 1.0);
}

TEST_CASE("report validation catches structural damage") {
  SyntheticSpec spec;
  spec.n_videos = 20;
  spec.seed = 3;
  const Dataset ds = GenerateSynthetic(spec);
  const FoldAssignment folds = GroupedKFold(ds, 2, 1);
  std::vector<BagScores> scores(ds.bags.size());
  for (std::size_t i = 0; i < ds.bags.size(); ++i)
    for (std::size_t f = 0; f < ds.bags[i].size(); ++f)
      scores[i].regression.push_back(ds.bags[i].mes * 0.9 + 0.1);
  std::vector<FoldThresholds> th;
  for (int f = 0; f < 2; ++f)
    th.push_back(TuneFold(ds, folds.HeldOut(ds, f), scores, f, 0.1, 0.1));
  const json good = BuildReport(ds, folds, scores, th, json{{"resolved", {{"seed", 4}}}});
  CHECK_NOTHROW(ValidateReport(good));
  CHECK(good["methods"] == json::array({"regression"}));
  json bad = good;
  bad.erase("summary");
  CHECK_THROWS_AS(ValidateReport(bad), Error);
  bad = good;
  bad["version"] = 9;
  CHECK_THROWS_AS(ValidateReport(bad), Error);
  bad = good;
  bad["confusion"]["video"]["regression"][0] = json::array({1, 2});
  CHECK_THROWS_AS(ValidateReport(bad), Error);
  bad = good;
  bad["summary"]["video_kappa"]["regression"]["lower"] = 2.0;
  CHECK_THROWS_AS(ValidateReport(bad), Error);
}

TEST_CASE("thresholds JSON round-trips") {
  std::vector<FoldThresholds> t(2);
  t[0].fold = 0;
  t[0].threshold_method = BinaryGridResult{{0.25, 0.5, 0.75}, 0.8};
  t[0].sum_method = OrdinalGridResult{{0.5, 1.25, 2.0}, 0.9};
  t[1].fold = 1;
  t[1].regression = OrdinalGridResult{{0.75, 1.5, 2.25}, 0.7};
  const auto back = ThresholdsFromJson(ThresholdsToJson(t, 0.25, 0.25, json::object()));
  REQUIRE(back.size() == 2);
  CHECK(back[0].threshold_method->thresholds == t[0].threshold_method->thresholds);
  CHECK(back[0].sum_method->thresholds.t1 == 1.25);
  CHECK(back[1].regression->kappa == 0.7);
  CHECK_FALSE(back[1].sum_method);
  CHECK_THROWS_AS(ThresholdsFromJson(json{{"format", "x"}}), Error);
}
