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

// Exercises the public C interface only; links against the shared library.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "ordmil/ordmil.h"

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({"schema_version":1,"seed":3,"folds":2,"hidden":[4],
  "synthetic":{"n_videos":16,"frames_min":3,"frames_max":5,"dim":4},
  "ensemble":{"epochs":1,"lr":0.01,"k_negative":[1,1,1]},
  "regression":{"epochs":1,"lr":0.01,"k_negative":1},
  "grid_step_binary":0.25,"grid_step_ordinal":0.25})";

}  // namespace

TEST_CASE("status reporting") {
  ordmil_config* c = nullptr;
  CHECK(ordmil_config_parse("{", nullptr, &c) == ORDMIL_ERR_PARSE);
  CHECK(c == nullptr);
  CHECK(std::strlen(ordmil_last_error()) > 0);
  CHECK(ordmil_config_parse(nullptr, nullptr, &c) == ORDMIL_ERR_INVALID_ARGUMENT);
  CHECK(ordmil_config_load("/nonexistent/cfg.json", nullptr, &c) == ORDMIL_ERR_IO);
  CHECK(std::string(ordmil_status_name(ORDMIL_OK)) == "ok");
  CHECK(std::strlen(ordmil_version()) > 0);
}

TEST_CASE("metric and aggregation entry points") {
  const double s[] = {0.1, 0.4, 0.35, 0.8};
  const int y[] = {0, 0, 1, 1};
  double auc = 0;
  CHECK(ordmil_roc_auc(s, y, 4, &auc) == ORDMIL_OK);
  CHECK(auc == 0.75);
  const int one[] = {1, 1, 1, 1};
  CHECK(ordmil_roc_auc(s, one, 4, &auc) == ORDMIL_ERR_UNDEFINED);

  const int t[] = {0, 0, 3, 3}, p[] = {3, 3, 0, 0};
  double k = 0;
  CHECK(ordmil_kappa_quadratic(t, p, 4, 4, &k) == ORDMIL_OK);
  CHECK(k == doctest::Approx(-1.0));

  const int ratings[] = {0, 1, 1, 0};
  CHECK(ordmil_fleiss_kappa(ratings, 2, 2, 2, &k) == ORDMIL_OK);
  CHECK(k == doctest::Approx(-1.0));

  const double v[] = {0.0, 1.0};
  double mean, lo, hi;
  CHECK(ordmil_fold_ci(v, 2, 1.96, &mean, &lo, &hi) == ORDMIL_OK);
  CHECK(mean == 0.5);
  CHECK(lo < mean);
  CHECK(hi > mean);

  int label = -1;
  CHECK(ordmil_adjust_frame_label(3, 1, &label) == ORDMIL_OK);
  CHECK(label == 1);
  const int votes[] = {2, 2, 1};
  CHECK(ordmil_majority_consensus(votes, 3, &label) == ORDMIL_OK);
  CHECK(label == 2);

  const double tri[] = {0.9, 0.6, 0.1};
  double probs[4];
  CHECK(ordmil_aggregate_convert(tri, &label, probs) == ORDMIL_OK);
  CHECK(label == 2);
  CHECK(probs[0] + probs[1] + probs[2] + probs[3] == doctest::Approx(1.0));
  const double bt[] = {0.5, 0.5, 0.5};
  CHECK(ordmil_aggregate_threshold(tri, bt, &label) == ORDMIL_OK);
  CHECK(label == 2);
  CHECK(ordmil_aggregate_sum(tri) == doctest::Approx(1.6));
  const double ot[] = {0.5, 1.5, 2.5};
  CHECK(ordmil_bin_ordinal(1.6, ot, &label) == ORDMIL_OK);
  CHECK(label == 2);
  const double bad_ot[] = {1.5, 0.5, 2.5};
  CHECK(ordmil_bin_ordinal(1.6, bad_ot, &label) == ORDMIL_ERR_INVALID_ARGUMENT);
  double clipped;
  CHECK(ordmil_clip_score(-4.0, &clipped) == ORDMIL_OK);
  CHECK(clipped == 0.0);
}

TEST_CASE("commands and handles through the C interface") {
  const fs::path out =
      fs::temp_directory_path() / ("ordmil_capi_" + std::to_string(::getpid()));
  fs::remove_all(out);
  ordmil_config* c = nullptr;
  REQUIRE(ordmil_config_parse(kConfig, nullptr, &c) == ORDMIL_OK);
  CHECK(std::string(ordmil_config_resolved_json(c)).find("\"schema_version\"") !=
        std::string::npos);

  ordmil_cmd_options o = ordmil_cmd_options_default();
  CHECK(ordmil_cmd_train(c, &o) == ORDMIL_ERR_INVALID_ARGUMENT);  // no out_dir
  const std::string out_s = out.string();
  o.out_dir = out_s.c_str();
  CHECK(ordmil_cmd_train(c, &o) == ORDMIL_ERR_IO);  // dataset missing
  REQUIRE(ordmil_cmd_gen(c, &o) == ORDMIL_OK);
  CHECK(std::string(ordmil_last_summary()).find("16 bags") != std::string::npos);
  o.mode = "bogus";
  CHECK(ordmil_cmd_train(c, &o) == ORDMIL_ERR_INVALID_ARGUMENT);
  o.mode = "all";
  REQUIRE(ordmil_cmd_train(c, &o) == ORDMIL_OK);
  REQUIRE(ordmil_cmd_tune(c, &o) == ORDMIL_OK);
  REQUIRE(ordmil_cmd_eval(c, &o) == ORDMIL_OK);
  CHECK(fs::exists(out / "reports" / "report.json"));

  ordmil_dataset* d = nullptr;
  REQUIRE(ordmil_dataset_load((out / "dataset" / "dataset.jsonl").c_str(), &d) == ORDMIL_OK);
  CHECK(ordmil_dataset_num_bags(d) == 16);
  CHECK(ordmil_dataset_dim(d) == 4);
  size_t hist[4];
  CHECK(ordmil_dataset_histogram(d, hist) == ORDMIL_OK);
  CHECK(hist[0] + hist[1] + hist[2] + hist[3] == 16);
  int mes;
  size_t frames;
  CHECK(ordmil_dataset_bag_info(d, 0, &mes, &frames) == ORDMIL_OK);
  CHECK(frames >= 3);
  std::vector<double> f(4);
  CHECK(ordmil_dataset_frame(d, 0, 0, f.data(), 4) == ORDMIL_OK);
  CHECK(ordmil_dataset_frame(d, 0, 0, f.data(), 3) == ORDMIL_ERR_SHAPE_MISMATCH);
  CHECK(ordmil_dataset_bag_info(d, 99, &mes, &frames) == ORDMIL_ERR_INVALID_ARGUMENT);

  ordmil_dataset* g = nullptr;
  REQUIRE(ordmil_dataset_generate(c, &g) == ORDMIL_OK);
  const fs::path copy = out / "copy.jsonl";
  CHECK(ordmil_dataset_save(g, copy.c_str()) == ORDMIL_OK);

  ordmil_scorer* s = nullptr;
  REQUIRE(ordmil_scorer_load((out / "models" / "fold0" / "gt1.json").c_str(), &s) ==
          ORDMIL_OK);
  CHECK(ordmil_scorer_input_dim(s) == 4);
  CHECK(ordmil_scorer_is_sigmoid(s) == 1);
  double score = -1;
  CHECK(ordmil_scorer_score(s, f.data(), 4, &score) == ORDMIL_OK);
  CHECK(score > 0.0);
  CHECK(score < 1.0);
  CHECK(ordmil_scorer_score(s, f.data(), 2, &score) == ORDMIL_ERR_SHAPE_MISMATCH);

  ordmil_svm* svm = nullptr;
  CHECK(ordmil_svm_load((out / "qc" / "svm.json").c_str(), &svm) == ORDMIL_ERR_IO);

  ordmil_scorer_free(s);
  ordmil_dataset_free(g);
  ordmil_dataset_free(d);
  ordmil_config_free(c);
  fs::remove_all(out);
}
