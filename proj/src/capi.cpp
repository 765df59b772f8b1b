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

#include "ordmil/ordmil.h"

#include <exception>
#include <new>
#include <string>

#include "common.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "ordinal.hpp"
#include "pipeline.hpp"
#include "qcfilter.hpp"
#include "scorer.hpp"

struct ordmil_config {
  ordmil::RunConfig config;
};
struct ordmil_dataset {
  ordmil::Dataset dataset;
};
struct ordmil_scorer {
  ordmil::ScorerModel model;
};
struct ordmil_svm {
  ordmil::LinearSvm model;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_summary;
thread_local std::string g_scratch;

ordmil_status StatusOf(ordmil::ErrorKind kind) {
  switch (kind) {
    case ordmil::ErrorKind::kInvalidArgument: return ORDMIL_ERR_INVALID_ARGUMENT;
    case ordmil::ErrorKind::kParse: return ORDMIL_ERR_PARSE;
    case ordmil::ErrorKind::kIo: return ORDMIL_ERR_IO;
    case ordmil::ErrorKind::kShapeMismatch: return ORDMIL_ERR_SHAPE_MISMATCH;
    case ordmil::ErrorKind::kUndefined: return ORDMIL_ERR_UNDEFINED;
  }
  return ORDMIL_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
ordmil_status Guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return ORDMIL_OK;
  } catch (const ordmil::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ORDMIL_ERR_INTERNAL;
}

void NotNull(const void* p, const char* what) {
  ordmil::Require(p != nullptr, std::string(what) + " must not be NULL");
}

ordmil::CommandOptions ToOptions(const ordmil_cmd_options* o) {
  NotNull(o, "options");
  NotNull(o->out_dir, "options.out_dir");
  ordmil::CommandOptions c;
  c.out = o->out_dir;
  c.mode = ordmil::ParseMode(o->mode ? o->mode : "all");
  if (o->fold >= 0) c.fold = o->fold;
  else ordmil::Require(o->fold == -1, "options.fold must be >= 0 or -1");
  if (o->grid_step > 0.0) c.grid_step = o->grid_step;
  return c;
}

template <typename Cmd>
ordmil_status RunCommand(const ordmil_config* config, const ordmil_cmd_options* options,
                         Cmd cmd) {
  return Guard([&] {
    NotNull(config, "config");
    g_last_summary = cmd(config->config, ToOptions(options));
  });
}

ordmil::FrameTriple Triple(const double t[3]) {
  NotNull(t, "triple");
  return {t[0], t[1], t[2]};
}

}  // namespace

extern "C" {

const char* ordmil_version(void) { return "1.0.0"; }
const char* ordmil_last_error(void) { return g_last_error.c_str(); }
const char* ordmil_last_summary(void) { return g_last_summary.c_str(); }

const char* ordmil_status_name(ordmil_status status) {
  switch (status) {
    case ORDMIL_OK: return "ok";
    case ORDMIL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ORDMIL_ERR_PARSE: return "parse error";
    case ORDMIL_ERR_IO: return "io error";
    case ORDMIL_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case ORDMIL_ERR_UNDEFINED: return "undefined";
    case ORDMIL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// -- config / commands

ordmil_status ordmil_config_load(const char* path, const uint64_t* seed_override,
                                 ordmil_config** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    std::optional<std::uint64_t> seed;
    if (seed_override) seed = *seed_override;
    *out = new ordmil_config{ordmil::LoadRunConfig(path, seed)};
  });
}

ordmil_status ordmil_config_parse(const char* text, const uint64_t* seed_override,
                                  ordmil_config** out) {
  return Guard([&] {
    NotNull(text, "text");
    NotNull(out, "out");
    std::optional<std::uint64_t> seed;
    if (seed_override) seed = *seed_override;
    *out = new ordmil_config{ordmil::ParseRunConfig(text, seed)};
  });
}

void ordmil_config_free(ordmil_config* config) { delete config; }

const char* ordmil_config_resolved_json(const ordmil_config* config) {
  if (!config) return "";
  g_scratch = config->config.Resolved().dump(2);
  return g_scratch.c_str();
}

ordmil_cmd_options ordmil_cmd_options_default(void) {
  return ordmil_cmd_options{nullptr, nullptr, -1, 0.0};
}

ordmil_status ordmil_cmd_gen(const ordmil_config* c, const ordmil_cmd_options* o) {
  return RunCommand(c, o, ordmil::CmdGen);
}
ordmil_status ordmil_cmd_qc_train(const ordmil_config* c, const ordmil_cmd_options* o) {
  return RunCommand(c, o, ordmil::CmdQcTrain);
}
ordmil_status ordmil_cmd_qc_filter(const ordmil_config* c, const ordmil_cmd_options* o) {
  return RunCommand(c, o, ordmil::CmdQcFilter);
}
ordmil_status ordmil_cmd_train(const ordmil_config* c, const ordmil_cmd_options* o) {
  return RunCommand(c, o, ordmil::CmdTrain);
}
ordmil_status ordmil_cmd_tune(const ordmil_config* c, const ordmil_cmd_options* o) {
  return RunCommand(c, o, ordmil::CmdTune);
}
ordmil_status ordmil_cmd_eval(const ordmil_config* c, const ordmil_cmd_options* o) {
  return RunCommand(c, o, ordmil::CmdEval);
}

// -- datasets

ordmil_status ordmil_dataset_load(const char* path, ordmil_dataset** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new ordmil_dataset{ordmil::LoadDataset(path)};
  });
}

ordmil_status ordmil_dataset_generate(const ordmil_config* config, ordmil_dataset** out) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(out, "out");
    *out = new ordmil_dataset{ordmil::GenerateSynthetic(config->config.synthetic)};
  });
}

ordmil_status ordmil_dataset_save(const ordmil_dataset* dataset, const char* path) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(path, "path");
    ordmil::SaveDataset(dataset->dataset, path);
  });
}

void ordmil_dataset_free(ordmil_dataset* dataset) { delete dataset; }

size_t ordmil_dataset_dim(const ordmil_dataset* dataset) {
  return dataset ? dataset->dataset.dim : 0;
}

size_t ordmil_dataset_num_bags(const ordmil_dataset* dataset) {
  return dataset ? dataset->dataset.bags.size() : 0;
}

ordmil_status ordmil_dataset_bag_info(const ordmil_dataset* dataset, size_t bag,
                                      int* mes, size_t* num_frames) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    ordmil::Require(bag < dataset->dataset.bags.size(), "bag index out of range");
    const ordmil::VideoBag& b = dataset->dataset.bags[bag];
    if (mes) *mes = b.mes;
    if (num_frames) *num_frames = b.frames.size();
  });
}

ordmil_status ordmil_dataset_frame(const ordmil_dataset* dataset, size_t bag,
                                   size_t frame, double* out, size_t dim) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const ordmil::Dataset& ds = dataset->dataset;
    ordmil::Require(bag < ds.bags.size(), "bag index out of range");
    ordmil::Require(frame < ds.bags[bag].frames.size(), "frame index out of range");
    ordmil::Require(dim == ds.dim, "output capacity must equal the dataset dimension",
                    ordmil::ErrorKind::kShapeMismatch);
    const ordmil::FrameVec& f = ds.bags[bag].frames[frame];
    std::copy(f.begin(), f.end(), out);
  });
}

ordmil_status ordmil_dataset_histogram(const ordmil_dataset* dataset, size_t out[4]) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const auto h = ordmil::ClassHistogram(dataset->dataset);
    for (int c = 0; c < ordmil::kNumClasses; ++c) out[c] = h[c];
  });
}

// -- scorers / svm

ordmil_status ordmil_scorer_load(const char* path, ordmil_scorer** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new ordmil_scorer{ordmil::LoadScorer(path)};
  });
}

void ordmil_scorer_free(ordmil_scorer* scorer) { delete scorer; }

size_t ordmil_scorer_input_dim(const ordmil_scorer* scorer) {
  return scorer ? scorer->model.input_dim() : 0;
}

int ordmil_scorer_is_sigmoid(const ordmil_scorer* scorer) {
  return scorer && scorer->model.head == ordmil::Head::kSigmoid ? 1 : 0;
}

ordmil_status ordmil_scorer_score(const ordmil_scorer* scorer, const double* frame,
                                  size_t dim, double* out) {
  return Guard([&] {
    NotNull(scorer, "scorer");
    NotNull(frame, "frame");
    NotNull(out, "out");
    *out = ordmil::Forward(scorer->model, std::span<const double>(frame, dim));
  });
}

ordmil_status ordmil_svm_load(const char* path, ordmil_svm** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new ordmil_svm{ordmil::LoadSvm(path)};
  });
}

void ordmil_svm_free(ordmil_svm* svm) { delete svm; }

ordmil_status ordmil_svm_predict(const ordmil_svm* svm, const double* frame,
                                 size_t dim, int* out) {
  return Guard([&] {
    NotNull(svm, "svm");
    NotNull(frame, "frame");
    NotNull(out, "out");
    *out = ordmil::SvmPredict(svm->model, std::span<const double>(frame, dim));
  });
}

// -- ordinal

ordmil_status ordmil_aggregate_convert(const double triple[3], int* label,
                                       double probs[4]) {
  return Guard([&] {
    NotNull(label, "label");
    const ordmil::ConvertResult r = ordmil::AggregateConvert(Triple(triple));
    *label = r.label;
    if (probs) std::copy(r.probs.begin(), r.probs.end(), probs);
  });
}

ordmil_status ordmil_aggregate_threshold(const double triple[3],
                                         const double thresholds[3], int* label) {
  return Guard([&] {
    NotNull(thresholds, "thresholds");
    NotNull(label, "label");
    *label = ordmil::AggregateThreshold(
        Triple(triple), {thresholds[0], thresholds[1], thresholds[2]});
  });
}

double ordmil_aggregate_sum(const double triple[3]) {
  return triple ? triple[0] + triple[1] + triple[2] : 0.0;
}

ordmil_status ordmil_bin_ordinal(double score, const double thresholds[3], int* label) {
  return Guard([&] {
    NotNull(thresholds, "thresholds");
    NotNull(label, "label");
    *label = ordmil::BinOrdinal(score, {thresholds[0], thresholds[1], thresholds[2]});
  });
}

ordmil_status ordmil_clip_score(double score, double* out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = ordmil::ClipScore(score);
  });
}

// -- metrics

ordmil_status ordmil_roc_auc(const double* scores, const int* labels, size_t n,
                             double* out) {
  return Guard([&] {
    NotNull(scores, "scores");
    NotNull(labels, "labels");
    NotNull(out, "out");
    *out = ordmil::RocAuc({scores, n}, {labels, n});
  });
}

ordmil_status ordmil_kappa_quadratic(const int* truth, const int* pred, size_t n,
                                     int classes, double* out) {
  return Guard([&] {
    NotNull(truth, "truth");
    NotNull(pred, "pred");
    NotNull(out, "out");
    *out = ordmil::CohenKappaQuadratic(std::span<const int>(truth, n),
                                       std::span<const int>(pred, n), classes);
  });
}

ordmil_status ordmil_fleiss_kappa(const int* ratings, size_t items, size_t raters,
                                  int categories, double* out) {
  return Guard([&] {
    NotNull(ratings, "ratings");
    NotNull(out, "out");
    ordmil::RatingTable t;
    t.items = items;
    t.raters = raters;
    t.categories = categories;
    t.ratings.assign(ratings, ratings + items * raters);
    *out = ordmil::FleissKappa(t);
  });
}

ordmil_status ordmil_fold_ci(const double* values, size_t n, double z, double* mean,
                             double* lower, double* upper) {
  return Guard([&] {
    NotNull(values, "values");
    const ordmil::FoldCi ci = ordmil::FoldConfidenceInterval({values, n}, z);
    if (mean) *mean = ci.mean;
    if (lower) *lower = ci.lower;
    if (upper) *upper = ci.upper;
  });
}

ordmil_status ordmil_adjust_frame_label(int frame_label, int video_label, int* out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = ordmil::AdjustFrameLabel(frame_label, video_label);
  });
}

ordmil_status ordmil_majority_consensus(const int* ratings, size_t n, int* out) {
  return Guard([&] {
    NotNull(ratings, "ratings");
    NotNull(out, "out");
    *out = ordmil::MajorityConsensus({ratings, n});
  });
}

}  // extern "C"
