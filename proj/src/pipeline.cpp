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

#include "pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "common.hpp"
#include "metrics.hpp"
#include "parallel.hpp"

namespace ordmil {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// -- small io helpers --------------------------------------------------------

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + path.parent_path().string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

json ReadJson(const fs::path& path) {
  const std::string text = ReadFile(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void RequireFile(const fs::path& path, const std::string& what) {
  if (!fs::exists(path))
    Fail(ErrorKind::kIo, "missing " + what + ": " + path.string());
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

fs::path DatasetPath(const fs::path& out) { return out / "dataset" / "dataset.jsonl"; }
fs::path FilteredPath(const fs::path& out) { return out / "dataset" / "filtered.jsonl"; }
fs::path FoldDir(const fs::path& out, int f) {
  return out / "models" / ("fold" + std::to_string(f));
}
fs::path MemberPath(const fs::path& out, int f, int m) {
  return FoldDir(out, f) / ("gt" + std::to_string(m) + ".json");
}
fs::path RegressionPath(const fs::path& out, int f) {
  return FoldDir(out, f) / "regression.json";
}
fs::path ThresholdsPath(const fs::path& out) {
  return out / "thresholds" / "thresholds.json";
}

// -- config parsing ----------------------------------------------------------

void CheckKeys(const json& j, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    Fail(ErrorKind::kParse, "config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key()))
      Fail(ErrorKind::kParse, "config: unknown key '" + where + "." + it.key() + "'");
}

template <typename T>
T Get(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    Fail(ErrorKind::kParse, "config: '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig ParseRunConfig(const std::string& text,
                         std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  CheckKeys(j, "config",
            {"schema_version", "seed", "synthetic", "folds", "hidden", "ensemble",
             "regression", "grid_step_binary", "grid_step_ordinal", "qc",
             "train_on"});
  const int version = Get<int>(j, "schema_version", -1, "config");
  if (version != kConfigSchemaVersion)
    Fail(ErrorKind::kParse, "config: schema_version must be " +
                                std::to_string(kConfigSchemaVersion));

  RunConfig c;
  c.source = j;
  c.seed = seed_override ? *seed_override : Get<std::uint64_t>(j, "seed", 0, "config");

  const json syn = j.value("synthetic", json::object());
  CheckKeys(syn, "synthetic",
            {"n_videos", "frames_min", "frames_max", "dim", "class_mix",
             "frame_severity_decay", "noise_std", "anchor_separation",
             "artifact_rate", "max_videos_per_subject", "seed"});
  SyntheticSpec& s = c.synthetic;
  s.n_videos = Get<std::size_t>(syn, "n_videos", s.n_videos, "synthetic");
  s.frames_min = Get<std::size_t>(syn, "frames_min", s.frames_min, "synthetic");
  s.frames_max = Get<std::size_t>(syn, "frames_max", s.frames_max, "synthetic");
  s.dim = Get<std::size_t>(syn, "dim", s.dim, "synthetic");
  if (syn.contains("class_mix")) {
    const auto mix = Get<std::vector<double>>(syn, "class_mix", {}, "synthetic");
    if (mix.size() != static_cast<std::size_t>(kNumClasses))
      Fail(ErrorKind::kParse, "config: 'synthetic.class_mix' needs 4 weights");
    std::copy(mix.begin(), mix.end(), s.class_mix.begin());
  }
  s.frame_severity_decay =
      Get<double>(syn, "frame_severity_decay", s.frame_severity_decay, "synthetic");
  s.noise_std = Get<double>(syn, "noise_std", s.noise_std, "synthetic");
  s.anchor_separation =
      Get<double>(syn, "anchor_separation", s.anchor_separation, "synthetic");
  s.artifact_rate = Get<double>(syn, "artifact_rate", s.artifact_rate, "synthetic");
  s.max_videos_per_subject = Get<std::size_t>(syn, "max_videos_per_subject",
                                              s.max_videos_per_subject, "synthetic");
  s.seed = Get<std::uint64_t>(syn, "seed", MixSeed(c.seed, 1), "synthetic");
  try {
    ValidateSpec(s);
  } catch (const Error& e) {
    Fail(ErrorKind::kParse, std::string("config: synthetic: ") + e.what());
  }

  c.folds = Get<int>(j, "folds", 5, "config");
  if (c.folds < 2) Fail(ErrorKind::kParse, "config: 'folds' must be >= 2");
  c.fold_seed = MixSeed(c.seed, 2);

  const auto hidden =
      Get<std::vector<std::size_t>>(j, "hidden", {64, 32}, "config");

  const json ens = j.value("ensemble", json::object());
  CheckKeys(ens, "ensemble",
            {"epochs", "lr", "weight_decay", "k_negative", "shuffle", "seeds"});
  const auto k_values = Get<std::vector<std::size_t>>(
      ens, "k_negative", {40, 100, 40}, "ensemble");
  if (k_values.size() != static_cast<std::size_t>(kEnsembleSize))
    Fail(ErrorKind::kParse, "config: 'ensemble.k_negative' needs 3 values");
  std::vector<std::uint64_t> seeds;
  if (ens.contains("seeds")) {
    seeds = Get<std::vector<std::uint64_t>>(ens, "seeds", {}, "ensemble");
    if (seeds.size() != static_cast<std::size_t>(kEnsembleSize))
      Fail(ErrorKind::kParse, "config: 'ensemble.seeds' needs 3 values");
  }
  for (int m = 0; m < kEnsembleSize; ++m) {
    TrainConfig& t = c.ensemble[m];
    t.epochs = Get<int>(ens, "epochs", 100, "ensemble");
    t.lr = Get<double>(ens, "lr", 1e-5, "ensemble");
    t.weight_decay = Get<double>(ens, "weight_decay", 0.01, "ensemble");
    t.shuffle = Get<bool>(ens, "shuffle", true, "ensemble");
    t.loss = LossKind::kBCE;
    t.k_negative = k_values[m];
    t.seed = seeds.empty() ? MixSeed(c.seed, 10 + m) : seeds[m];
    t.hidden = hidden;
  }

  const json reg = j.value("regression", json::object());
  CheckKeys(reg, "regression",
            {"epochs", "lr", "weight_decay", "k_negative", "shuffle", "seed", "loss"});
  TrainConfig& r = c.regression;
  r.epochs = Get<int>(reg, "epochs", 100, "regression");
  r.lr = Get<double>(reg, "lr", 1e-5, "regression");
  r.weight_decay = Get<double>(reg, "weight_decay", 0.01, "regression");
  r.shuffle = Get<bool>(reg, "shuffle", true, "regression");
  r.k_negative = Get<std::size_t>(reg, "k_negative", 10, "regression");
  r.seed = Get<std::uint64_t>(reg, "seed", MixSeed(c.seed, 20), "regression");
  r.hidden = hidden;
  try {
    r.loss = ParseLossKind(Get<std::string>(reg, "loss", "mae", "regression"));
  } catch (const Error& e) {
    Fail(ErrorKind::kParse, std::string("config: regression.loss: ") + e.what());
  }

  try {
    for (const TrainConfig& t : c.ensemble) t.Validate();
    r.Validate();
    Require(LossMatchesHead(r.loss, Head::kLinear),
            "regression.loss '" + ToString(r.loss) + "' needs a sigmoid head");
  } catch (const Error& e) {
    Fail(ErrorKind::kParse, std::string("config: ") + e.what());
  }

  c.grid_step_binary = Get<double>(j, "grid_step_binary", kDefaultGridStep, "config");
  c.grid_step_ordinal = Get<double>(j, "grid_step_ordinal", kDefaultGridStep, "config");
  try {
    GridValues(c.grid_step_binary, 1.0);
    GridValues(c.grid_step_ordinal, 3.0);
  } catch (const Error& e) {
    Fail(ErrorKind::kParse, std::string("config: ") + e.what());
  }

  const json qc = j.value("qc", json::object());
  CheckKeys(qc, "qc", {"lambda", "epochs", "seed", "train_fraction"});
  c.qc.svm.lambda = Get<double>(qc, "lambda", 1e-3, "qc");
  c.qc.svm.epochs = Get<int>(qc, "epochs", 20, "qc");
  c.qc.svm.seed = Get<std::uint64_t>(qc, "seed", MixSeed(c.seed, 30), "qc");
  c.qc.train_fraction = Get<double>(qc, "train_fraction", 0.5, "qc");
  if (!(c.qc.svm.lambda > 0.0) || c.qc.svm.epochs < 1 ||
      !(c.qc.train_fraction > 0.0 && c.qc.train_fraction < 1.0))
    Fail(ErrorKind::kParse,
         "config: qc needs lambda > 0, epochs >= 1, 0 < train_fraction < 1");

  const std::string train_on = Get<std::string>(j, "train_on", "raw", "config");
  if (train_on != "raw" && train_on != "filtered")
    Fail(ErrorKind::kParse, "config: 'train_on' must be \"raw\" or \"filtered\"");
  c.train_on_filtered = train_on == "filtered";
  return c;
}

RunConfig LoadRunConfig(const fs::path& path,
                        std::optional<std::uint64_t> seed_override) {
  return ParseRunConfig(ReadFile(path), seed_override);
}

json RunConfig::Resolved() const {
  auto train = [](const TrainConfig& t) {
    return json{{"epochs", t.epochs},         {"lr", t.lr},
                {"weight_decay", t.weight_decay}, {"loss", ToString(t.loss)},
                {"k_negative", t.k_negative}, {"seed", t.seed},
                {"shuffle", t.shuffle},       {"hidden", t.hidden}};
  };
  json ens = json::array();
  for (const TrainConfig& t : ensemble) ens.push_back(train(t));
  const SyntheticSpec& s = synthetic;
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"seed", seed},
      {"synthetic",
       {{"n_videos", s.n_videos},
        {"frames_min", s.frames_min},
        {"frames_max", s.frames_max},
        {"dim", s.dim},
        {"class_mix", s.class_mix},
        {"frame_severity_decay", s.frame_severity_decay},
        {"noise_std", s.noise_std},
        {"anchor_separation", s.anchor_separation},
        {"artifact_rate", s.artifact_rate},
        {"max_videos_per_subject", s.max_videos_per_subject},
        {"seed", s.seed}}},
      {"folds", folds},
      {"fold_seed", fold_seed},
      {"ensemble", ens},
      {"regression", train(regression)},
      {"grid_step_binary", grid_step_binary},
      {"grid_step_ordinal", grid_step_ordinal},
      {"qc",
       {{"lambda", qc.svm.lambda},
        {"epochs", qc.svm.epochs},
        {"seed", qc.svm.seed},
        {"train_fraction", qc.train_fraction}}},
      {"train_on", train_on_filtered ? "filtered" : "raw"}};
}

ModeSpec ParseMode(const std::string& s) {
  if (s == "all") return {TrainMode::kAll, 0};
  if (s == "ensemble") return {TrainMode::kEnsemble, 0};
  if (s == "regression") return {TrainMode::kRegression, 0};
  if (s.rfind("binary:", 0) == 0 && s.size() == 8 && s[7] >= '0' && s[7] <= '2')
    return {TrainMode::kBinary, s[7] - '0'};
  Fail(ErrorKind::kInvalidArgument,
       "unknown mode '" + s + "' (expected binary:0|1|2, ensemble, regression, all)");
}

namespace {

json Echo(const RunConfig& c) {
  return json{{"source", c.source}, {"resolved", c.Resolved()}};
}

bool WantsEnsemble(const ModeSpec& m) {
  return m.mode == TrainMode::kEnsemble || m.mode == TrainMode::kAll;
}
bool WantsRegression(const ModeSpec& m) {
  return m.mode == TrainMode::kRegression || m.mode == TrainMode::kAll;
}

Dataset LoadWorkingDataset(const RunConfig& config, const fs::path& out) {
  const fs::path path = config.train_on_filtered ? FilteredPath(out) : DatasetPath(out);
  RequireFile(path, config.train_on_filtered ? "filtered dataset (run qc filter)"
                                             : "dataset (run gen)");
  return LoadDataset(path);
}

json FoldsToJson(const FoldAssignment& f) {
  return json{{"k", f.k}, {"fold_of_subject", f.fold_of_subject}};
}

std::vector<int> FoldsToRun(const RunConfig& config, const CommandOptions& opts) {
  if (opts.fold) {
    Require(*opts.fold >= 0 && *opts.fold < config.folds,
            "--fold must be in [0, " + std::to_string(config.folds) + ")");
    return {*opts.fold};
  }
  std::vector<int> all(config.folds);
  for (int f = 0; f < config.folds; ++f) all[f] = f;
  return all;
}

TrainConfig ForFold(TrainConfig t, int fold) {
  t.seed = MixSeed(t.seed, 100 + static_cast<std::uint64_t>(fold));
  return t;
}

std::string Histogram(const Dataset& ds) {
  const auto h = ClassHistogram(ds);
  std::string s;
  for (int c = 0; c < kNumClasses; ++c)
    s += (c ? " " : "") + std::string("mes") + std::to_string(c) + "=" +
         std::to_string(h[c]);
  return s;
}

}  // namespace

// -- gen ---------------------------------------------------------------------

std::string CmdGen(const RunConfig& config, const CommandOptions& opts) {
  const Dataset ds = GenerateSynthetic(config.synthetic);
  WriteFile(opts.out / "config.json", Echo(config).dump(2) + "\n");
  WriteFile(DatasetPath(opts.out), DatasetToJsonl(ds));
  std::size_t frames = 0;
  for (const VideoBag& b : ds.bags) frames += b.size();
  return "wrote " + DatasetPath(opts.out).string() + ": " +
         std::to_string(ds.bags.size()) + " bags, " + std::to_string(frames) +
         " frames, " + Histogram(ds);
}

// -- qc ----------------------------------------------------------------------

std::string CmdQcTrain(const RunConfig& config, const CommandOptions& opts) {
  RequireFile(DatasetPath(opts.out), "dataset (run gen)");
  const Dataset ds = LoadDataset(DatasetPath(opts.out));

  // Subject-disjoint train/validation split.
  std::vector<std::string> subjects;
  for (const VideoBag& b : ds.bags)
    if (std::find(subjects.begin(), subjects.end(), b.subject_id) == subjects.end())
      subjects.push_back(b.subject_id);
  std::sort(subjects.begin(), subjects.end());
  Rng rng(MixSeed(config.qc.svm.seed, 1));
  rng.Shuffle(subjects);
  const std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.qc.train_fraction *
                                  static_cast<double>(subjects.size())));
  const std::set<std::string> train_subjects(subjects.begin(),
                                             subjects.begin() + n_train);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < ds.bags.size(); ++i)
    (train_subjects.count(ds.bags[i].subject_id) ? train_idx : val_idx).push_back(i);

  std::vector<FrameVec> x_train, x_val;
  std::vector<int> y_train, y_val;
  CollectArtifactFrames(ds, train_idx, x_train, y_train);
  CollectArtifactFrames(ds, val_idx, x_val, y_val);
  Require(!x_train.empty(),
          "qc train needs bags with artifact masks (set synthetic.artifact_rate > 0)");

  const SvmTrainResult res = TrainSvm(x_train, y_train, config.qc.svm);
  const double train_acc = SvmAccuracy(res.model, x_train, y_train);
  const double val_acc = x_val.empty() ? 0.0 : SvmAccuracy(res.model, x_val, y_val);
  WriteFile(opts.out / "qc" / "svm.json", SvmToJson(res.model));
  json stats = {{"train_frames", x_train.size()},
                {"validation_frames", x_val.size()},
                {"train_accuracy", train_acc},
                {"validation_accuracy", val_acc},
                {"initial_objective", res.initial_objective},
                {"final_objective", res.final_objective},
                {"config", Echo(config)}};
  WriteFile(opts.out / "qc" / "svm_train.json", stats.dump(2) + "\n");
  return "svm trained on " + std::to_string(x_train.size()) +
         " frames; validation accuracy " + Num(val_acc);
}

std::string CmdQcFilter(const RunConfig& config, const CommandOptions& opts) {
  RequireFile(DatasetPath(opts.out), "dataset (run gen)");
  RequireFile(opts.out / "qc" / "svm.json", "svm model (run qc train)");
  const Dataset ds = LoadDataset(DatasetPath(opts.out));
  const LinearSvm svm = LoadSvm(opts.out / "qc" / "svm.json");
  const FilterResult res = FilterDataset(ds, svm);
  WriteFile(FilteredPath(opts.out), DatasetToJsonl(res.dataset));
  const FilterStats& st = res.stats;
  json stats = {{"frames_before", st.frames_before},
                {"frames_removed", st.frames_removed},
                {"bags_before", st.bags_before},
                {"bags_dropped", st.bags_dropped},
                {"planted_labels_dropped", st.planted_labels_dropped},
                {"mean_percent_decrease", st.mean_percent_decrease},
                {"config", Echo(config)}};
  WriteFile(opts.out / "qc" / "filter_stats.json", stats.dump(2) + "\n");
  return "removed " + std::to_string(st.frames_removed) + " of " +
         std::to_string(st.frames_before) + " frames (mean " +
         Num(st.mean_percent_decrease) + "% per video), dropped " +
         std::to_string(st.bags_dropped) + " bags";
}

// -- train -------------------------------------------------------------------

std::string CmdTrain(const RunConfig& config, const CommandOptions& opts) {
  const Dataset ds = LoadWorkingDataset(config, opts.out);
  const FoldAssignment folds = GroupedKFold(ds, config.folds, config.fold_seed);
  WriteFile(opts.out / "models" / "folds.json", FoldsToJson(folds).dump(1) + "\n");

  const std::vector<int> to_run = FoldsToRun(config, opts);
  std::vector<std::string> lines(to_run.size());

  // Members x folds are independent jobs.
  struct Job {
    int fold;
    int member;  // -1: regression
  };
  std::vector<Job> jobs;
  for (int f : to_run) {
    if (opts.mode.mode == TrainMode::kBinary) jobs.push_back({f, opts.mode.binary_class});
    if (WantsEnsemble(opts.mode))
      for (int m = 0; m < kEnsembleSize; ++m) jobs.push_back({f, m});
    if (WantsRegression(opts.mode)) jobs.push_back({f, -1});
  }
  std::vector<std::string> job_lines(jobs.size());
  ParallelFor(jobs.size(), [&](std::size_t ji) {
    const Job& job = jobs[ji];
    const Dataset train = Subset(ds, folds.Training(ds, job.fold));
    const Dataset held = Subset(ds, folds.HeldOut(ds, job.fold));
    TrainResult res;
    fs::path model_path;
    std::string label;
    if (job.member >= 0) {
      res = TrainBinaryMil(RelabelBinary(train, job.member),
                           ForFold(config.ensemble[job.member], job.fold));
      model_path = MemberPath(opts.out, job.fold, job.member);
      label = "gt" + std::to_string(job.member);
    } else {
      std::vector<const VideoBag*> bags;
      for (const VideoBag& b : train.bags) bags.push_back(&b);
      res = TrainRegressionMil(bags, ForFold(config.regression, job.fold));
      model_path = RegressionPath(opts.out, job.fold);
      label = "regression";
    }
    WriteFile(model_path, ScorerToJson(res.model));
    fs::path trace_path = model_path, timing_path = model_path;
    trace_path.replace_extension(".loss.tsv");
    timing_path.replace_extension(".timing.tsv");
    WriteFile(trace_path, LossTraceTsv(res.trace, /*include_wall_time=*/false));
    WriteFile(timing_path, LossTraceTsv(res.trace));

    std::string line = "fold " + std::to_string(job.fold) + " " + label +
                       ": loss " + Num(res.initial_loss) + " -> " +
                       Num(res.trace.back().mean_loss);
    if (job.member >= 0) {
      std::vector<double> pv;
      std::vector<int> y;
      for (const VideoBag& b : held.bags) {
        pv.push_back(PredictVideoBinary(res.model, b, 0.5).p_v);
        y.push_back(b.mes > job.member ? 1 : 0);
      }
      try {
        line += ", held-out AUC " + Num(RocAuc(pv, y));
      } catch (const Error&) {
        line += ", held-out AUC undefined";
      }
    }
    job_lines[ji] = line;
  });

  std::string summary;
  for (const std::string& l : job_lines) summary += l + "\n";
  return summary;
}

// -- tune / eval -------------------------------------------------------------

namespace {

struct LoadedFold {
  std::optional<EnsembleModel> ensemble;
  std::optional<ScorerModel> regression;
};

LoadedFold LoadFoldModels(const fs::path& out, int f, const ModeSpec& mode) {
  LoadedFold lf;
  if (WantsEnsemble(mode)) {
    EnsembleModel em;
    for (int m = 0; m < kEnsembleSize; ++m) {
      RequireFile(MemberPath(out, f, m), "ensemble model (run train --mode ensemble)");
      em.members[m] = LoadScorer(MemberPath(out, f, m));
      Require(em.members[m].head == Head::kSigmoid, "ensemble member needs a sigmoid head");
    }
    lf.ensemble = std::move(em);
  }
  if (WantsRegression(mode)) {
    RequireFile(RegressionPath(out, f), "regression model (run train --mode regression)");
    lf.regression = LoadScorer(RegressionPath(out, f));
    Require(lf.regression->head == Head::kLinear, "regression model needs a linear head");
  }
  return lf;
}

FoldAssignment CheckedFolds(const RunConfig& config, const Dataset& ds,
                            const fs::path& out) {
  const FoldAssignment folds = GroupedKFold(ds, config.folds, config.fold_seed);
  const fs::path saved = out / "models" / "folds.json";
  RequireFile(saved, "fold assignment (run train)");
  if (ReadJson(saved) != FoldsToJson(folds))
    Fail(ErrorKind::kInvalidArgument,
         "fold assignment differs from the one used in training; was the dataset "
         "or config changed?");
  return folds;
}

void ScoreHeldOut(const Dataset& ds, const std::vector<std::size_t>& held,
                  const LoadedFold& lf, std::vector<BagScores>& scores) {
  for (std::size_t i : held) {
    BagScores& s = scores[i];
    if (lf.ensemble) s.triples = ScoreBagTriples(*lf.ensemble, ds.bags[i]);
    if (lf.regression) {
      s.regression.clear();
      for (const FrameVec& f : ds.bags[i].frames)
        s.regression.push_back(ForwardRaw(*lf.regression, f));
    }
  }
}

void RejectBinaryMode(const ModeSpec& mode, const char* cmd) {
  if (mode.mode == TrainMode::kBinary)
    Fail(ErrorKind::kInvalidArgument,
         std::string(cmd) + " works on ensemble/regression/all; single binary "
                            "models report AUC from train");
}

}  // namespace

FoldThresholds TuneFold(const Dataset& dataset,
                        const std::vector<std::size_t>& held_out,
                        const std::vector<BagScores>& scores, int fold,
                        double step_binary, double step_ordinal) {
  FoldThresholds ft;
  ft.fold = fold;
  std::vector<int> labels;
  for (std::size_t i : held_out) labels.push_back(dataset.bags[i].mes);
  Require(!held_out.empty(), "fold " + std::to_string(fold) + " has no held-out bags");

  if (!scores[held_out.front()].triples.empty()) {
    std::vector<std::vector<FrameTriple>> triples;
    std::vector<std::vector<double>> sums;
    for (std::size_t i : held_out) {
      triples.push_back(scores[i].triples);
      std::vector<double> q;
      for (const FrameTriple& t : scores[i].triples) q.push_back(AggregateSum(t));
      sums.push_back(std::move(q));
    }
    ft.threshold_method = GridSearchBinaryThresholds(triples, labels, step_binary);
    ft.sum_method = GridSearchOrdinalThresholds(sums, labels, step_ordinal);
  }
  if (!scores[held_out.front()].regression.empty()) {
    std::vector<std::vector<double>> clipped;
    for (std::size_t i : held_out) {
      std::vector<double> s;
      for (double v : scores[i].regression) s.push_back(ClipScore(v));
      clipped.push_back(std::move(s));
    }
    ft.regression = GridSearchOrdinalThresholds(clipped, labels, step_ordinal);
  }
  return ft;
}

json ThresholdsToJson(const std::vector<FoldThresholds>& folds, double step_binary,
                      double step_ordinal, const json& config_echo) {
  json arr = json::array();
  for (const FoldThresholds& f : folds) {
    json e = {{"fold", f.fold}};
    if (f.threshold_method) {
      const auto& t = f.threshold_method->thresholds;
      e["threshold_method"] = {{"t1", t.t1}, {"t2", t.t2}, {"t3", t.t3},
                               {"kappa", f.threshold_method->kappa}};
    }
    auto ord = [](const OrdinalGridResult& r) {
      return json{{"t0", r.thresholds.t0}, {"t1", r.thresholds.t1},
                  {"t2", r.thresholds.t2}, {"kappa", r.kappa}};
    };
    if (f.sum_method) e["sum_method"] = ord(*f.sum_method);
    if (f.regression) e["regression"] = ord(*f.regression);
    arr.push_back(std::move(e));
  }
  return json{{"format", "ordmil-thresholds"},
              {"version", kThresholdsVersion},
              {"grid_step_binary", step_binary},
              {"grid_step_ordinal", step_ordinal},
              {"folds", arr},
              {"config", config_echo}};
}

std::vector<FoldThresholds> ThresholdsFromJson(const json& j) {
  try {
    if (j.at("format") != "ordmil-thresholds" || j.at("version") != kThresholdsVersion)
      Fail(ErrorKind::kParse, "not a supported thresholds file");
    std::vector<FoldThresholds> out;
    for (const json& e : j.at("folds")) {
      FoldThresholds f;
      f.fold = e.at("fold").get<int>();
      if (e.contains("threshold_method")) {
        const json& t = e["threshold_method"];
        f.threshold_method = BinaryGridResult{
            {t.at("t1").get<double>(), t.at("t2").get<double>(), t.at("t3").get<double>()},
            t.at("kappa").get<double>()};
      }
      auto ord = [](const json& t) {
        OrdinalGridResult r{{t.at("t0").get<double>(), t.at("t1").get<double>(),
                             t.at("t2").get<double>()},
                            t.at("kappa").get<double>()};
        r.thresholds.Validate();
        return r;
      };
      if (e.contains("sum_method")) f.sum_method = ord(e["sum_method"]);
      if (e.contains("regression")) f.regression = ord(e["regression"]);
      out.push_back(std::move(f));
    }
    return out;
  } catch (const json::exception& ex) {
    Fail(ErrorKind::kParse, std::string("thresholds file: ") + ex.what());
  }
}

std::string CmdTune(const RunConfig& config, const CommandOptions& opts) {
  RejectBinaryMode(opts.mode, "tune");
  const Dataset ds = LoadWorkingDataset(config, opts.out);
  const FoldAssignment folds = CheckedFolds(config, ds, opts.out);
  const double step_binary = opts.grid_step.value_or(config.grid_step_binary);
  const double step_ordinal = opts.grid_step.value_or(config.grid_step_ordinal);
  GridValues(step_binary, 1.0);
  GridValues(step_ordinal, 3.0);

  const std::vector<int> to_run = FoldsToRun(config, opts);
  std::vector<BagScores> scores(ds.bags.size());
  std::vector<FoldThresholds> tuned;
  std::string summary;
  for (int f : to_run) {
    const LoadedFold lf = LoadFoldModels(opts.out, f, opts.mode);
    const auto held = folds.HeldOut(ds, f);
    ScoreHeldOut(ds, held, lf, scores);
    tuned.push_back(TuneFold(ds, held, scores, f, step_binary, step_ordinal));
    const FoldThresholds& t = tuned.back();
    summary += "fold " + std::to_string(f) + ":";
    if (t.threshold_method)
      summary += " threshold kappa " + Num(t.threshold_method->kappa);
    if (t.sum_method) summary += " sum kappa " + Num(t.sum_method->kappa);
    if (t.regression) summary += " regression kappa " + Num(t.regression->kappa);
    summary += "\n";
  }
  WriteFile(ThresholdsPath(opts.out),
            ThresholdsToJson(tuned, step_binary, step_ordinal, Echo(config)).dump(2) +
                "\n");
  return summary;
}

// -- report ------------------------------------------------------------------

namespace {

const char* const kMethods[] = {"convert", "threshold", "sum", "regression"};
constexpr int kNumMethods = 4;

json MatrixJson(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (int i = 0; i < cm.classes(); ++i) {
    json row = json::array();
    for (int j = 0; j < cm.classes(); ++j) row.push_back(cm.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json CiJson(const std::vector<double>& values) {
  if (values.empty()) return nullptr;
  if (values.size() == 1)
    return json{{"mean", values[0]}, {"lower", values[0]}, {"upper", values[0]},
                {"n", 1}};
  const FoldCi ci = FoldConfidenceInterval(values);
  return json{{"mean", ci.mean}, {"lower", ci.lower}, {"upper", ci.upper},
              {"n", values.size()}};
}

json KappaOrNull(const ConfusionMatrix& cm) {
  if (cm.total() == 0) return nullptr;
  try {
    return CohenKappaQuadratic(cm);
  } catch (const Error&) {
    return nullptr;
  }
}

// Frame classes of one bag for every available method; -1 where absent.
std::array<std::vector<int>, kNumMethods> FrameClasses(const BagScores& s,
                                                       const FoldThresholds& t) {
  std::array<std::vector<int>, kNumMethods> out;
  if (!s.triples.empty() && t.threshold_method && t.sum_method) {
    for (const FrameTriple& tr : s.triples) {
      out[0].push_back(AggregateConvert(tr).label);
      out[1].push_back(AggregateThreshold(tr, t.threshold_method->thresholds));
      out[2].push_back(BinOrdinal(AggregateSum(tr), t.sum_method->thresholds));
    }
  }
  if (!s.regression.empty() && t.regression) {
    for (double v : s.regression)
      out[3].push_back(BinOrdinal(ClipScore(v), t.regression->thresholds));
  }
  return out;
}

}  // namespace

json BuildReport(const Dataset& dataset, const FoldAssignment& folds,
                 const std::vector<BagScores>& scores,
                 const std::vector<FoldThresholds>& thresholds,
                 const json& config_echo) {
  Require(scores.size() == dataset.bags.size(), "score table does not match dataset",
          ErrorKind::kShapeMismatch);
  std::array<bool, kNumMethods> present{};
  bool have_ensemble = false;

  std::array<ConfusionMatrix, kNumMethods> pooled_video{
      ConfusionMatrix(kNumClasses), ConfusionMatrix(kNumClasses),
      ConfusionMatrix(kNumClasses), ConfusionMatrix(kNumClasses)};
  std::array<ConfusionMatrix, kNumMethods> pooled_frame = pooled_video;
  std::array<std::vector<double>, kNumMethods> fold_video_kappa, fold_frame_kappa;
  std::array<std::vector<double>, kEnsembleSize> fold_auc;

  json fold_entries = json::array();
  for (const FoldThresholds& ft : thresholds) {
    const auto held = folds.HeldOut(dataset, ft.fold);
    std::array<ConfusionMatrix, kNumMethods> video = pooled_video, frame = pooled_video;
    for (auto& cm : video) cm = ConfusionMatrix(kNumClasses);
    for (auto& cm : frame) cm = ConfusionMatrix(kNumClasses);
    std::array<std::vector<double>, kEnsembleSize> pv;
    std::array<std::vector<int>, kEnsembleSize> yv;
    std::size_t labeled_frames = 0;

    for (std::size_t i : held) {
      const VideoBag& bag = dataset.bags[i];
      const BagScores& s = scores[i];
      if (!s.triples.empty()) {
        Require(s.triples.size() == bag.size(), "triple count != frame count",
                ErrorKind::kShapeMismatch);
        have_ensemble = true;
        for (int m = 0; m < kEnsembleSize; ++m) {
          double best = 0.0;
          for (const FrameTriple& t : s.triples) best = std::max(best, t[m]);
          pv[m].push_back(best);
          yv[m].push_back(bag.mes > m ? 1 : 0);
        }
      }
      const auto classes = FrameClasses(s, ft);
      for (int k = 0; k < kNumMethods; ++k) {
        if (classes[k].empty()) continue;
        present[k] = true;
        video[k].Add(bag.mes, VideoClass(classes[k]));
        if (bag.planted_frame_labels) {
          for (std::size_t fi = 0; fi < bag.size(); ++fi)
            frame[k].Add(AdjustFrameLabel((*bag.planted_frame_labels)[fi], bag.mes),
                         classes[k][fi]);
        }
      }
      if (bag.planted_frame_labels) labeled_frames += bag.size();
    }

    json entry = {{"fold", ft.fold}, {"n_videos", held.size()},
                  {"n_frames_labeled", labeled_frames}};
    if (have_ensemble) {
      json auc = json::object();
      for (int m = 0; m < kEnsembleSize; ++m) {
        const std::string key = "gt" + std::to_string(m);
        try {
          const double a = RocAuc(pv[m], yv[m]);
          auc[key] = a;
          fold_auc[m].push_back(a);
        } catch (const Error&) {
          auc[key] = nullptr;
        }
      }
      entry["auc"] = auc;
    }
    json vk = json::object(), fk = json::object();
    for (int k = 0; k < kNumMethods; ++k) {
      if (video[k].total() == 0) continue;
      vk[kMethods[k]] = KappaOrNull(video[k]);
      if (vk[kMethods[k]].is_number()) fold_video_kappa[k].push_back(vk[kMethods[k]]);
      pooled_video[k].Merge(video[k]);
      if (frame[k].total() > 0) {
        fk[kMethods[k]] = KappaOrNull(frame[k]);
        if (fk[kMethods[k]].is_number()) fold_frame_kappa[k].push_back(fk[kMethods[k]]);
        pooled_frame[k].Merge(frame[k]);
      }
    }
    entry["video_kappa"] = vk;
    entry["frame_kappa"] = fk;
    fold_entries.push_back(std::move(entry));
  }

  json methods = json::array();
  json summary = {{"video_kappa", json::object()}, {"frame_kappa", json::object()}};
  json confusion = {{"video", json::object()}, {"frame", json::object()}};
  for (int k = 0; k < kNumMethods; ++k) {
    if (!present[k]) continue;
    methods.push_back(kMethods[k]);
    json v = CiJson(fold_video_kappa[k]);
    if (v.is_null()) v = json::object();
    v["pooled"] = KappaOrNull(pooled_video[k]);
    summary["video_kappa"][kMethods[k]] = v;
    confusion["video"][kMethods[k]] = MatrixJson(pooled_video[k]);
    if (pooled_frame[k].total() > 0) {
      json f = CiJson(fold_frame_kappa[k]);
      if (f.is_null()) f = json::object();
      f["pooled"] = KappaOrNull(pooled_frame[k]);
      summary["frame_kappa"][kMethods[k]] = f;
      confusion["frame"][kMethods[k]] = MatrixJson(pooled_frame[k]);
    }
  }
  if (have_ensemble) {
    json auc = json::object();
    for (int m = 0; m < kEnsembleSize; ++m)
      auc["gt" + std::to_string(m)] = CiJson(fold_auc[m]);
    summary["auc"] = auc;
  }

  std::uint64_t seed = 0;
  if (config_echo.contains("resolved")) seed = config_echo["resolved"].value("seed", 0ULL);
  return json{{"format", "ordmil-report"},
              {"version", kReportVersion},
              {"seed", seed},
              {"methods", methods},
              {"folds", fold_entries},
              {"summary", summary},
              {"confusion", confusion},
              {"config", config_echo}};
}

void ValidateReport(const json& r) {
  auto fail = [](const std::string& what) {
    Fail(ErrorKind::kParse, "report schema: " + what);
  };
  if (!r.is_object()) fail("not an object");
  if (r.value("format", "") != "ordmil-report") fail("format");
  if (!r.contains("version") || r["version"] != kReportVersion) fail("version");
  if (!r.contains("seed") || !r["seed"].is_number_unsigned()) fail("seed");
  if (!r.contains("config") || !r["config"].is_object()) fail("config");
  if (!r.contains("methods") || !r["methods"].is_array()) fail("methods");
  if (!r.contains("folds") || !r["folds"].is_array()) fail("folds");
  for (const json& f : r["folds"]) {
    if (!f.contains("fold") || !f["fold"].is_number_integer()) fail("folds[].fold");
    if (!f.contains("n_videos") || !f["n_videos"].is_number_unsigned())
      fail("folds[].n_videos");
    for (const char* key : {"video_kappa", "frame_kappa"}) {
      if (!f.contains(key) || !f[key].is_object()) fail(std::string("folds[].") + key);
      for (const auto& [m, v] : f[key].items())
        if (!v.is_null() && !(v.is_number() && v >= -1.0 && v <= 1.0))
          fail(std::string("folds[].") + key + "." + m);
    }
  }
  if (!r.contains("summary") || !r["summary"].is_object()) fail("summary");
  auto check_ci = [&](const json& v, const std::string& where) {
    if (v.is_null()) return;
    if (!v.is_object()) fail(where);
    if (v.contains("mean")) {
      const double lo = v.at("lower"), mean = v.at("mean"), hi = v.at("upper");
      if (!(lo <= mean && mean <= hi)) fail(where + " interval order");
    }
  };
  for (const char* key : {"video_kappa", "frame_kappa"}) {
    if (!r["summary"].contains(key)) fail(std::string("summary.") + key);
    for (const auto& [m, v] : r["summary"][key].items())
      check_ci(v, std::string("summary.") + key + "." + m);
  }
  if (r["summary"].contains("auc"))
    for (const auto& [m, v] : r["summary"]["auc"].items()) check_ci(v, "summary.auc." + m);
  if (!r.contains("confusion") || !r["confusion"].is_object()) fail("confusion");
  for (const char* level : {"video", "frame"}) {
    if (!r["confusion"].contains(level)) fail(std::string("confusion.") + level);
    for (const auto& [m, rows] : r["confusion"][level].items()) {
      if (!rows.is_array() || rows.size() != static_cast<std::size_t>(kNumClasses))
        fail("confusion matrix shape");
      for (const json& row : rows) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(kNumClasses))
          fail("confusion matrix shape");
        for (const json& x : row)
          if (!x.is_number_unsigned()) fail("confusion matrix entries");
      }
    }
  }
}

std::string CmdEval(const RunConfig& config, const CommandOptions& opts) {
  RejectBinaryMode(opts.mode, "eval");
  const Dataset ds = LoadWorkingDataset(config, opts.out);
  const FoldAssignment folds = CheckedFolds(config, ds, opts.out);
  RequireFile(ThresholdsPath(opts.out), "thresholds (run tune)");
  const std::vector<FoldThresholds> all_thresholds =
      ThresholdsFromJson(ReadJson(ThresholdsPath(opts.out)));

  std::vector<FoldThresholds> used;
  std::vector<BagScores> scores(ds.bags.size());
  for (int f : FoldsToRun(config, opts)) {
    auto it = std::find_if(all_thresholds.begin(), all_thresholds.end(),
                           [&](const FoldThresholds& t) { return t.fold == f; });
    if (it == all_thresholds.end())
      Fail(ErrorKind::kIo, "no tuned thresholds for fold " + std::to_string(f));
    FoldThresholds t = *it;
    if (!WantsEnsemble(opts.mode)) {
      t.threshold_method.reset();
      t.sum_method.reset();
    }
    if (!WantsRegression(opts.mode)) t.regression.reset();
    if (WantsEnsemble(opts.mode) && !(t.threshold_method && t.sum_method))
      Fail(ErrorKind::kIo, "thresholds for fold " + std::to_string(f) +
                               " lack ensemble entries (run tune --mode ensemble)");
    if (WantsRegression(opts.mode) && !t.regression)
      Fail(ErrorKind::kIo, "thresholds for fold " + std::to_string(f) +
                               " lack regression entries (run tune --mode regression)");
    const LoadedFold lf = LoadFoldModels(opts.out, f, opts.mode);
    ScoreHeldOut(ds, folds.HeldOut(ds, f), lf, scores);
    used.push_back(std::move(t));
  }

  json report = BuildReport(ds, folds, scores, used, Echo(config));
  const fs::path qc_stats = opts.out / "qc" / "filter_stats.json";
  if (config.train_on_filtered && fs::exists(qc_stats)) {
    json st = ReadJson(qc_stats);
    st.erase("config");
    report["qc"] = st;
  }
  ValidateReport(report);
  const fs::path reports = opts.out / "reports";
  WriteFile(reports / "report.json", report.dump(2) + "\n");

  // Per-frame traces for external plotting.
  std::string frames_tsv =
      "video_id\tframe_index\tp_gt0\tp_gt1\tp_gt2\tq\tclass_convert\t"
      "class_threshold\tclass_sum\n";
  std::string reg_tsv = "video_id\tframe_index\ts\ts_clipped\tclass_regression\n";
  for (const FoldThresholds& t : used) {
    for (std::size_t i : folds.HeldOut(ds, t.fold)) {
      const VideoBag& bag = ds.bags[i];
      const BagScores& s = scores[i];
      const auto classes = FrameClasses(s, t);
      for (std::size_t fi = 0; fi < s.triples.size(); ++fi) {
        const FrameTriple& tr = s.triples[fi];
        frames_tsv += bag.video_id + "\t" + std::to_string(fi) + "\t" + Num(tr.p_gt0) +
                      "\t" + Num(tr.p_gt1) + "\t" + Num(tr.p_gt2) + "\t" +
                      Num(AggregateSum(tr)) + "\t" + std::to_string(classes[0][fi]) +
                      "\t" + std::to_string(classes[1][fi]) + "\t" +
                      std::to_string(classes[2][fi]) + "\n";
      }
      for (std::size_t fi = 0; fi < s.regression.size(); ++fi)
        reg_tsv += bag.video_id + "\t" + std::to_string(fi) + "\t" +
                   Num(s.regression[fi]) + "\t" + Num(ClipScore(s.regression[fi])) +
                   "\t" + std::to_string(classes[3][fi]) + "\n";
    }
  }
  if (WantsEnsemble(opts.mode)) WriteFile(reports / "frame_scores.tsv", frames_tsv);
  if (WantsRegression(opts.mode)) WriteFile(reports / "regression_scores.tsv", reg_tsv);
  for (const char* level : {"video", "frame"}) {
    for (const auto& [m, rows] : report["confusion"][level].items()) {
      ConfusionMatrix cm(kNumClasses);
      for (int i = 0; i < kNumClasses; ++i)
        for (int j = 0; j < kNumClasses; ++j)
          cm.Add(i, j, rows[i][j].get<std::uint64_t>());
      WriteFile(reports / (std::string("confusion_") + level + "_" + m + ".tsv"),
                cm.ToTsv());
    }
  }

  std::string summary = "wrote " + (reports / "report.json").string() + "\n";
  for (const char* key : {"video_kappa", "frame_kappa"})
    for (const auto& [m, v] : report["summary"][key].items())
      summary += std::string(key) + " " + m + ": pooled " +
                 (v["pooled"].is_number() ? Num(v["pooled"]) : "n/a") + "\n";
  if (report["summary"].contains("auc"))
    for (const auto& [m, v] : report["summary"]["auc"].items())
      summary += "auc " + m + ": mean " + (v.is_object() ? Num(v["mean"]) : "n/a") + "\n";
  return summary;
}

}  // namespace ordmil
