/*
 * Copyright 2026 The FPA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fpa/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fpa/error.hpp"
#include "fpa/random.hpp"
#include "json_io.hpp"

namespace fpa {

using json_io::Json;
using json_io::ObjectReader;
namespace fs = std::filesystem;

namespace {

constexpr char kArchiveMagic[8] = {'F', 'P', 'A', 'S', 'A', 'L', '0', '1'};
constexpr std::uint64_t kBootstrapStream = 0x626f6f74;
constexpr std::uint64_t kSyntheticTrainStream = 1;
constexpr std::uint64_t kSyntheticTestStream = 2;

void Log(const CommandOptions& opts, const std::string& msg) {
  if (opts.log) opts.log(msg);
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string ReadText(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  Check(static_cast<bool>(in), kind, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Check(static_cast<bool>(out), ErrorKind::kData,
        "cannot write " + path.string());
  out << text;
  Check(static_cast<bool>(out), ErrorKind::kData,
        "write failed for " + path.string());
}

std::string ProvenanceLine(const ExperimentConfig& cfg) {
  return "# config_hash=" + cfg.Hash() +
         " dataset_seed=" + std::to_string(cfg.dataset.seed) +
         " init_seed=" + std::to_string(cfg.model.init_seed) +
         " train_seed=" + std::to_string(cfg.train.seed) +
         " eval_seed=" + std::to_string(cfg.eval.seed) + "\n";
}

Json SeedsJson(const ExperimentConfig& cfg) {
  return {{"dataset", cfg.dataset.seed},
          {"init", cfg.model.init_seed},
          {"train", cfg.train.seed},
          {"eval", cfg.eval.seed}};
}

struct RawData {
  Dataset train;
  Dataset test;
};

Dataset Truncate(Dataset ds, std::size_t n) {
  if (n > 0 && n < ds.samples.size()) ds.samples.resize(n);
  return ds;
}

RawData LoadRaw(const DatasetSection& d) {
  if (d.source == "synthetic") {
    return {GenSynthetic(d.train_samples,
                         DeriveSeed(d.seed, kSyntheticTrainStream),
                         Split::kTrain),
            GenSynthetic(d.test_samples,
                         DeriveSeed(d.seed, kSyntheticTestStream),
                         Split::kTest)};
  }
  const DatasetManifest m = LoadManifest(d.manifest);
  return {Truncate(LoadIdx(m.train_images, m.train_labels, Split::kTrain),
                   d.train_samples),
          Truncate(LoadIdx(m.test_images, m.test_labels, Split::kTest),
                   d.test_samples)};
}

ExperimentConfig LoadWithOverrides(const CommandOptions& opts,
                                   bool seed_to_train, bool seed_to_eval) {
  Check(!opts.config.empty(), ErrorKind::kConfig, "--config is required");
  ExperimentConfig cfg = LoadExperimentConfig(opts.config);
  if (opts.seed) {
    if (seed_to_train) cfg.train.seed = *opts.seed;
    if (seed_to_eval) cfg.eval.seed = *opts.seed;
  }
  if (opts.samples) {
    Check(*opts.samples > 0, ErrorKind::kConfig, "--samples must be positive");
    cfg.eval.samples = *opts.samples;
  }
  if (!opts.estimators.empty()) cfg.eval.estimators = opts.estimators;
  if (opts.arm) cfg.train.augmentation = *opts.arm;
  for (const std::string& id : cfg.eval.estimators) FindEstimator(id);
  return cfg;
}

// ---- training ---------------------------------------------------------

struct TrainOutcome {
  fs::path checkpoint;
  fs::path metrics;
  double test_accuracy = 0.0;
};

TrainOutcome TrainArm(const ExperimentConfig& cfg, const fs::path& out_dir,
                      fs::path checkpoint_path, const CommandOptions& opts) {
  const std::string arm(ArmName(cfg.train.augmentation));
  ExperimentData data = PrepareData(cfg);
  Model model = BuildModel(data.train.image_shape, cfg.model.layers,
                           cfg.model.init_seed);
  if (model.num_classes() != data.train.num_classes) {
    Fail(ErrorKind::kConfig,
         "model.layers: final layer has " +
             std::to_string(model.num_classes()) + " outputs but the dataset has " +
             std::to_string(data.train.num_classes) + " classes");
  }
  Log(opts, "train[" + arm + "]: " + std::to_string(data.train.size()) +
                " samples, " + std::to_string(cfg.train.epochs) + " epochs");
  TrainResult result =
      Train(std::move(model), cfg.train, data.train, &data.test,
            [&](const EpochMetrics& m) {
              Log(opts, "train[" + arm + "]: epoch " +
                            std::to_string(m.epoch + 1) + " loss " +
                            Num(m.train_loss) + " acc " +
                            Num(m.train_accuracy) + " val " +
                            Num(m.val_accuracy));
            });

  fs::create_directories(out_dir);
  TrainOutcome out;
  out.checkpoint = checkpoint_path.empty()
                       ? out_dir / ("checkpoint_" + arm + ".json")
                       : std::move(checkpoint_path);
  out.metrics = out_dir / ("metrics_" + arm + ".csv");
  Checkpoint ck;
  ck.model = std::move(result.model);
  ck.normalization = data.normalization;
  ck.arm = cfg.train.augmentation;
  ck.train = cfg.train;
  ck.init_seed = cfg.model.init_seed;
  ck.dataset_seed = cfg.dataset.seed;
  ck.config_hash = cfg.Hash();
  SaveCheckpoint(ck, out.checkpoint);

  std::string csv = ProvenanceLine(cfg);
  csv += "epoch,lr,batch_loss,train_loss,train_accuracy,val_accuracy\n";
  for (const EpochMetrics& m : result.history) {
    csv += std::to_string(m.epoch + 1) + "," + Num(m.lr) + "," +
           Num(m.batch_loss) + "," + Num(m.train_loss) + "," +
           Num(m.train_accuracy) + "," + Num(m.val_accuracy) + "\n";
  }
  WriteText(out.metrics, csv);
  out.test_accuracy =
      result.history.empty() ? 0.0 : result.history.back().val_accuracy;
  return out;
}

// ---- saliency ---------------------------------------------------------

Dataset EvalTestSet(const ExperimentConfig& cfg, const Checkpoint& ck) {
  Dataset test = Normalize(LoadRaw(cfg.dataset).test, ck.normalization);
  if (test.image_shape != ck.model.input_shape) {
    Fail(ErrorKind::kData, "dataset images " + ShapeToString(test.image_shape) +
                               " do not match the checkpoint input " +
                               ShapeToString(ck.model.input_shape));
  }
  if (cfg.eval.samples > test.size()) {
    Fail(ErrorKind::kConfig,
         "eval.samples: " + std::to_string(cfg.eval.samples) +
             " requested but the test split has " +
             std::to_string(test.size()));
  }
  return test;
}

// Training settings come from the checkpoint so that every stage of one run
// reports the same config hash.
ExperimentConfig WithCheckpoint(ExperimentConfig cfg, const Checkpoint& ck) {
  cfg.train = ck.train;
  cfg.train.augmentation = ck.arm;
  return cfg;
}

fs::path SaliencyForCheckpoint(const ExperimentConfig& file_cfg,
                               const fs::path& checkpoint_path,
                               const fs::path& out_dir,
                               const CommandOptions& opts) {
  const Checkpoint ck = LoadCheckpoint(checkpoint_path);
  const ExperimentConfig cfg = WithCheckpoint(file_cfg, ck);
  const Dataset test = EvalTestSet(cfg, ck);
  const std::vector<EstimatorSpec> specs = EvalEstimators(cfg.eval);
  const std::string arm(ArmName(ck.arm));

  EstimatorConfig ec;
  ec.ig_steps = cfg.eval.ig_steps;
  ec.sg_samples = cfg.eval.sg_samples;
  ec.sg_sigma = cfg.eval.sg_sigma;
  ec.ig_baseline = BlackImage(ck.model.input_shape, ck.normalization);
  ec.Validate();

  SaliencyArchive archive;
  archive.config_hash = cfg.Hash();
  archive.checkpoint_digest = FileDigest(checkpoint_path);
  archive.arm = arm;
  archive.seed = cfg.eval.seed;
  archive.height = ck.model.input_shape[0];
  archive.width = ck.model.input_shape[1];
  for (const EstimatorSpec& s : specs) archive.estimators.push_back(s.id);

  for (std::size_t i = 0; i < cfg.eval.samples; ++i) {
    const Tensor& x = test.samples[i].pixels;
    const int c = PredictClass(ck.model, x);
    std::vector<SaliencyMap2D> maps = ComputeSaliencyMaps(
        ck.model, x, c, specs, ec, DeriveSeed(cfg.eval.seed, i));
    archive.sample_ids.push_back(i);
    archive.classes.push_back(c);
    for (SaliencyMap2D& m : maps) archive.maps.push_back(std::move(m.scores));
    if ((i + 1) % 100 == 0 || i + 1 == cfg.eval.samples) {
      Log(opts, "saliency[" + arm + "]: " + std::to_string(i + 1) + "/" +
                    std::to_string(cfg.eval.samples));
    }
  }
  fs::create_directories(out_dir);
  const fs::path path = out_dir / ("saliency_" + arm + ".fsal");
  WriteSaliencyArchive(archive, path);
  return path;
}

// ---- curves -----------------------------------------------------------

struct EstimatorCurves {
  EstimatorSpec spec;
  PerturbationCurve mif;
  PerturbationCurve lif;
  FidelityResult fidelity;
};

struct CurvesOutcome {
  std::string arm;
  double test_accuracy = 0.0;
  std::vector<EstimatorCurves> estimators;
  std::vector<fs::path> files;
};

Signedness SignednessOf(const EstimatorSpec& spec) {
  if (spec.estimator == Estimator::kSquaredSmoothGrad) {
    return Signedness::kUnsigned;
  }
  switch (spec.reduction) {
    case Reduction::kAbsSum:
    case Reduction::kInputProductAbsSum:
      return Signedness::kUnsigned;
    case Reduction::kInputProductSum:
    case Reduction::kPlainSum:
      return Signedness::kSigned;
  }
  return Signedness::kSigned;
}

CurvesOutcome CurvesForArchive(const ExperimentConfig& file_cfg,
                               const fs::path& checkpoint_path,
                               const fs::path& archive_path,
                               const fs::path& out_dir,
                               const CommandOptions& opts) {
  const Checkpoint ck = LoadCheckpoint(checkpoint_path);
  const ExperimentConfig cfg = WithCheckpoint(file_cfg, ck);
  const SaliencyArchive archive = ReadSaliencyArchive(archive_path);
  if (archive.checkpoint_digest != FileDigest(checkpoint_path)) {
    Fail(ErrorKind::kData, archive_path.string() +
                               " was computed from a different checkpoint");
  }
  if (archive.sample_ids.size() != cfg.eval.samples) {
    Fail(ErrorKind::kData,
         "sample-count mismatch: archive has " +
             std::to_string(archive.sample_ids.size()) +
             " samples, config requests " + std::to_string(cfg.eval.samples));
  }
  if (archive.height != ck.model.input_shape[0] ||
      archive.width != ck.model.input_shape[1]) {
    Fail(ErrorKind::kData, "archive map size does not match the checkpoint");
  }
  const Dataset test = EvalTestSet(cfg, ck);
  for (std::size_t s = 0; s < archive.sample_ids.size(); ++s) {
    if (archive.sample_ids[s] >= test.size()) {
      Fail(ErrorKind::kData, "archive sample id " +
                                 std::to_string(archive.sample_ids[s]) +
                                 " is outside the test split");
    }
  }
  const std::vector<double>& fractions = cfg.eval.fractions;
  const float mask_value = cfg.train.fpa.mask_value;

  CurvesOutcome out;
  out.arm = std::string(ArmName(ck.arm));
  out.test_accuracy = EvaluateAccuracy(ck.model, test);

  std::string per_sample = ProvenanceLine(cfg);
  per_sample += "sample_id,class,base_logit,excluded,estimator,direction";
  for (double f : fractions) per_sample += "," + Num(f);
  per_sample += "\n";

  for (std::size_t e = 0; e < archive.estimators.size(); ++e) {
    EstimatorCurves ec;
    ec.spec = FindEstimator(archive.estimators[e]);
    std::vector<SampleCurve> mif_samples, lif_samples;
    for (std::size_t s = 0; s < archive.sample_ids.size(); ++s) {
      const std::size_t id = archive.sample_ids[s];
      const int c = archive.classes[s];
      SaliencyMap2D map;
      map.scores = archive.map(s, e);
      map.estimator = ec.spec.estimator;
      map.reduction = ec.spec.reduction;
      map.signedness = SignednessOf(ec.spec);
      const PixelRanking mif = RankPixels(map);
      const PixelRanking lif = ReverseRanking(mif);
      const Tensor& x = test.samples[id].pixels;
      mif_samples.push_back(
          ComputeSampleCurve(ck.model, x, c, mif, fractions, mask_value));
      lif_samples.push_back(
          ComputeSampleCurve(ck.model, x, c, lif, fractions, mask_value));
      for (const auto& [dir, sc] :
           {std::pair{"MIF", &mif_samples.back()},
            std::pair{"LIF", &lif_samples.back()}}) {
        per_sample += std::to_string(id) + "," + std::to_string(c) + "," +
                      Num(sc->base_logit) + "," + (sc->excluded ? "1" : "0") +
                      "," + ec.spec.id + "," + dir;
        for (double v : sc->values) per_sample += "," + Num(v);
        per_sample += "\n";
      }
    }
    ec.mif = AggregateCurves(fractions, mif_samples);
    ec.lif = AggregateCurves(fractions, lif_samples);
    for (PerturbationCurve* pc : {&ec.mif, &ec.lif}) {
      pc->estimator = ec.spec.id;
      pc->model = out.arm;
      pc->augmentation = out.arm;
    }
    ec.mif.direction = "MIF";
    ec.lif.direction = "LIF";
    ec.fidelity = BootstrapCi(ec.lif, ec.mif, cfg.eval.bootstrap_resamples,
                              DeriveSeed(cfg.eval.seed, kBootstrapStream, e));
    Log(opts, "curves[" + out.arm + "]: " + ec.spec.display + " A=" +
                  Num(ec.fidelity.area) + " [" + Num(ec.fidelity.ci_low) +
                  ", " + Num(ec.fidelity.ci_high) + "]");
    out.estimators.push_back(std::move(ec));
  }

  fs::create_directories(out_dir);
  std::string curves = ProvenanceLine(cfg);
  curves += "fraction,mean_normalized_logit,direction,estimator,augmentation\n";
  for (const EstimatorCurves& ec : out.estimators) {
    for (const PerturbationCurve* pc : {&ec.mif, &ec.lif}) {
      for (std::size_t i = 0; i < pc->fractions.size(); ++i) {
        curves += Num(pc->fractions[i]) + "," + Num(pc->mean[i]) + "," +
                  pc->direction + "," + pc->estimator + "," +
                  pc->augmentation + "\n";
      }
    }
  }

  Json results = Json::array();
  std::string table = ProvenanceLine(cfg);
  table += "estimator,area,ci_low,ci_high,num_samples,excluded\n";
  for (const EstimatorCurves& ec : out.estimators) {
    const FidelityResult& f = ec.fidelity;
    results.push_back({{"estimator", ec.spec.id},
                       {"display", ec.spec.display},
                       {"area", f.area},
                       {"ci_low", f.ci_low},
                       {"ci_high", f.ci_high},
                       {"num_samples", f.num_samples},
                       {"excluded", f.excluded},
                       {"bootstrap_resamples", f.bootstrap_resamples},
                       {"bootstrap_seed", f.seed}});
    table += ec.spec.display + "," + Num(f.area) + "," + Num(f.ci_low) + "," +
             Num(f.ci_high) + "," + std::to_string(f.num_samples) + "," +
             std::to_string(f.excluded) + "\n";
  }
  Json fidelity = {{"config_hash", cfg.Hash()},
                   {"checkpoint_digest", archive.checkpoint_digest},
                   {"seeds", SeedsJson(cfg)},
                   {"augmentation", out.arm},
                   {"test_accuracy", out.test_accuracy},
                   {"mask_value", mask_value},
                   {"results", std::move(results)}};

  const std::string suffix = "_" + out.arm;
  out.files = {out_dir / ("curves" + suffix + ".csv"),
               out_dir / ("fidelity" + suffix + ".json"),
               out_dir / ("table" + suffix + ".csv"),
               out_dir / ("persample" + suffix + ".csv")};
  WriteText(out.files[0], curves);
  WriteText(out.files[1], fidelity.dump(2) + "\n");
  WriteText(out.files[2], table);
  WriteText(out.files[3], per_sample);
  return out;
}

// Value of a curve at fraction f, interpolating linearly between grid points.
double CurveAt(const PerturbationCurve& c, double f) {
  for (std::size_t i = 0; i + 1 < c.fractions.size(); ++i) {
    const double a = c.fractions[i], b = c.fractions[i + 1];
    if (f >= a - 1e-12 && f <= b + 1e-12) {
      const double t = std::clamp((f - a) / (b - a), 0.0, 1.0);
      return c.mean[i] + t * (c.mean[i + 1] - c.mean[i]);
    }
  }
  return c.mean.back();
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

// ---- config -------------------------------------------------------------

ExperimentConfig DefaultExperimentConfig() {
  ExperimentConfig cfg;
  cfg.model.layers = DefaultCnnLayers(10);
  return cfg;
}

std::string ExperimentConfig::Canonical() const {
  Json j;
  j["dataset"] = {{"source", dataset.source},
                  {"manifest", dataset.manifest.generic_string()},
                  {"train_samples", dataset.train_samples},
                  {"test_samples", dataset.test_samples},
                  {"seed", dataset.seed},
                  {"normalization",
                   std::string(NormalizationModeName(dataset.normalization))}};
  j["model"] = {{"layers", json_io::LayersToJson(model.layers)},
                {"init_seed", model.init_seed}};
  j["train"] = json_io::TrainToJson(train);
  j["eval"] = {{"estimators", eval.estimators},
               {"ig_steps", eval.ig_steps},
               {"sg_samples", eval.sg_samples},
               {"sg_sigma", eval.sg_sigma},
               {"fractions", eval.fractions},
               {"samples", eval.samples},
               {"bootstrap_resamples", eval.bootstrap_resamples},
               {"seed", eval.seed}};
  return j.dump();
}

std::string ExperimentConfig::Hash() const {
  return HexDigest(Fnv1a(Canonical()));
}

ExperimentConfig ParseExperimentConfig(const std::string& text,
                                       const fs::path& base_dir) {
  const ErrorKind k = ErrorKind::kConfig;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(
        e.byte > 0 ? e.byte - 1 : 0, text.size());
    const std::size_t line =
        1 + std::count(text.begin(), text.begin() + upto, '\n');
    const std::size_t last_nl = text.rfind('\n', upto == 0 ? 0 : upto - 1);
    const std::size_t column =
        last_nl == std::string::npos || upto == 0 ? upto + 1 : upto - last_nl;
    Fail(k, "config line " + std::to_string(line) + ", column " +
                std::to_string(column) + ": syntax error");
  }

  ExperimentConfig cfg = DefaultExperimentConfig();
  ObjectReader root(j, "", k);

  if (root.Has("dataset")) {
    ObjectReader r(root.Raw("dataset"), "dataset", k);
    DatasetSection& d = cfg.dataset;
    d.source = r.String("source", d.source);
    if (d.source != "synthetic" && d.source != "manifest") {
      r.Fail("source", "expected synthetic or manifest");
    }
    if (d.source == "manifest") {
      fs::path m = r.String("manifest");
      d.manifest = m.is_relative() ? base_dir / m : m;
      if (!fs::exists(d.manifest)) {
        r.Fail("manifest", "file not found: " + d.manifest.string());
      }
    }
    d.train_samples = r.Unsigned("train_samples", d.train_samples);
    d.test_samples = r.Unsigned("test_samples", d.test_samples);
    if (d.source == "synthetic" &&
        (d.train_samples == 0 || d.test_samples == 0)) {
      r.Fail("train_samples", "synthetic splits must be non-empty");
    }
    d.seed = r.Unsigned("seed", d.seed);
    if (r.Has("normalization")) {
      const std::string mode = r.String("normalization");
      try {
        d.normalization = ParseNormalizationMode(mode);
      } catch (const Error&) {
        r.Fail("normalization", "expected range or zscore");
      }
    }
    r.Finish();
  }

  if (root.Has("model")) {
    ObjectReader r(root.Raw("model"), "model", k);
    if (r.Has("layers")) {
      cfg.model.layers = json_io::LayersFromJson(r.Raw("layers"),
                                                 "model.layers", k);
    }
    cfg.model.init_seed = r.Unsigned("init_seed", cfg.model.init_seed);
    r.Finish();
  }

  if (root.Has("train")) {
    cfg.train = json_io::TrainFromJson(root.Raw("train"), "train", k,
                                       cfg.train);
  }

  if (root.Has("eval")) {
    ObjectReader r(root.Raw("eval"), "eval", k);
    EvalSection& e = cfg.eval;
    if (r.Has("estimators")) {
      const Json& list = r.Raw("estimators");
      if (!list.is_array()) r.Fail("estimators", "expected an array");
      e.estimators.clear();
      for (const Json& id : list) {
        if (!id.is_string()) r.Fail("estimators", "expected strings");
        try {
          e.estimators.push_back(FindEstimator(id.get<std::string>()).id);
        } catch (const Error& err) {
          r.Fail("estimators", err.what());
        }
      }
    }
    e.ig_steps = r.Unsigned("ig_steps", e.ig_steps);
    e.sg_samples = r.Unsigned("sg_samples", e.sg_samples);
    e.sg_sigma = r.Number("sg_sigma", e.sg_sigma);
    if (r.Has("fractions")) {
      const Json& list = r.Raw("fractions");
      if (!list.is_array()) r.Fail("fractions", "expected an array");
      e.fractions.clear();
      for (const Json& f : list) {
        if (!f.is_number()) r.Fail("fractions", "expected numbers");
        e.fractions.push_back(f.get<double>());
      }
    }
    e.samples = r.Unsigned("samples", e.samples);
    e.bootstrap_resamples =
        r.Unsigned("bootstrap_resamples", e.bootstrap_resamples);
    e.seed = r.Unsigned("seed", e.seed);
    if (e.ig_steps == 0) r.Fail("ig_steps", "must be positive");
    if (e.sg_samples == 0) r.Fail("sg_samples", "must be positive");
    if (e.sg_sigma < 0) r.Fail("sg_sigma", "must be non-negative");
    if (e.samples == 0) r.Fail("samples", "must be positive");
    if (e.bootstrap_resamples == 0) {
      r.Fail("bootstrap_resamples", "must be positive");
    }
    try {
      ValidateFractionGrid(e.fractions);
    } catch (const Error& err) {
      r.Fail("fractions", err.what());
    }
    r.Finish();
  }
  root.Finish();
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const fs::path& path) {
  return ParseExperimentConfig(ReadText(path, ErrorKind::kConfig),
                               path.parent_path());
}

ExperimentData PrepareData(const ExperimentConfig& cfg) {
  RawData raw = LoadRaw(cfg.dataset);
  ExperimentData out;
  out.normalization = FitNormalization(raw.train, cfg.dataset.normalization);
  out.train = Normalize(raw.train, out.normalization);
  out.test = Normalize(raw.test, out.normalization);
  return out;
}

std::vector<EstimatorSpec> EvalEstimators(const EvalSection& eval) {
  std::vector<std::string> ids = eval.estimators;
  if (ids.empty()) {
    for (const EstimatorSpec& s : EstimatorCatalog()) ids.push_back(s.id);
  }
  std::vector<EstimatorSpec> out{FindEstimator("random")};
  for (const std::string& id : ids) {
    const EstimatorSpec& s = FindEstimator(id);
    const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& o) {
      return o.id == s.id;
    });
    if (!seen) out.push_back(s);
  }
  return out;
}

// ---- archive ------------------------------------------------------------

void WriteSaliencyArchive(const SaliencyArchive& a, const fs::path& path) {
  const std::size_t per_map = a.height * a.width;
  Check(a.maps.size() == a.sample_ids.size() * a.estimators.size(),
        ErrorKind::kInternal, "archive map count mismatch");
  Json header = {{"config_hash", a.config_hash},
                 {"checkpoint_digest", a.checkpoint_digest},
                 {"augmentation", a.arm},
                 {"seed", a.seed},
                 {"height", a.height},
                 {"width", a.width},
                 {"estimators", a.estimators},
                 {"sample_ids", a.sample_ids},
                 {"classes", a.classes}};
  Json reductions = Json::array();
  for (const std::string& id : a.estimators) {
    const EstimatorSpec& s = FindEstimator(id);
    reductions.push_back({{"id", s.id},
                          {"display", s.display},
                          {"estimator", std::string(EstimatorName(s.estimator))},
                          {"reduction", std::string(ReductionName(s.reduction))},
                          {"signedness",
                           std::string(SignednessName(SignednessOf(s)))}});
  }
  header["reductions"] = std::move(reductions);
  const std::string head = header.dump();

  std::string bytes(kArchiveMagic, sizeof kArchiveMagic);
  std::uint64_t len = head.size();
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>(len >> (8 * i)));
  bytes += head;
  bytes.reserve(bytes.size() + a.maps.size() * per_map * 4);
  for (const Tensor& m : a.maps) {
    Check(m.size() == per_map, ErrorKind::kInternal, "archive map size");
    for (float v : m.data()) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>(u >> (8 * i)));
    }
  }
  WriteText(path, bytes);
}

SaliencyArchive ReadSaliencyArchive(const fs::path& path) {
  const ErrorKind k = ErrorKind::kData;
  const std::string bytes = ReadText(path, k);
  const std::string where = path.string();
  if (bytes.size() < 16 ||
      std::memcmp(bytes.data(), kArchiveMagic, sizeof kArchiveMagic) != 0) {
    Fail(k, where + ": not a saliency archive");
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) {
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i]))
           << (8 * i);
  }
  if (len > bytes.size() - 16) Fail(k, where + ": truncated header");
  Json header;
  try {
    header = Json::parse(bytes.substr(16, len));
  } catch (const Json::exception&) {
    Fail(k, where + ": corrupt header");
  }
  SaliencyArchive a;
  try {
    a.config_hash = header.at("config_hash").get<std::string>();
    a.checkpoint_digest = header.at("checkpoint_digest").get<std::string>();
    a.arm = header.at("augmentation").get<std::string>();
    a.seed = header.at("seed").get<std::uint64_t>();
    a.height = header.at("height").get<std::size_t>();
    a.width = header.at("width").get<std::size_t>();
    a.estimators = header.at("estimators").get<std::vector<std::string>>();
    a.sample_ids = header.at("sample_ids").get<std::vector<std::size_t>>();
    a.classes = header.at("classes").get<std::vector<int>>();
  } catch (const Json::exception& e) {
    Fail(k, where + ": bad header: " + e.what());
  }
  if (a.classes.size() != a.sample_ids.size()) {
    Fail(k, where + ": class list does not match sample list");
  }
  for (const std::string& id : a.estimators) {
    try {
      FindEstimator(id);
    } catch (const Error&) {
      Fail(k, where + ": unknown estimator '" + id + "'");
    }
  }
  const std::size_t per_map = a.height * a.width;
  const std::size_t count = a.sample_ids.size() * a.estimators.size();
  if (bytes.size() - 16 - len != count * per_map * 4) {
    Fail(k, where + ": expected " + std::to_string(count) + " maps of " +
                std::to_string(per_map) + " values");
  }
  std::size_t pos = 16 + len;
  for (std::size_t m = 0; m < count; ++m) {
    std::vector<float> values(per_map);
    for (float& v : values) {
      std::uint32_t u = 0;
      for (int i = 0; i < 4; ++i) {
        u |= static_cast<std::uint32_t>(
                 static_cast<unsigned char>(bytes[pos + i]))
             << (8 * i);
      }
      std::memcpy(&v, &u, 4);
      pos += 4;
    }
    a.maps.emplace_back(Shape{a.height, a.width}, std::move(values));
  }
  return a;
}

// ---- heatmap truncation ---------------------------------------------------

double NearestRankPercentile(std::vector<float> values, double p) {
  Check(!values.empty(), ErrorKind::kInvalidArgument, "percentile of nothing");
  Check(p >= 0.0 && p <= 100.0, ErrorKind::kInvalidArgument,
        "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * values.size() - 1e-9);
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

Tensor TruncateHeatmap(const Tensor& scores, double percentile) {
  Check(percentile > 50.0 && percentile <= 100.0, ErrorKind::kConfig,
        "percentile must lie in (50, 100], got " + Num(percentile));
  const std::vector<float> v = scores.vector();
  const double clip_p = (percentile + 100.0) / 2.0;
  const double hi = NearestRankPercentile(v, percentile);
  const double lo = NearestRankPercentile(v, 100.0 - percentile);
  const double clip_hi = NearestRankPercentile(v, clip_p);
  const double clip_lo = NearestRankPercentile(v, 100.0 - clip_p);
  Tensor out(scores.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double s = v[i];
    if (s > hi && s > 0.0) {
      out[i] = static_cast<float>(std::min(s, clip_hi));
    } else if (s < lo && s < 0.0) {
      out[i] = static_cast<float>(std::max(s, clip_lo));
    }
  }
  return out;
}

// ---- commands -------------------------------------------------------------

std::vector<fs::path> RunTrain(const CommandOptions& opts) {
  const ExperimentConfig cfg = LoadWithOverrides(opts, true, false);
  const TrainOutcome t = TrainArm(cfg, opts.out_dir, opts.checkpoint, opts);
  return {t.checkpoint, t.metrics};
}

std::vector<fs::path> RunSaliency(const CommandOptions& opts) {
  const ExperimentConfig cfg = LoadWithOverrides(opts, false, true);
  Check(!opts.checkpoint.empty(), ErrorKind::kConfig,
        "--checkpoint is required");
  return {SaliencyForCheckpoint(cfg, opts.checkpoint, opts.out_dir, opts)};
}

std::vector<fs::path> RunCurves(const CommandOptions& opts) {
  const ExperimentConfig cfg = LoadWithOverrides(opts, false, true);
  Check(!opts.checkpoint.empty(), ErrorKind::kConfig,
        "--checkpoint is required");
  Check(!opts.archive.empty(), ErrorKind::kConfig, "--archive is required");
  return CurvesForArchive(cfg, opts.checkpoint, opts.archive, opts.out_dir,
                          opts)
      .files;
}

std::vector<fs::path> RunReport(const CommandOptions& opts) {
  Check(!opts.archive.empty(), ErrorKind::kConfig, "--archive is required");
  Check(!opts.curves.empty(), ErrorKind::kConfig,
        "--curves (per-sample curve CSV) is required");
  Check(opts.percentile > 50.0 && opts.percentile <= 100.0, ErrorKind::kConfig,
        "--percentile must lie in (50, 100], got " + Num(opts.percentile));
  const SaliencyArchive archive = ReadSaliencyArchive(opts.archive);
  const auto it = std::find(archive.sample_ids.begin(),
                            archive.sample_ids.end(), opts.sample_id);
  if (it == archive.sample_ids.end()) {
    Fail(ErrorKind::kData, "sample " + std::to_string(opts.sample_id) +
                               " is not in " + opts.archive.string());
  }
  const std::size_t s = static_cast<std::size_t>(it - archive.sample_ids.begin());

  std::vector<std::size_t> chosen;
  if (opts.estimators.empty()) {
    for (std::size_t e = 0; e < archive.estimators.size(); ++e) {
      chosen.push_back(e);
    }
  } else {
    for (const std::string& id : opts.estimators) {
      const std::string canonical = FindEstimator(id).id;
      const auto at = std::find(archive.estimators.begin(),
                                archive.estimators.end(), canonical);
      if (at == archive.estimators.end()) {
        Fail(ErrorKind::kData, "estimator " + canonical + " is not in the archive");
      }
      chosen.push_back(static_cast<std::size_t>(at - archive.estimators.begin()));
    }
  }

  // Per-sample LIF logit curves for this sample, keyed by estimator id.
  std::vector<double> fractions;
  std::vector<std::pair<std::string, std::vector<double>>> lif_curves;
  {
    std::istringstream in(ReadText(opts.curves, ErrorKind::kData));
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const std::vector<std::string> cells = SplitCsv(line);
      if (!header) {
        header = true;
        if (cells.size() < 7 || cells[0] != "sample_id") {
          Fail(ErrorKind::kData, opts.curves.string() +
                                     ": not a per-sample curve file");
        }
        for (std::size_t i = 6; i < cells.size(); ++i) {
          fractions.push_back(std::stod(cells[i]));
        }
        continue;
      }
      if (cells.size() != 6 + fractions.size()) {
        Fail(ErrorKind::kData, opts.curves.string() + ": ragged row");
      }
      if (std::stoul(cells[0]) != opts.sample_id || cells[5] != "LIF") continue;
      std::vector<double> values;
      for (std::size_t i = 6; i < cells.size(); ++i) {
        values.push_back(std::stod(cells[i]));
      }
      lif_curves.emplace_back(cells[4], std::move(values));
    }
  }

  fs::create_directories(opts.out_dir);
  std::vector<fs::path> files;
  const std::string tag = "sample" + std::to_string(opts.sample_id);
  const std::string prov = "# config_hash=" + archive.config_hash +
                           " eval_seed=" + std::to_string(archive.seed) +
                           " checkpoint=" + archive.checkpoint_digest + "\n";
  Json summary = {{"config_hash", archive.config_hash},
                  {"checkpoint_digest", archive.checkpoint_digest},
                  {"eval_seed", archive.seed},
                  {"augmentation", archive.arm},
                  {"sample_id", opts.sample_id},
                  {"class", archive.classes[s]},
                  {"percentile", opts.percentile}};
  Json per_estimator = Json::array();

  for (std::size_t e : chosen) {
    const EstimatorSpec& spec = FindEstimator(archive.estimators[e]);
    const Tensor& scores = archive.map(s, e);
    const std::size_t h = archive.height, w = archive.width, n = h * w;

    const Tensor trunc = TruncateHeatmap(scores, opts.percentile);
    std::string grid = prov;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        grid += (c ? "," : "") + Num(trunc[r * w + c]);
      }
      grid += "\n";
    }
    files.push_back(opts.out_dir / ("heatmap_" + tag + "_" + spec.id + ".csv"));
    WriteText(files.back(), grid);

    SaliencyMap2D map;
    map.scores = scores;
    map.estimator = spec.estimator;
    map.reduction = spec.reduction;
    map.signedness = SignednessOf(spec);
    const PixelRanking lif = ReverseRanking(RankPixels(map));
    const std::vector<float> series = RankedScoreSeries(map, lif);
    std::string series_csv = prov + "rank,pixel,row,col,score,masked_fraction\n";
    for (std::size_t r = 0; r < series.size(); ++r) {
      const std::size_t p = lif.order[r];
      series_csv += std::to_string(r) + "," + std::to_string(p) + "," +
                    std::to_string(p / w) + "," + std::to_string(p % w) + "," +
                    Num(series[r]) + "," +
                    Num(static_cast<double>(r + 1) / static_cast<double>(n)) +
                    "\n";
    }
    files.push_back(opts.out_dir / ("series_" + tag + "_" + spec.id + ".csv"));
    WriteText(files.back(), series_csv);

    const auto curve = std::find_if(
        lif_curves.begin(), lif_curves.end(),
        [&](const auto& kv) { return kv.first == spec.id; });
    Json curve_summary = nullptr;
    if (curve != lif_curves.end()) {
      std::string logit_csv = prov + "fraction,normalized_logit\n";
      for (std::size_t i = 0; i < fractions.size(); ++i) {
        logit_csv += Num(fractions[i]) + "," + Num(curve->second[i]) + "\n";
      }
      files.push_back(opts.out_dir / ("logit_" + tag + "_" + spec.id + ".csv"));
      WriteText(files.back(), logit_csv);
      const auto peak =
          std::max_element(curve->second.begin(), curve->second.end());
      curve_summary = {
          {"lif_peak", *peak},
          {"lif_peak_fraction",
           fractions[static_cast<std::size_t>(peak - curve->second.begin())]}};
    }

    std::size_t pos = 0, neg = 0, tpos = 0, tneg = 0;
    double pos_mass = 0.0, neg_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = scores[i];
      if (v > 0) { ++pos; pos_mass += v; }
      if (v < 0) { ++neg; neg_mass -= v; }
      if (trunc[i] > 0) ++tpos;
      if (trunc[i] < 0) ++tneg;
    }
    const double total = pos_mass + neg_mass;
    const double dn = static_cast<double>(n);
    per_estimator.push_back(
        {{"estimator", spec.id},
         {"display", spec.display},
         {"signedness", std::string(SignednessName(SignednessOf(spec)))},
         {"positive_fraction", pos / dn},
         {"negative_fraction", neg / dn},
         {"zero_fraction", (n - pos - neg) / dn},
         {"positive_mass_fraction", total > 0 ? pos_mass / total : 0.0},
         {"negative_mass_fraction", total > 0 ? neg_mass / total : 0.0},
         {"truncated_positive", tpos},
         {"truncated_negative", tneg},
         {"lif_curve", curve_summary}});
  }
  summary["estimators"] = std::move(per_estimator);
  files.push_back(opts.out_dir / ("report_" + tag + ".json"));
  WriteText(files.back(), summary.dump(2) + "\n");
  return files;
}

std::vector<fs::path> RunReproduce(const CommandOptions& opts) {
  const ExperimentConfig base = LoadWithOverrides(opts, true, true);
  const std::vector<AugmentationArm> arms = {
      AugmentationArm::kNone, AugmentationArm::kFpa,
      AugmentationArm::kRectangle};
  std::vector<fs::path> files;
  std::vector<CurvesOutcome> outcomes;
  for (AugmentationArm arm : arms) {
    ExperimentConfig cfg = base;
    cfg.train.augmentation = arm;
    const fs::path dir = opts.out_dir / std::string(ArmName(arm));
    const TrainOutcome t = TrainArm(cfg, dir, {}, opts);
    const fs::path archive = SaliencyForCheckpoint(cfg, t.checkpoint, dir, opts);
    CurvesOutcome c = CurvesForArchive(cfg, t.checkpoint, archive, dir, opts);
    files.insert(files.end(), {t.checkpoint, t.metrics, archive});
    files.insert(files.end(), c.files.begin(), c.files.end());
    outcomes.push_back(std::move(c));
  }

  auto find = [](const CurvesOutcome& o, const std::string& id)
      -> const EstimatorCurves* {
    for (const EstimatorCurves& e : o.estimators) {
      if (e.spec.id == id) return &e;
    }
    return nullptr;
  };

  // Rows = estimators, columns = augmentation arms.
  std::string csv = ProvenanceLine(base) + "estimator";
  std::string md = "| Estimator |";
  std::string md_rule = "|---|";
  for (const CurvesOutcome& o : outcomes) {
    csv += "," + o.arm + "," + o.arm + "_ci_low," + o.arm + "_ci_high";
    md += " " + o.arm + " |";
    md_rule += "---|";
  }
  csv += "\n";
  md = "<!-- config_hash=" + base.Hash() + " -->\n\n" + md + "\n" + md_rule +
       "\n";
  for (const EstimatorCurves& row : outcomes.front().estimators) {
    csv += row.spec.display;
    md += "| " + row.spec.display + " |";
    for (const CurvesOutcome& o : outcomes) {
      const EstimatorCurves* e = find(o, row.spec.id);
      const FidelityResult& f = e->fidelity;
      csv += "," + Num(f.area) + "," + Num(f.ci_low) + "," + Num(f.ci_high);
      char cell[96];
      std::snprintf(cell, sizeof cell, " %.1f [%.1f, %.1f] |", f.area,
                    f.ci_low, f.ci_high);
      md += cell;
    }
    csv += "\n";
    md += "\n";
  }
  md += "| Test accuracy |";
  for (const CurvesOutcome& o : outcomes) {
    char cell[32];
    std::snprintf(cell, sizeof cell, " %.4f |", o.test_accuracy);
    md += cell;
  }
  md += "\n";

  // Directional checks against the paper's qualitative findings.
  const CurvesOutcome& none = outcomes[0];
  const CurvesOutcome& fpa = outcomes[1];
  Json checks = Json::array();
  Json flags = Json::array();
  auto add_check = [&](const std::string& name, bool soft, bool pass,
                       Json detail) {
    checks.push_back({{"name", name},
                      {"soft", soft},
                      {"pass", pass},
                      {"detail", std::move(detail)}});
    if (!pass) flags.push_back(name);
  };
  for (const CurvesOutcome* o : {&none, &fpa}) {
    const EstimatorCurves* r = find(*o, "random");
    add_check("random CI contains 0 (" + o->arm + ")", false,
              r->fidelity.ci_low <= 0.0 && r->fidelity.ci_high >= 0.0,
              {{"area", r->fidelity.area},
               {"ci_low", r->fidelity.ci_low},
               {"ci_high", r->fidelity.ci_high}});
  }
  for (const char* id : {"sgp_sum", "ig_sum", "sq-sg_sum"}) {
    const EstimatorCurves* e = find(fpa, id);
    if (!e) continue;
    add_check(e->spec.display + " beats random (fpa)", false,
              e->fidelity.ci_low > 0.0,
              {{"area", e->fidelity.area}, {"ci_low", e->fidelity.ci_low}});
  }
  {
    const double a = CurveAt(find(fpa, "random")->mif, 0.3);
    const double b = CurveAt(find(none, "random")->mif, 0.3);
    add_check("fpa more robust to 30% random masking", false, a > b,
              {{"fpa", a}, {"none", b}});
  }
  add_check("fpa accuracy within 5 points of none", false,
            fpa.test_accuracy >= none.test_accuracy - 0.05,
            {{"fpa", fpa.test_accuracy}, {"none", none.test_accuracy}});
  for (const auto& [signed_id, unsigned_id] :
       {std::pair{"ig_sum", "ig_abs"}, std::pair{"sgp_sum", "sgp_abs"}}) {
    const EstimatorCurves* s = find(fpa, signed_id);
    const EstimatorCurves* u = find(fpa, unsigned_id);
    if (!s || !u) continue;
    add_check(s->spec.display + " > " + u->spec.display + " (fpa)", true,
              s->fidelity.area > u->fidelity.area,
              {{"signed", s->fidelity.area}, {"unsigned", u->fidelity.area}});
  }
  md += "\n";
  for (const Json& c : checks) {
    md += std::string(c["pass"].get<bool>() ? "- pass: " : "- FLAG: ") +
          c["name"].get<std::string>() +
          (c["soft"].get<bool>() ? " (soft)" : "") + "\n";
  }

  Json summary = {{"config_hash", base.Hash()},
                  {"seeds", SeedsJson(base)},
                  {"checks", std::move(checks)},
                  {"flags", std::move(flags)}};
  Json arms_json = Json::object();
  for (const CurvesOutcome& o : outcomes) {
    arms_json[o.arm] = {
        {"test_accuracy", o.test_accuracy},
        {"random_mif_at_30", CurveAt(find(o, "random")->mif, 0.3)}};
  }
  summary["arms"] = std::move(arms_json);

  fs::create_directories(opts.out_dir);
  files.push_back(opts.out_dir / "table.csv");
  WriteText(files.back(), csv);
  files.push_back(opts.out_dir / "table.md");
  WriteText(files.back(), md);
  files.push_back(opts.out_dir / "summary.json");
  WriteText(files.back(), summary.dump(2) + "\n");
  return files;
}

}  // namespace fpa
