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

#ifndef FPA_EXPERIMENT_HPP_
#define FPA_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpa/checkpoint.hpp"
#include "fpa/data.hpp"
#include "fpa/model.hpp"
#include "fpa/perturb.hpp"
#include "fpa/saliency.hpp"
#include "fpa/train.hpp"

namespace fpa {

struct DatasetSection {
  std::string source = "synthetic";  // "synthetic" or "manifest"
  std::filesystem::path manifest;    // resolved against the config directory
  std::size_t train_samples = 3000;  // 0 keeps every sample of a manifest
  std::size_t test_samples = 600;
  std::uint64_t seed = 7;
  NormalizationMode normalization = NormalizationMode::kRange;
};

struct ModelSection {
  std::vector<LayerSpec> layers;  // empty: the default CNN
  std::uint64_t init_seed = 3;
};

struct EvalSection {
  std::vector<std::string> estimators;  // catalog ids; empty: all
  std::size_t ig_steps = 200;
  std::size_t sg_samples = 15;
  double sg_sigma = 0.2;
  std::vector<double> fractions = DefaultFractionGrid();
  std::size_t samples = 500;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 11;
};

struct ExperimentConfig {
  DatasetSection dataset;
  ModelSection model;
  TrainConfig train;
  EvalSection eval;

  // Canonical JSON with every default filled in.
  std::string Canonical() const;
  // FNV-1a digest of Canonical().
  std::string Hash() const;
};

ExperimentConfig DefaultExperimentConfig();
// Throws kConfig with the line and column of syntax errors or the dotted
// path of the offending field. Relative paths resolve against `base_dir`.
ExperimentConfig ParseExperimentConfig(const std::string& text,
                                       const std::filesystem::path& base_dir);
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);

struct ExperimentData {
  Dataset train;  // normalized
  Dataset test;   // normalized
  Normalization normalization;
};

ExperimentData PrepareData(const ExperimentConfig& cfg);

// The estimator list of a config with the random baseline first.
std::vector<EstimatorSpec> EvalEstimators(const EvalSection& eval);

// Command options shared by every subcommand.
struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  std::optional<AugmentationArm> arm;
  std::filesystem::path checkpoint;
  std::filesystem::path archive;
  std::filesystem::path curves;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::vector<std::string> estimators;
  std::size_t sample_id = 0;
  double percentile = 98.0;
  std::function<void(const std::string&)> log;
};

// Saliency archive: header JSON + H x W float32 maps, sample-major.
struct SaliencyArchive {
  std::string config_hash;
  std::string checkpoint_digest;
  std::string arm;
  std::uint64_t seed = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::string> estimators;  // catalog ids
  std::vector<std::size_t> sample_ids;
  std::vector<int> classes;
  std::vector<Tensor> maps;  // sample * estimators.size() + estimator

  const Tensor& map(std::size_t sample, std::size_t estimator) const {
    return maps[sample * estimators.size() + estimator];
  }
};

void WriteSaliencyArchive(const SaliencyArchive& archive,
                          const std::filesystem::path& path);
SaliencyArchive ReadSaliencyArchive(const std::filesystem::path& path);

// Keeps positive scores strictly above the nearest-rank `percentile` and
// negative scores strictly below the mirrored percentile; everything else
// becomes 0. Survivors are clipped at the (percentile + 100) / 2 quantile and
// its mirror. Accepts percentile in (50, 100].
Tensor TruncateHeatmap(const Tensor& scores, double percentile);
// Nearest-rank percentile of `values` (p in [0, 100]).
double NearestRankPercentile(std::vector<float> values, double p);

// Each command writes into options.out_dir and returns the paths it wrote.
std::vector<std::filesystem::path> RunTrain(const CommandOptions& options);
std::vector<std::filesystem::path> RunSaliency(const CommandOptions& options);
std::vector<std::filesystem::path> RunCurves(const CommandOptions& options);
std::vector<std::filesystem::path> RunReport(const CommandOptions& options);
std::vector<std::filesystem::path> RunReproduce(const CommandOptions& options);

}  // namespace fpa

#endif  // FPA_EXPERIMENT_HPP_
