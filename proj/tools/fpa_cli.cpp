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

// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "fpa/fpa.h"

namespace {

struct Flags {
  std::string config, out = ".", arm, checkpoint, archive, curves, estimators;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::size_t sample_id = 0;
  double percentile = 98.0;
  bool quiet = false;
};

void PrintLog(const char* message, void*) {
  std::fprintf(stderr, "%s\n", message);
}

int ExitCode(fpa_status status) {
  switch (status) {
    case FPA_OK: return 0;
    case FPA_ERR_CONFIG: return 2;
    case FPA_ERR_DATA: return 3;
    case FPA_ERR_DIVERGENCE: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature perturbation augmentation experiments"};
  app.require_subcommand(1);
  Flags f;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* samples_opt = nullptr;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output directory");
    seed_opt = cmd->add_option("--seed", f.seed, "overrides the config seed");
    samples_opt = cmd->add_option("--samples", f.samples,
                                  "number of test samples to evaluate");
    cmd->add_flag("--quiet", f.quiet, "suppress progress output");
  };

  CLI::App* train = app.add_subcommand("train", "train one augmentation arm");
  common(train);
  CLI::Option* train_seed = seed_opt;
  CLI::Option* train_samples = samples_opt;
  train->add_option("--arm", f.arm, "none, fpa or rectangle")
      ->check(CLI::IsMember({"none", "fpa", "rectangle"}));
  train->add_option("--checkpoint", f.checkpoint, "checkpoint output path");

  CLI::App* saliency =
      app.add_subcommand("saliency", "compute saliency maps for a checkpoint");
  common(saliency);
  CLI::Option* sal_seed = seed_opt;
  CLI::Option* sal_samples = samples_opt;
  saliency->add_option("--checkpoint", f.checkpoint)->required();
  saliency->add_option("--estimators", f.estimators,
                       "comma-separated estimator ids");

  CLI::App* curves =
      app.add_subcommand("curves", "perturbation curves and fidelity");
  common(curves);
  CLI::Option* cur_seed = seed_opt;
  CLI::Option* cur_samples = samples_opt;
  curves->add_option("--checkpoint", f.checkpoint)->required();
  curves->add_option("--archive", f.archive, "saliency archive")->required();

  CLI::App* report = app.add_subcommand("report", "diagnostics for one sample");
  report->add_option("--archive", f.archive, "saliency archive")->required();
  report->add_option("--curves", f.curves, "per-sample curve CSV")->required();
  report->add_option("--sample", f.sample_id, "sample id");
  report->add_option("--percentile", f.percentile, "in (50, 100]");
  report->add_option("--estimators", f.estimators,
                     "comma-separated estimator ids");
  report->add_option("--out", f.out, "output directory");
  report->add_option("--config", f.config, "unused; accepted for symmetry");
  report->add_flag("--quiet", f.quiet, "suppress progress output");

  CLI::App* reproduce =
      app.add_subcommand("reproduce", "train and evaluate all three arms");
  common(reproduce);
  CLI::Option* rep_seed = seed_opt;
  CLI::Option* rep_samples = samples_opt;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  fpa_options o = fpa_options_defaults();
  o.config = f.config.empty() ? nullptr : f.config.c_str();
  o.out_dir = f.out.c_str();
  o.arm = f.arm.empty() ? nullptr : f.arm.c_str();
  o.checkpoint = f.checkpoint.empty() ? nullptr : f.checkpoint.c_str();
  o.archive = f.archive.empty() ? nullptr : f.archive.c_str();
  o.curves = f.curves.empty() ? nullptr : f.curves.c_str();
  o.estimators = f.estimators.empty() ? nullptr : f.estimators.c_str();
  o.seed = f.seed;
  o.samples = f.samples;
  o.sample_id = f.sample_id;
  o.percentile = f.percentile;
  if (!f.quiet) o.log = PrintLog;

  auto given = [](CLI::Option* opt) { return opt && opt->count() > 0; };
  fpa_status status = FPA_OK;
  if (train->parsed()) {
    o.has_seed = given(train_seed);
    o.has_samples = given(train_samples);
    status = fpa_cmd_train(&o);
  } else if (saliency->parsed()) {
    o.has_seed = given(sal_seed);
    o.has_samples = given(sal_samples);
    status = fpa_cmd_saliency(&o);
  } else if (curves->parsed()) {
    o.has_seed = given(cur_seed);
    o.has_samples = given(cur_samples);
    status = fpa_cmd_curves(&o);
  } else if (report->parsed()) {
    status = fpa_cmd_report(&o);
  } else if (reproduce->parsed()) {
    o.has_seed = given(rep_seed);
    o.has_samples = given(rep_samples);
    status = fpa_cmd_reproduce(&o);
  }
  if (status != FPA_OK) {
    std::fprintf(stderr, "fpa: error: %s\n", fpa_last_error());
  }
  return ExitCode(status);
}
