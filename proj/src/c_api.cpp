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

#include "fpa/fpa.h"

#include <cstring>
#include <new>
#include <sstream>
#include <string>
#include <utility>

#include "fpa/augment.hpp"
#include "fpa/checkpoint.hpp"
#include "fpa/data.hpp"
#include "fpa/error.hpp"
#include "fpa/experiment.hpp"
#include "fpa/perturb.hpp"
#include "fpa/saliency.hpp"

struct fpa_dataset {
  fpa::Dataset data;
};

struct fpa_model {
  fpa::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
fpa_status Guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return FPA_OK;
  } catch (const fpa::Error& e) {
    g_last_error = e.what();
    return static_cast<fpa_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return FPA_ERR_INTERNAL;
}

void Require(bool ok, const char* what) {
  fpa::Check(ok, fpa::ErrorKind::kInvalidArgument, what);
}

fpa::CommandOptions ToOptions(const fpa_options* o) {
  Require(o != nullptr, "options must not be NULL");
  fpa::CommandOptions c;
  if (o->config) c.config = o->config;
  if (o->out_dir) c.out_dir = o->out_dir;
  if (o->arm) {
    try {
      c.arm = fpa::ParseArm(o->arm);
    } catch (const fpa::Error&) {
      fpa::Fail(fpa::ErrorKind::kConfig, std::string("unknown arm '") +
                                             o->arm +
                                             "' (expected none, fpa or rectangle)");
    }
  }
  if (o->checkpoint) c.checkpoint = o->checkpoint;
  if (o->archive) c.archive = o->archive;
  if (o->curves) c.curves = o->curves;
  if (o->estimators) {
    std::stringstream ss(o->estimators);
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (!id.empty()) c.estimators.push_back(fpa::FindEstimator(id).id);
    }
  }
  if (o->has_seed) c.seed = o->seed;
  if (o->has_samples) c.samples = o->samples;
  c.sample_id = o->sample_id;
  c.percentile = o->percentile;
  if (o->log) {
    fpa_log_fn fn = o->log;
    void* user = o->log_user;
    c.log = [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
  }
  return c;
}

}  // namespace

extern "C" {

const char* fpa_last_error(void) { return g_last_error.c_str(); }

const char* fpa_version(void) { return "1.0.0"; }

fpa_status fpa_dataset_synthetic(size_t num_samples, uint64_t seed,
                                 fpa_dataset** out) {
  return Guard([&] {
    Require(out != nullptr, "out must not be NULL");
    *out = new fpa_dataset{fpa::GenSynthetic(num_samples, seed)};
  });
}

fpa_status fpa_dataset_load_idx(const char* images_path,
                                const char* labels_path, fpa_dataset** out) {
  return Guard([&] {
    Require(images_path && labels_path && out, "arguments must not be NULL");
    *out = new fpa_dataset{fpa::LoadIdx(images_path, labels_path)};
  });
}

fpa_status fpa_dataset_write_idx(const fpa_dataset* dataset,
                                 const char* images_path,
                                 const char* labels_path) {
  return Guard([&] {
    Require(dataset && images_path && labels_path,
            "arguments must not be NULL");
    fpa::WriteIdx(dataset->data, images_path, labels_path);
  });
}

fpa_status fpa_dataset_info(const fpa_dataset* dataset, size_t* num_samples,
                            size_t* height, size_t* width, size_t* channels,
                            size_t* num_classes) {
  return Guard([&] {
    Require(dataset != nullptr, "dataset must not be NULL");
    const fpa::Dataset& d = dataset->data;
    if (num_samples) *num_samples = d.size();
    if (height) *height = d.image_shape.at(0);
    if (width) *width = d.image_shape.at(1);
    if (channels) *channels = d.image_shape.at(2);
    if (num_classes) *num_classes = d.num_classes;
  });
}

fpa_status fpa_dataset_sample(const fpa_dataset* dataset, size_t index,
                              float* pixels, size_t len, int* label) {
  return Guard([&] {
    Require(dataset != nullptr, "dataset must not be NULL");
    const fpa::Dataset& d = dataset->data;
    fpa::Check(index < d.size(), fpa::ErrorKind::kInvalidArgument,
               "sample index " + std::to_string(index) + " out of range");
    const fpa::Tensor& t = d.samples[index].pixels;
    if (pixels) {
      fpa::Check(len >= t.size(), fpa::ErrorKind::kShape,
                 "pixel buffer holds " + std::to_string(len) + ", need " +
                     std::to_string(t.size()));
      std::memcpy(pixels, t.data().data(), t.size() * sizeof(float));
    }
    if (label) *label = d.samples[index].label;
  });
}

void fpa_dataset_free(fpa_dataset* dataset) { delete dataset; }

fpa_status fpa_model_load(const char* checkpoint_path, fpa_model** out) {
  return Guard([&] {
    Require(checkpoint_path && out, "arguments must not be NULL");
    *out = new fpa_model{fpa::LoadCheckpoint(checkpoint_path)};
  });
}

fpa_status fpa_model_info(const fpa_model* model, size_t* height,
                          size_t* width, size_t* channels,
                          size_t* num_classes) {
  return Guard([&] {
    Require(model != nullptr, "model must not be NULL");
    const fpa::Model& m = model->checkpoint.model;
    if (height) *height = m.input_shape.at(0);
    if (width) *width = m.input_shape.at(1);
    if (channels) *channels = m.input_shape.at(2);
    if (num_classes) *num_classes = m.num_classes();
  });
}

namespace {

fpa::Tensor InputImage(const fpa_model* model, const float* image,
                       size_t len) {
  Require(model && image, "arguments must not be NULL");
  const fpa::Shape& shape = model->checkpoint.model.input_shape;
  fpa::Check(len == fpa::NumElements(shape), fpa::ErrorKind::kShape,
             "image has " + std::to_string(len) + " values, model expects " +
                 fpa::ShapeToString(shape));
  return fpa::Tensor(shape, std::vector<float>(image, image + len));
}

}  // namespace

fpa_status fpa_model_normalize(const fpa_model* model, const float* raw,
                               float* out, size_t len) {
  return Guard([&] {
    Require(out != nullptr, "out must not be NULL");
    const fpa::Tensor x = model->checkpoint.normalization.Apply(
        InputImage(model, raw, len));
    std::memcpy(out, x.data().data(), len * sizeof(float));
  });
}

fpa_status fpa_model_logits(const fpa_model* model, const float* image,
                            size_t len, float* logits, size_t num_logits) {
  return Guard([&] {
    Require(logits != nullptr, "logits must not be NULL");
    const fpa::Tensor x = InputImage(model, image, len);
    const fpa::Tensor z = fpa::ForwardLogits(model->checkpoint.model, x);
    fpa::Check(num_logits >= z.size(), fpa::ErrorKind::kShape,
               "logit buffer too small");
    std::memcpy(logits, z.data().data(), z.size() * sizeof(float));
  });
}

fpa_status fpa_model_saliency(const fpa_model* model, const float* image,
                              size_t len, const char* estimator, uint64_t seed,
                              int* predicted_class, float* map,
                              size_t map_len) {
  return Guard([&] {
    Require(estimator && map, "arguments must not be NULL");
    const fpa::Tensor x = InputImage(model, image, len);
    const fpa::Checkpoint& ck = model->checkpoint;
    const fpa::EstimatorSpec spec = fpa::FindEstimator(estimator);
    const std::size_t hw = ck.model.input_shape[0] * ck.model.input_shape[1];
    fpa::Check(map_len >= hw, fpa::ErrorKind::kShape, "map buffer too small");
    fpa::EstimatorConfig cfg;
    cfg.ig_baseline = fpa::BlackImage(ck.model.input_shape, ck.normalization);
    const int c = fpa::PredictClass(ck.model, x);
    const std::vector<fpa::SaliencyMap2D> maps = fpa::ComputeSaliencyMaps(
        ck.model, x, c, std::span(&spec, 1), cfg, seed);
    std::memcpy(map, maps.front().scores.data().data(), hw * sizeof(float));
    if (predicted_class) *predicted_class = c;
  });
}

void fpa_model_free(fpa_model* model) { delete model; }

fpa_augment_params fpa_augment_defaults(void) {
  const fpa::AugmentConfig d;
  return {d.p, d.p1_max, d.p2, d.s_max, d.mask_value};
}

fpa_status fpa_augment_batch(const float* in, float* out, size_t k, size_t h,
                             size_t w, size_t c,
                             const fpa_augment_params* params, uint64_t seed) {
  return Guard([&] {
    Require(in && out && params, "arguments must not be NULL");
    fpa::AugmentConfig cfg;
    cfg.p = params->p;
    cfg.p1_max = params->p1_max;
    cfg.p2 = params->p2;
    cfg.s_max = params->s_max;
    cfg.mask_value = params->mask_value;
    cfg.Validate(h, w);
    const std::size_t n = k * h * w * c;
    fpa::Tensor batch({k, h, w, c}, std::vector<float>(in, in + n));
    fpa::Rng rng(seed);
    const fpa::Tensor result = fpa::FpaAugmentBatch(batch, cfg, rng);
    std::memcpy(out, result.data().data(), n * sizeof(float));
  });
}

fpa_status fpa_fidelity_area(const double* fractions, size_t n,
                             const double* lif, const double* mif,
                             double* area) {
  return Guard([&] {
    Require(fractions && lif && mif && area, "arguments must not be NULL");
    const std::span<const double> f(fractions, n);
    fpa::ValidateFractionGrid(f);
    std::vector<double> diff(n);
    for (size_t i = 0; i < n; ++i) diff[i] = lif[i] - mif[i];
    *area = fpa::TrapezoidArea(f, diff);
  });
}

fpa_options fpa_options_defaults(void) {
  fpa_options o{};
  o.percentile = 98.0;
  return o;
}

fpa_status fpa_cmd_train(const fpa_options* options) {
  return Guard([&] { fpa::RunTrain(ToOptions(options)); });
}

fpa_status fpa_cmd_saliency(const fpa_options* options) {
  return Guard([&] { fpa::RunSaliency(ToOptions(options)); });
}

fpa_status fpa_cmd_curves(const fpa_options* options) {
  return Guard([&] { fpa::RunCurves(ToOptions(options)); });
}

fpa_status fpa_cmd_report(const fpa_options* options) {
  return Guard([&] { fpa::RunReport(ToOptions(options)); });
}

fpa_status fpa_cmd_reproduce(const fpa_options* options) {
  return Guard([&] { fpa::RunReproduce(ToOptions(options)); });
}

}  // extern "C"
