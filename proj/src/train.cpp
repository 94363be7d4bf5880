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

#include "fpa/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "fpa/error.hpp"

namespace fpa {
namespace {

constexpr std::size_t kEvalChunk = 256;
constexpr double kDivergenceLoss = 1e4;

enum Stream : std::uint64_t { kShuffle = 1, kFlip = 2, kAugment = 3 };

// Calls fn(ids, logits) for consecutive chunks of the dataset.
template <typename Fn>
void ForEachChunk(const Model& model, const Dataset& dataset, Fn&& fn) {
  std::vector<std::size_t> ids;
  for (std::size_t begin = 0; begin < dataset.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(dataset.size(), begin + kEvalChunk);
    ids.clear();
    for (std::size_t i = begin; i < end; ++i) ids.push_back(i);
    fn(ids, ForwardLogits(model, GatherImages(dataset, ids)));
  }
}

}  // namespace

std::string_view ArmName(AugmentationArm arm) {
  switch (arm) {
    case AugmentationArm::kNone: return "none";
    case AugmentationArm::kFpa: return "fpa";
    case AugmentationArm::kRectangle: return "rectangle";
  }
  return "none";
}

AugmentationArm ParseArm(std::string_view name) {
  for (AugmentationArm a : {AugmentationArm::kNone, AugmentationArm::kFpa,
                            AugmentationArm::kRectangle}) {
    if (ArmName(a) == name) return a;
  }
  Fail(ErrorKind::kConfig, "unknown augmentation arm '" + std::string(name) +
                               "' (expected none, fpa or rectangle)");
}

void TrainConfig::Validate() const {
  Check(lr > 0.0, ErrorKind::kConfig, "train: lr must be > 0");
  Check(momentum >= 0.0 && momentum < 1.0, ErrorKind::kConfig,
        "train: momentum must lie in [0, 1)");
  Check(weight_decay >= 0.0, ErrorKind::kConfig,
        "train: weight_decay must be >= 0");
  Check(batch_size >= 1, ErrorKind::kConfig, "train: batch_size must be >= 1");
  Check(lr_drop_factor > 0.0, ErrorKind::kConfig,
        "train: lr_drop_factor must be > 0");
  for (const auto& [value, name] : {std::pair{fpa.p, "p"},
                                    std::pair{fpa.p1_max, "p1_max"},
                                    std::pair{fpa.p2, "p2"}}) {
    Check(value >= 0.0 && value <= 1.0, ErrorKind::kConfig,
          std::string("augmentation: ") + name + " must lie in [0, 1]");
  }
  Check(fpa.s_max >= 1, ErrorKind::kConfig, "augmentation: s_max must be >= 1");
  rectangle.Validate();
}

double LearningRateAt(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.lr;
  for (std::size_t drop : cfg.lr_drop_epochs) {
    if (drop <= epoch) lr /= cfg.lr_drop_factor;
  }
  return lr;
}

TrainResult Train(Model model, const TrainConfig& cfg, const Dataset& train,
                  const Dataset* val,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.Validate();
  Check(!train.samples.empty(), ErrorKind::kData, "training set is empty");
  if (cfg.augmentation == AugmentationArm::kFpa) {
    cfg.fpa.Validate(train.image_shape[0], train.image_shape[1]);
  }

  TrainResult result;
  std::vector<Tensor> velocity;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = LearningRateAt(cfg, epoch);
    Rng flip_rng(DeriveSeed(cfg.seed, kFlip, epoch));
    Rng aug_rng(DeriveSeed(cfg.seed, kAugment, epoch));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& ids :
         BatchIter(train.size(), cfg.batch_size,
                   DeriveSeed(cfg.seed, kShuffle, epoch))) {
      std::vector<Tensor> images;
      images.reserve(ids.size());
      for (std::size_t id : ids) {
        images.push_back(RandomHorizontalFlip(train.samples[id].pixels, flip_rng));
      }
      Tensor batch = Stack(images);
      if (cfg.augmentation == AugmentationArm::kFpa) {
        batch = FpaAugmentBatch(batch, cfg.fpa, aug_rng);
      } else if (cfg.augmentation == AugmentationArm::kRectangle) {
        batch = RectangleEraseBatch(batch, cfg.rectangle, aug_rng);
      }

      ad::Tape tape;
      std::vector<ad::Var> params;
      ad::Var x = tape.Constant(std::move(batch));
      ad::Var logits = TraceForward(tape, model, x, &params);
      ad::Var loss = tape.SoftmaxCrossEntropy(logits, GatherLabels(train, ids));
      const double loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value) || loss_value > kDivergenceLoss) {
        Fail(ErrorKind::kDivergence,
             "training diverged at epoch " + std::to_string(epoch) +
                 ", batch " + std::to_string(batches) + ": loss " +
                 std::to_string(loss_value));
      }
      const ad::Gradients grads = tape.Backward(loss);
      std::vector<Tensor> param_grads;
      param_grads.reserve(params.size());
      for (ad::Var p : params) param_grads.push_back(grads[p]);
      SgdMomentumStep(model.params, param_grads, velocity, lr, cfg.momentum,
                      cfg.weight_decay);
      loss_sum += loss_value;
      ++batches;
    }
    Check(model.params.AllFinite(), ErrorKind::kDivergence,
          "training diverged: non-finite parameters after epoch " +
              std::to_string(epoch));

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.batch_loss = loss_sum / static_cast<double>(batches);
    m.train_loss = EvaluateLoss(model, train);
    m.train_accuracy = EvaluateAccuracy(model, train);
    m.val_accuracy = val ? EvaluateAccuracy(model, *val)
                         : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.model = std::move(model);
  return result;
}

double EvaluateAccuracy(const Model& model, const Dataset& dataset) {
  Check(!dataset.samples.empty(), ErrorKind::kData,
        "cannot evaluate accuracy on an empty dataset");
  std::size_t correct = 0;
  const std::size_t classes = model.num_classes();
  ForEachChunk(model, dataset, [&](const std::vector<std::size_t>& ids,
                                   const Tensor& logits) {
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const int pred = Argmax(logits.data().subspan(r * classes, classes));
      if (pred == dataset.samples[ids[r]].label) ++correct;
    }
  });
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double EvaluateLoss(const Model& model, const Dataset& dataset) {
  Check(!dataset.samples.empty(), ErrorKind::kData,
        "cannot evaluate loss on an empty dataset");
  double total = 0.0;
  ForEachChunk(model, dataset, [&](const std::vector<std::size_t>& ids,
                                   const Tensor& logits) {
    ad::OpMeta meta;
    meta.indices = GatherLabels(dataset, ids);
    const Tensor loss = ad::ForwardPrimitive(
        ad::OpKind::kSoftmaxXent, std::span<const Tensor>(&logits, 1), meta);
    total += static_cast<double>(loss[0]) * static_cast<double>(ids.size());
  });
  return total / static_cast<double>(dataset.size());
}

}  // namespace fpa
