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

#ifndef FPA_TRAIN_HPP_
#define FPA_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "fpa/augment.hpp"
#include "fpa/data.hpp"
#include "fpa/model.hpp"

namespace fpa {

enum class AugmentationArm { kNone, kFpa, kRectangle };

std::string_view ArmName(AugmentationArm arm);
AugmentationArm ParseArm(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 15;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<std::size_t> lr_drop_epochs{10};
  double lr_drop_factor = 10.0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  AugmentationArm augmentation = AugmentationArm::kNone;
  AugmentConfig fpa;
  RectangleConfig rectangle;

  void Validate() const;
};

// Learning rate in effect during `epoch` (0-based): the base rate divided by
// lr_drop_factor once for every drop epoch <= epoch.
double LearningRateAt(const TrainConfig& cfg, std::size_t epoch);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double batch_loss = 0.0;      // mean loss over the augmented mini-batches
  double train_loss = 0.0;      // clean training-set loss after the epoch
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;    // NaN when no validation set is given
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> history;
};

// Mini-batch SGD. Every batch gets horizontal flips; FPA or rectangle
// erasing follows according to cfg.augmentation. Shuffling, flips and
// augmentation use separate seeded streams, so arms trained with the same
// seed see the same batches and flips. Throws kDivergence when the loss is
// non-finite or exceeds 1e4.
TrainResult Train(Model model, const TrainConfig& cfg, const Dataset& train,
                  const Dataset* val = nullptr,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

// Fraction of samples whose argmax logit equals the label.
double EvaluateAccuracy(const Model& model, const Dataset& dataset);
// Mean softmax cross-entropy over the dataset.
double EvaluateLoss(const Model& model, const Dataset& dataset);

}  // namespace fpa

#endif  // FPA_TRAIN_HPP_
