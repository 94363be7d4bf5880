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

#ifndef FPA_MODEL_HPP_
#define FPA_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpa/autodiff.hpp"
#include "fpa/tensor.hpp"

namespace fpa {

enum class LayerKind { kConv, kRelu, kPool, kFlatten, kDense };

std::string_view LayerKindName(LayerKind kind);
LayerKind ParseLayerKind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t out_channels = 0;  // conv
  std::size_t kernel = 3;        // conv
  std::size_t stride = 1;        // conv
  std::size_t padding = 0;       // conv
  std::size_t window = 2;        // pool
  std::size_t units = 0;         // dense

  static LayerSpec Conv(std::size_t out_channels, std::size_t kernel,
                        std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec Relu();
  static LayerSpec Pool(std::size_t window = 2);
  static LayerSpec Flatten();
  static LayerSpec Dense(std::size_t units);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Parameter {
  std::string name;
  Tensor value;
};

// Parameter tensors in layer order (weight before bias).
struct ModelParams {
  std::vector<Parameter> tensors;
  std::size_t num_classes = 0;

  const Tensor& at(std::string_view name) const;
  bool AllFinite() const;
};

// A feed-forward classifier producing pre-softmax logits.
struct Model {
  Shape input_shape;  // H x W x C
  std::vector<LayerSpec> layers;
  ModelParams params;

  std::size_t num_classes() const { return params.num_classes; }
};

// Per-sample output shape after each layer; throws kConfig when the chain
// does not compose or does not end in a flat logit vector.
std::vector<Shape> LayerOutputShapes(const Shape& input_shape,
                                     std::span<const LayerSpec> layers);

// He initialization (normal, stddev sqrt(2 / fan_in)) for conv and dense
// weights, zero biases. Deterministic in `init_seed`.
Model BuildModel(const Shape& input_shape, std::vector<LayerSpec> layers,
                 std::uint64_t init_seed);

// The default desk-scale classifier: two conv-relu-pool blocks and a dense
// head.
std::vector<LayerSpec> DefaultCnnLayers(std::size_t num_classes);

// Records the network on `tape`. Parameter leaves are appended to
// `param_vars` (in ModelParams order) when it is non-null; otherwise the
// parameters enter the tape as constants.
ad::Var TraceForward(ad::Tape& tape, const Model& model, ad::Var batch,
                     std::vector<ad::Var>* param_vars = nullptr);

// Logits for a batch K x H x W x C (or a single H x W x C image, giving a
// 1 x num_classes result).
Tensor ForwardLogits(const Model& model, const Tensor& batch);

// Index of the largest entry; ties go to the smallest index.
int Argmax(std::span<const float> values);

// Classic SGD with momentum and coupled L2 weight decay:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
void SgdMomentumStep(ModelParams& params, std::span<const Tensor> grads,
                     std::vector<Tensor>& velocity, double lr, double momentum,
                     double weight_decay);

}  // namespace fpa

#endif  // FPA_MODEL_HPP_
