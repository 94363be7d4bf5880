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

#include "fpa/model.hpp"

#include <algorithm>
#include <cmath>

#include "fpa/error.hpp"
#include "fpa/random.hpp"

namespace fpa {

std::string_view LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kPool: return "pool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "unknown";
}

LayerKind ParseLayerKind(std::string_view name) {
  for (LayerKind k : {LayerKind::kConv, LayerKind::kRelu, LayerKind::kPool,
                      LayerKind::kFlatten, LayerKind::kDense}) {
    if (LayerKindName(k) == name) return k;
  }
  Fail(ErrorKind::kConfig, "unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::Conv(std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::Relu() { return LayerSpec{}; }

LayerSpec LayerSpec::Pool(std::size_t window) {
  LayerSpec s;
  s.kind = LayerKind::kPool;
  s.window = window;
  return s;
}

LayerSpec LayerSpec::Flatten() {
  LayerSpec s;
  s.kind = LayerKind::kFlatten;
  return s;
}

LayerSpec LayerSpec::Dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.units = units;
  return s;
}

const Tensor& ModelParams::at(std::string_view name) const {
  for (const Parameter& p : tensors) {
    if (p.name == name) return p.value;
  }
  Fail(ErrorKind::kInvalidArgument,
       "no parameter named '" + std::string(name) + "'");
}

bool ModelParams::AllFinite() const {
  return std::all_of(tensors.begin(), tensors.end(),
                     [](const Parameter& p) { return p.value.AllFinite(); });
}

std::vector<Shape> LayerOutputShapes(const Shape& input_shape,
                                     std::span<const LayerSpec> layers) {
  auto fail = [](std::size_t i, const std::string& why) {
    Fail(ErrorKind::kConfig,
         "layer " + std::to_string(i) + ": incompatible layer chain: " + why);
  };
  if (input_shape.size() != 3 || NumElements(input_shape) == 0) {
    Fail(ErrorKind::kConfig,
         "input shape must be H x W x C, got " + ShapeToString(input_shape));
  }
  std::vector<Shape> shapes;
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::kConv: {
        if (cur.size() != 3) fail(i, "conv needs an H x W x C input");
        if (l.out_channels == 0 || l.kernel == 0 || l.stride == 0) {
          fail(i, "conv needs positive channels, kernel and stride");
        }
        if (cur[0] + 2 * l.padding < l.kernel ||
            cur[1] + 2 * l.padding < l.kernel) {
          fail(i, "kernel larger than padded input " + ShapeToString(cur));
        }
        cur = {(cur[0] + 2 * l.padding - l.kernel) / l.stride + 1,
               (cur[1] + 2 * l.padding - l.kernel) / l.stride + 1,
               l.out_channels};
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kPool:
        if (cur.size() != 3) fail(i, "pool needs an H x W x C input");
        if (l.window == 0 || cur[0] < l.window || cur[1] < l.window) {
          fail(i, "pool window does not fit " + ShapeToString(cur));
        }
        cur = {cur[0] / l.window, cur[1] / l.window, cur[2]};
        break;
      case LayerKind::kFlatten:
        cur = {NumElements(cur)};
        break;
      case LayerKind::kDense:
        if (cur.size() != 1) fail(i, "dense needs a flat input; add flatten");
        if (l.units == 0) fail(i, "dense needs positive units");
        cur = {l.units};
        break;
    }
    shapes.push_back(cur);
  }
  if (shapes.empty() || shapes.back().size() != 1) {
    Fail(ErrorKind::kConfig,
         "incompatible layer chain: network must end in a flat logit vector");
  }
  return shapes;
}

Model BuildModel(const Shape& input_shape, std::vector<LayerSpec> layers,
                 std::uint64_t init_seed) {
  const std::vector<Shape> shapes = LayerOutputShapes(input_shape, layers);
  Model model;
  model.input_shape = input_shape;
  model.params.num_classes = shapes.back()[0];
  Rng rng(init_seed);
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    std::size_t fan_in = 0;
    Shape wshape;
    if (l.kind == LayerKind::kConv) {
      fan_in = l.kernel * l.kernel * cur[2];
      wshape = {l.kernel, l.kernel, cur[2], l.out_channels};
    } else if (l.kind == LayerKind::kDense) {
      fan_in = cur[0];
      wshape = {cur[0], l.units};
    }
    if (fan_in > 0) {
      Tensor w(wshape);
      const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (float& v : w.data()) {
        v = static_cast<float>(scale * StandardNormal(rng));
      }
      const std::string prefix = "layer" + std::to_string(i);
      model.params.tensors.push_back({prefix + ".weight", std::move(w)});
      model.params.tensors.push_back(
          {prefix + ".bias", Tensor({wshape.back()})});
    }
    cur = shapes[i];
  }
  model.layers = std::move(layers);
  return model;
}

std::vector<LayerSpec> DefaultCnnLayers(std::size_t num_classes) {
  return {LayerSpec::Conv(6, 3, 1, 1), LayerSpec::Relu(), LayerSpec::Pool(2),
          LayerSpec::Conv(12, 3, 1, 1), LayerSpec::Relu(), LayerSpec::Pool(2),
          LayerSpec::Flatten(), LayerSpec::Dense(num_classes)};
}

ad::Var TraceForward(ad::Tape& tape, const Model& model, ad::Var batch,
                     std::vector<ad::Var>* param_vars) {
  const Shape& in = tape.value(batch).shape();
  Shape expected{model.input_shape};
  Check(in.size() == 4 && Shape(in.begin() + 1, in.end()) == expected,
        ErrorKind::kShape,
        "model expects batches of " + ShapeToString(expected) + ", got " +
            ShapeToString(in));
  std::size_t next = 0;
  auto param = [&]() {
    Check(next < model.params.tensors.size(), ErrorKind::kShape,
          "model has fewer parameters than its layers require");
    const Tensor& t = model.params.tensors[next++].value;
    if (param_vars) {
      ad::Var v = tape.Leaf(t, true);
      param_vars->push_back(v);
      return v;
    }
    return tape.Constant(t);
  };
  ad::Var h = batch;
  for (const LayerSpec& l : model.layers) {
    switch (l.kind) {
      case LayerKind::kConv: {
        ad::Var w = param();
        ad::Var b = param();
        h = tape.AddBias(tape.Conv2d(h, w, {l.stride, l.padding}), b);
        break;
      }
      case LayerKind::kRelu:
        h = tape.Relu(h);
        break;
      case LayerKind::kPool:
        h = tape.AvgPool(h, l.window);
        break;
      case LayerKind::kFlatten:
        h = tape.Flatten(h);
        break;
      case LayerKind::kDense: {
        ad::Var w = param();
        ad::Var b = param();
        h = tape.AddBias(tape.MatMul(h, w), b);
        break;
      }
    }
  }
  return h;
}

Tensor ForwardLogits(const Model& model, const Tensor& batch) {
  Tensor input = batch;
  if (batch.shape() == model.input_shape) {
    Shape s{1};
    s.insert(s.end(), batch.shape().begin(), batch.shape().end());
    input = batch.Reshaped(std::move(s));
  }
  ad::Tape tape;
  ad::Var x = tape.Constant(std::move(input));
  return tape.value(TraceForward(tape, model, x));
}

int Argmax(std::span<const float> values) {
  Check(!values.empty(), ErrorKind::kInvalidArgument, "argmax of empty span");
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

void SgdMomentumStep(ModelParams& params, std::span<const Tensor> grads,
                     std::vector<Tensor>& velocity, double lr, double momentum,
                     double weight_decay) {
  Check(grads.size() == params.tensors.size(), ErrorKind::kShape,
        "sgd: " + std::to_string(grads.size()) + " gradients for " +
            std::to_string(params.tensors.size()) + " parameters");
  if (velocity.empty()) {
    for (const Parameter& p : params.tensors) velocity.emplace_back(p.value.shape());
  }
  Check(velocity.size() == params.tensors.size(), ErrorKind::kShape,
        "sgd: velocity count differs from parameter count");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor& w = params.tensors[i].value;
    Tensor& v = velocity[i];
    Check(grads[i].shape() == w.shape() && v.shape() == w.shape(),
          ErrorKind::kShape,
          "sgd: shape mismatch for " + params.tensors[i].name);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double vel = momentum * v[j] + grads[i][j] + weight_decay * w[j];
      v[j] = static_cast<float>(vel);
      w[j] = static_cast<float>(w[j] - lr * vel);
    }
  }
}

}  // namespace fpa
