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

#ifndef FPA_AUTODIFF_HPP_
#define FPA_AUTODIFF_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fpa/tensor.hpp"

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation of one forward pass. Values are stored as
// float32; all kernels accumulate in float64. Nodes are appended in creation
// order, which is a topological order, so Backward() is a single reverse
// sweep that visits each node once.
namespace fpa::ad {

enum class OpKind {
  kLeaf,
  kMatmul,
  kConv2d,
  kRelu,
  kAddBias,
  kFlatten,
  kPool,
  kSoftmaxXent,
  kScale,
  kAdd,
  kMul,
  kGatherLogit,
};

std::string_view OpName(OpKind kind);

struct Conv2dMeta {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Per-op parameters. Only the fields relevant to the op kind are read.
struct OpMeta {
  Conv2dMeta conv;
  std::size_t pool_window = 2;
  double scale = 1.0;
  std::vector<int> indices;  // labels (softmax-xent) or classes (gather)
};

struct Var {
  std::size_t id = 0;
};

class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor>> grads)
      : grads_(std::move(grads)) {}

  bool has(Var v) const { return v.id < grads_.size() && grads_[v.id]; }
  // Gradient of the root w.r.t. `v`; throws if `v` does not require grad.
  const Tensor& operator[](Var v) const;

 private:
  std::vector<std::optional<Tensor>> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var Leaf(Tensor value, bool requires_grad = true);
  Var Constant(Tensor value) { return Leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  std::size_t size() const { return nodes_.size(); }

  // A (M x K) times B (K x N).
  Var MatMul(Var a, Var b);
  // Input K x H x W x Cin, kernel k x k x Cin x Cout.
  Var Conv2d(Var input, Var kernel, Conv2dMeta meta);
  Var Relu(Var x);
  // Adds a bias vector along the last axis.
  Var AddBias(Var x, Var bias);
  // K x ... -> K x rest.
  Var Flatten(Var x);
  // Non-overlapping average pooling, K x H x W x C -> K x H/w x W/w x C.
  Var AvgPool(Var x, std::size_t window = 2);
  // Mean over rows of -log softmax(logits[k])[labels[k]]; max-subtracted.
  Var SoftmaxCrossEntropy(Var logits, std::vector<int> labels);
  Var Scale(Var x, double factor);
  Var Add(Var a, Var b);
  Var Mul(Var a, Var b);
  // Sum over rows of logits[k][classes[k]]. With one row this is the
  // pre-softmax class score S_c.
  Var GatherLogit(Var logits, std::vector<int> classes);

  // Exact reverse-mode gradients of a scalar root w.r.t. every node that
  // depends on a requires-grad leaf.
  Gradients Backward(Var root) const;

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    OpMeta meta;
    bool requires_grad = false;
  };

  Var Record(OpKind kind, std::vector<Var> args, OpMeta meta);
  Var Push(OpKind kind, std::vector<std::size_t> inputs, Tensor value,
           OpMeta meta);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

// Untraced evaluation of a single primitive.
Tensor ForwardPrimitive(OpKind kind, std::span<const Tensor> inputs,
                        const OpMeta& meta = {});

}  // namespace fpa::ad

#endif  // FPA_AUTODIFF_HPP_
