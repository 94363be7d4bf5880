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

#include "fpa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fpa/error.hpp"

namespace fpa::ad {
namespace {

using Grad = std::vector<double>;

[[noreturn]] void ShapeError(OpKind kind, const std::string& detail) {
  Fail(ErrorKind::kShape, std::string(OpName(kind)) + ": " + detail);
}

void ExpectRank(OpKind kind, const Tensor& t, std::size_t rank,
                const char* what) {
  if (t.rank() != rank) {
    ShapeError(kind, std::string(what) + " must have rank " +
                         std::to_string(rank) + ", got " +
                         ShapeToString(t.shape()));
  }
}

void ExpectSameShape(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    ShapeError(kind, "operand shapes differ: " + ShapeToString(a.shape()) +
                         " vs " + ShapeToString(b.shape()));
  }
}

Tensor FromDouble(Shape shape, const std::vector<double>& values) {
  std::vector<float> data(values.size());
  std::transform(values.begin(), values.end(), data.begin(),
                 [](double v) { return static_cast<float>(v); });
  return Tensor(std::move(shape), std::move(data));
}

// ---- matmul ---------------------------------------------------------------

Tensor MatMulForward(const Tensor& a, const Tensor& b) {
  ExpectRank(OpKind::kMatmul, a, 2, "lhs");
  ExpectRank(OpKind::kMatmul, b, 2, "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    ShapeError(OpKind::kMatmul, "inner dimensions differ: lhs " +
                                    ShapeToString(a.shape()) + ", rhs " +
                                    ShapeToString(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const float* brow = &b.data()[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return FromDouble({m, n}, out);
}

void MatMulBackward(const Tensor& a, const Tensor& b, const Grad& g,
                    Grad* ga, Grad* gb) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (ga) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
        (*ga)[i * k + p] += acc;
      }
    }
  }
  if (gb) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[i * k + p];
        for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * g[i * n + j];
      }
    }
  }
}

// ---- conv2d ---------------------------------------------------------------

struct ConvGeometry {
  std::size_t batch, height, width, in_ch;
  std::size_t kh, kw, out_ch;
  std::size_t out_h, out_w, stride, pad;
};

ConvGeometry ConvShapes(const Tensor& x, const Tensor& w, Conv2dMeta meta) {
  ExpectRank(OpKind::kConv2d, x, 4, "input");
  ExpectRank(OpKind::kConv2d, w, 4, "kernel");
  if (meta.stride < 1) ShapeError(OpKind::kConv2d, "stride must be >= 1");
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.height = x.dim(1);
  g.width = x.dim(2);
  g.in_ch = x.dim(3);
  g.kh = w.dim(0);
  g.kw = w.dim(1);
  g.out_ch = w.dim(3);
  g.stride = meta.stride;
  g.pad = meta.padding;
  if (w.dim(2) != g.in_ch) {
    ShapeError(OpKind::kConv2d,
               "kernel input channels " + std::to_string(w.dim(2)) +
                   " differ from input channels " + std::to_string(g.in_ch));
  }
  if (g.height + 2 * g.pad < g.kh || g.width + 2 * g.pad < g.kw) {
    ShapeError(OpKind::kConv2d, "kernel " + ShapeToString(w.shape()) +
                                    " larger than padded input " +
                                    ShapeToString(x.shape()));
  }
  g.out_h = (g.height + 2 * g.pad - g.kh) / g.stride + 1;
  g.out_w = (g.width + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

Tensor Conv2dForward(const Tensor& x, const Tensor& w, Conv2dMeta meta) {
  const ConvGeometry g = ConvShapes(x, w, meta);
  Tensor out({g.batch, g.out_h, g.out_w, g.out_ch});
  std::vector<double> acc(g.out_ch);
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  float* od = out.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
              static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            const float* xp =
                xd + ((n * g.height + iy) * g.width + ix) * g.in_ch;
            const float* wp = wd + (ky * g.kw + kx) * g.in_ch * g.out_ch;
            for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
              const double xv = xp[ci];
              const float* wrow = wp + ci * g.out_ch;
              for (std::size_t co = 0; co < g.out_ch; ++co) {
                acc[co] += xv * wrow[co];
              }
            }
          }
        }
        float* op = od + ((n * g.out_h + oy) * g.out_w + ox) * g.out_ch;
        for (std::size_t co = 0; co < g.out_ch; ++co) {
          op[co] = static_cast<float>(acc[co]);
        }
      }
    }
  }
  return out;
}

void Conv2dBackward(const Tensor& x, const Tensor& w, Conv2dMeta meta,
                    const Grad& gout, Grad* gx, Grad* gw) {
  const ConvGeometry g = ConvShapes(x, w, meta);
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const double* gp =
            &gout[((n * g.out_h + oy) * g.out_w + ox) * g.out_ch];
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
              static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            const std::size_t xoff =
                ((n * g.height + iy) * g.width + ix) * g.in_ch;
            const std::size_t woff = (ky * g.kw + kx) * g.in_ch * g.out_ch;
            for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
              const float* wrow = wd + woff + ci * g.out_ch;
              if (gx) {
                double acc = 0.0;
                for (std::size_t co = 0; co < g.out_ch; ++co) {
                  acc += gp[co] * wrow[co];
                }
                (*gx)[xoff + ci] += acc;
              }
              if (gw) {
                const double xv = xd[xoff + ci];
                double* gwrow = gw->data() + woff + ci * g.out_ch;
                for (std::size_t co = 0; co < g.out_ch; ++co) {
                  gwrow[co] += xv * gp[co];
                }
              }
            }
          }
        }
      }
    }
  }
}

// ---- pooling --------------------------------------------------------------

Tensor AvgPoolForward(const Tensor& x, std::size_t window) {
  ExpectRank(OpKind::kPool, x, 4, "input");
  if (window < 1 || x.dim(1) < window || x.dim(2) < window) {
    ShapeError(OpKind::kPool, "window " + std::to_string(window) +
                                  " does not fit input " +
                                  ShapeToString(x.shape()));
  }
  const std::size_t k = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h / window, ow = w / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor out({k, oh, ow, c});
  for (std::size_t n = 0; n < k; ++n) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              acc += x[((n * h + oy * window + dy) * w + ox * window + dx) * c +
                       ch];
            }
          }
          out[((n * oh + oy) * ow + ox) * c + ch] =
              static_cast<float>(acc * inv);
        }
      }
    }
  }
  return out;
}

void AvgPoolBackward(const Tensor& x, std::size_t window, const Grad& gout,
                     Grad* gx) {
  const std::size_t k = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h / window, ow = w / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  for (std::size_t n = 0; n < k; ++n) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double gv = gout[((n * oh + oy) * ow + ox) * c + ch] * inv;
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              (*gx)[((n * h + oy * window + dy) * w + ox * window + dx) * c +
                    ch] += gv;
            }
          }
        }
      }
    }
  }
}

// ---- row-wise heads -------------------------------------------------------

void CheckIndices(OpKind kind, const Tensor& logits,
                  const std::vector<int>& indices) {
  ExpectRank(kind, logits, 2, "logits");
  if (indices.size() != logits.dim(0)) {
    ShapeError(kind, std::to_string(indices.size()) + " indices for " +
                         std::to_string(logits.dim(0)) + " rows");
  }
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= logits.dim(1)) {
      Fail(ErrorKind::kInvalidArgument,
           std::string(OpName(kind)) + ": class index " + std::to_string(idx) +
               " out of range for " + std::to_string(logits.dim(1)) +
               " classes");
    }
  }
}

std::vector<double> RowSoftmax(const Tensor& logits, std::size_t row) {
  const std::size_t n = logits.dim(1);
  const float* z = logits.data().data() + row * n;
  const double zmax = *std::max_element(z, z + n);
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p[j] = std::exp(static_cast<double>(z[j]) - zmax);
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

Tensor SoftmaxXentForward(const Tensor& logits, const std::vector<int>& labels) {
  CheckIndices(OpKind::kSoftmaxXent, logits, labels);
  const std::size_t k = logits.dim(0), n = logits.dim(1);
  double loss = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const float* z = logits.data().data() + r * n;
    const double zmax = *std::max_element(z, z + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(z[j] - zmax);
    loss += zmax + std::log(total) - z[labels[r]];
  }
  return Tensor({1}, {static_cast<float>(loss / static_cast<double>(k))});
}

Tensor GatherForward(const Tensor& logits, const std::vector<int>& classes) {
  CheckIndices(OpKind::kGatherLogit, logits, classes);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    total += logits[r * logits.dim(1) + classes[r]];
  }
  return Tensor({1}, {static_cast<float>(total)});
}

using Inputs = std::vector<const Tensor*>;

Tensor Dispatch(OpKind kind, const Inputs& in, const OpMeta& meta) {
  auto arity = [&](std::size_t n) {
    if (in.size() != n) {
      ShapeError(kind, "expected " + std::to_string(n) + " inputs, got " +
                           std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::kLeaf:
      arity(1);
      return *in[0];
    case OpKind::kMatmul:
      arity(2);
      return MatMulForward(*in[0], *in[1]);
    case OpKind::kConv2d:
      arity(2);
      return Conv2dForward(*in[0], *in[1], meta.conv);
    case OpKind::kRelu: {
      arity(1);
      Tensor out = *in[0];
      for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
      return out;
    }
    case OpKind::kAddBias: {
      arity(2);
      const Tensor& x = *in[0];
      const Tensor& b = *in[1];
      if (b.rank() != 1 || x.rank() < 1 || x.shape().back() != b.dim(0)) {
        ShapeError(kind, "bias " + ShapeToString(b.shape()) +
                             " does not match last axis of " +
                             ShapeToString(x.shape()));
      }
      Tensor out = x;
      const std::size_t n = b.dim(0);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(x[i]) + b[i % n]);
      }
      return out;
    }
    case OpKind::kFlatten: {
      arity(1);
      const Tensor& x = *in[0];
      if (x.rank() < 2) ShapeError(kind, "input rank must be >= 2");
      return x.Reshaped({x.dim(0), x.size() / x.dim(0)});
    }
    case OpKind::kPool:
      arity(1);
      return AvgPoolForward(*in[0], meta.pool_window);
    case OpKind::kSoftmaxXent:
      arity(1);
      return SoftmaxXentForward(*in[0], meta.indices);
    case OpKind::kScale: {
      arity(1);
      Tensor out = *in[0];
      for (float& v : out.data()) {
        v = static_cast<float>(meta.scale * static_cast<double>(v));
      }
      return out;
    }
    case OpKind::kAdd:
    case OpKind::kMul: {
      arity(2);
      ExpectSameShape(kind, *in[0], *in[1]);
      Tensor out = *in[0];
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = (*in[0])[i], b = (*in[1])[i];
        out[i] = static_cast<float>(kind == OpKind::kAdd ? a + b : a * b);
      }
      return out;
    }
    case OpKind::kGatherLogit:
      arity(1);
      return GatherForward(*in[0], meta.indices);
  }
  Fail(ErrorKind::kInternal, "unhandled op kind");
}

}  // namespace

std::string_view OpName(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kAddBias: return "add-bias";
    case OpKind::kFlatten: return "flatten";
    case OpKind::kPool: return "pool";
    case OpKind::kSoftmaxXent: return "softmax-xent";
    case OpKind::kScale: return "scale";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kGatherLogit: return "gather-logit";
  }
  return "unknown";
}

const Tensor& Gradients::operator[](Var v) const {
  Check(has(v), ErrorKind::kInvalidArgument,
        "no gradient recorded for node " + std::to_string(v.id));
  return *grads_[v.id];
}

Tensor ForwardPrimitive(OpKind kind, std::span<const Tensor> inputs,
                        const OpMeta& meta) {
  Inputs in;
  for (const Tensor& t : inputs) in.push_back(&t);
  return Dispatch(kind, in, meta);
}

Var Tape::Leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  Check(v.id < nodes_.size(), ErrorKind::kInvalidArgument,
        "variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::Push(OpKind kind, std::vector<std::size_t> inputs, Tensor value,
               OpMeta meta) {
  Node n;
  n.kind = kind;
  for (std::size_t id : inputs) n.requires_grad |= nodes_[id].requires_grad;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.meta = std::move(meta);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::Record(OpKind kind, std::vector<Var> args, OpMeta meta) {
  Inputs in;
  std::vector<std::size_t> ids;
  for (Var v : args) {
    in.push_back(&node(v).value);
    ids.push_back(v.id);
  }
  Tensor out = Dispatch(kind, in, meta);
  return Push(kind, std::move(ids), std::move(out), std::move(meta));
}

Var Tape::MatMul(Var a, Var b) { return Record(OpKind::kMatmul, {a, b}, {}); }

Var Tape::Conv2d(Var input, Var kernel, Conv2dMeta meta) {
  OpMeta m;
  m.conv = meta;
  return Record(OpKind::kConv2d, {input, kernel}, std::move(m));
}

Var Tape::Relu(Var x) { return Record(OpKind::kRelu, {x}, {}); }

Var Tape::AddBias(Var x, Var bias) {
  return Record(OpKind::kAddBias, {x, bias}, {});
}

Var Tape::Flatten(Var x) { return Record(OpKind::kFlatten, {x}, {}); }

Var Tape::AvgPool(Var x, std::size_t window) {
  OpMeta m;
  m.pool_window = window;
  return Record(OpKind::kPool, {x}, std::move(m));
}

Var Tape::SoftmaxCrossEntropy(Var logits, std::vector<int> labels) {
  OpMeta m;
  m.indices = std::move(labels);
  return Record(OpKind::kSoftmaxXent, {logits}, std::move(m));
}

Var Tape::Scale(Var x, double factor) {
  OpMeta m;
  m.scale = factor;
  return Record(OpKind::kScale, {x}, std::move(m));
}

Var Tape::Add(Var a, Var b) { return Record(OpKind::kAdd, {a, b}, {}); }

Var Tape::Mul(Var a, Var b) { return Record(OpKind::kMul, {a, b}, {}); }

Var Tape::GatherLogit(Var logits, std::vector<int> classes) {
  OpMeta m;
  m.indices = std::move(classes);
  return Record(OpKind::kGatherLogit, {logits}, std::move(m));
}

Gradients Tape::Backward(Var root) const {
  const Node& r = node(root);
  Check(r.value.size() == 1, ErrorKind::kInvalidArgument,
        "backward: root must be scalar, got shape " +
            ShapeToString(r.value.shape()));

  std::vector<Grad> grads(nodes_.size());
  auto buffer = [&](std::size_t id) -> Grad* {
    if (!nodes_[id].requires_grad) return nullptr;
    if (grads[id].empty()) grads[id].assign(nodes_[id].value.size(), 0.0);
    return &grads[id];
  };
  if (r.requires_grad) buffer(root.id)->at(0) = 1.0;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || grads[id].empty() || n.kind == OpKind::kLeaf) {
      continue;
    }
    const Grad& g = grads[id];
    const auto& in = n.inputs;
    switch (n.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatmul:
        MatMulBackward(nodes_[in[0]].value, nodes_[in[1]].value, g,
                       buffer(in[0]), buffer(in[1]));
        break;
      case OpKind::kConv2d:
        Conv2dBackward(nodes_[in[0]].value, nodes_[in[1]].value, n.meta.conv,
                       g, buffer(in[0]), buffer(in[1]));
        break;
      case OpKind::kRelu:
        if (Grad* gx = buffer(in[0])) {
          const Tensor& x = nodes_[in[0]].value;
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0f) (*gx)[i] += g[i];
          }
        }
        break;
      case OpKind::kAddBias: {
        if (Grad* gx = buffer(in[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        }
        if (Grad* gb = buffer(in[1])) {
          const std::size_t nb = gb->size();
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % nb] += g[i];
        }
        break;
      }
      case OpKind::kFlatten:
        if (Grad* gx = buffer(in[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        }
        break;
      case OpKind::kPool:
        if (Grad* gx = buffer(in[0])) {
          AvgPoolBackward(nodes_[in[0]].value, n.meta.pool_window, g, gx);
        }
        break;
      case OpKind::kSoftmaxXent:
        if (Grad* gx = buffer(in[0])) {
          const Tensor& z = nodes_[in[0]].value;
          const std::size_t rows = z.dim(0), cols = z.dim(1);
          const double scale = g[0] / static_cast<double>(rows);
          for (std::size_t k = 0; k < rows; ++k) {
            const std::vector<double> p = RowSoftmax(z, k);
            for (std::size_t j = 0; j < cols; ++j) {
              const double onehot =
                  static_cast<int>(j) == n.meta.indices[k] ? 1.0 : 0.0;
              (*gx)[k * cols + j] += scale * (p[j] - onehot);
            }
          }
        }
        break;
      case OpKind::kScale:
        if (Grad* gx = buffer(in[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            (*gx)[i] += n.meta.scale * g[i];
          }
        }
        break;
      case OpKind::kAdd:
        for (std::size_t side = 0; side < 2; ++side) {
          if (Grad* gx = buffer(in[side])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
          }
        }
        break;
      case OpKind::kMul:
        for (std::size_t side = 0; side < 2; ++side) {
          if (Grad* gx = buffer(in[side])) {
            const Tensor& other = nodes_[in[1 - side]].value;
            for (std::size_t i = 0; i < g.size(); ++i) {
              (*gx)[i] += g[i] * other[i];
            }
          }
        }
        break;
      case OpKind::kGatherLogit:
        if (Grad* gx = buffer(in[0])) {
          const std::size_t cols = nodes_[in[0]].value.dim(1);
          for (std::size_t k = 0; k < n.meta.indices.size(); ++k) {
            (*gx)[k * cols + n.meta.indices[k]] += g[0];
          }
        }
        break;
    }
  }

  std::vector<std::optional<Tensor>> out(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].requires_grad || nodes_[id].kind != OpKind::kLeaf) continue;
    const Shape& shape = nodes_[id].value.shape();
    out[id] = grads[id].empty() ? Tensor(shape)
                                : FromDouble(shape, grads[id]);
  }
  return Gradients(std::move(out));
}

}  // namespace fpa::ad
