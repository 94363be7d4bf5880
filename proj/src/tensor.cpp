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

#include "fpa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fpa/error.hpp"

namespace fpa {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

namespace {

void CheckShape(const Shape& shape) {
  for (std::size_t d : shape) {
    Check(d > 0, ErrorKind::kShape,
          "tensor dimensions must be positive, got " + ShapeToString(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  CheckShape(shape_);
  data_.assign(NumElements(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  CheckShape(shape_);
  Check(data_.size() == NumElements(shape_), ErrorKind::kShape,
        "tensor data length " + std::to_string(data_.size()) +
            " does not match shape " + ShapeToString(shape_));
}

Tensor Tensor::Filled(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::Reshaped(Shape shape) const {
  Check(NumElements(shape) == size(), ErrorKind::kShape,
        "cannot reshape " + ShapeToString(shape_) + " to " +
            ShapeToString(shape));
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::Rows(std::size_t begin, std::size_t count) const {
  Check(rank() >= 1 && begin + count <= shape_[0] && count > 0,
        ErrorKind::kShape, "row slice out of range for " + ShapeToString(shape_));
  const std::size_t row = size() / shape_[0];
  Shape out_shape = shape_;
  out_shape[0] = count;
  return Tensor(std::move(out_shape),
                std::vector<float>(data_.begin() + begin * row,
                                   data_.begin() + (begin + count) * row));
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor Stack(std::span<const Tensor> items) {
  Check(!items.empty(), ErrorKind::kShape, "cannot stack zero tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<float> data;
  data.reserve(NumElements(shape));
  for (const Tensor& t : items) {
    Check(t.shape() == inner, ErrorKind::kShape,
          "stack: shape " + ShapeToString(t.shape()) + " differs from " +
              ShapeToString(inner));
    data.insert(data.end(), t.vector().begin(), t.vector().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace fpa
