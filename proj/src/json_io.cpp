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

#include "json_io.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace fpa::json_io {

ObjectReader::ObjectReader(const Json& object, std::string path,
                           ErrorKind kind)
    : object_(object), path_(std::move(path)), kind_(kind) {
  if (!object_.is_object()) {
    fpa::Fail(kind_, (path_.empty() ? std::string("<root>") : path_) +
                         ": expected an object");
  }
}

std::string ObjectReader::Path(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

void ObjectReader::Fail(const std::string& key, const std::string& what) const {
  fpa::Fail(kind_, Path(key) + ": " + what);
}

bool ObjectReader::Has(const std::string& key) const {
  return object_.contains(key);
}

const Json& ObjectReader::Raw(const std::string& key) {
  if (!object_.contains(key)) Fail(key, "missing required field");
  seen_.insert(key);
  return object_.at(key);
}

double ObjectReader::Number(const std::string& key) {
  const Json& v = Raw(key);
  if (!v.is_number()) Fail(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) Fail(key, "expected a finite number");
  return d;
}

double ObjectReader::Number(const std::string& key, double fallback) {
  return Has(key) ? Number(key) : fallback;
}

std::uint64_t ObjectReader::Unsigned(const std::string& key) {
  const Json& v = Raw(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) Fail(key, "expected a non-negative integer");
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 9.007199254740992e15) {
      return static_cast<std::uint64_t>(d);
    }
  }
  Fail(key, "expected a non-negative integer");
}

std::uint64_t ObjectReader::Unsigned(const std::string& key,
                                     std::uint64_t fallback) {
  return Has(key) ? Unsigned(key) : fallback;
}

std::string ObjectReader::String(const std::string& key) {
  const Json& v = Raw(key);
  if (!v.is_string()) Fail(key, "expected a string");
  return v.get<std::string>();
}

std::string ObjectReader::String(const std::string& key,
                                 const std::string& fallback) {
  return Has(key) ? String(key) : fallback;
}

bool ObjectReader::Bool(const std::string& key, bool fallback) {
  if (!Has(key)) return fallback;
  const Json& v = Raw(key);
  if (!v.is_boolean()) Fail(key, "expected true or false");
  return v.get<bool>();
}

void ObjectReader::Finish() const {
  for (const auto& item : object_.items()) {
    if (!seen_.count(item.key())) Fail(item.key(), "unknown field");
  }
}

Json LayersToJson(const std::vector<LayerSpec>& layers) {
  Json out = Json::array();
  for (const LayerSpec& l : layers) {
    Json j;
    j["type"] = std::string(LayerKindName(l.kind));
    switch (l.kind) {
      case LayerKind::kConv:
        j["out_channels"] = l.out_channels;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        break;
      case LayerKind::kPool:
        j["window"] = l.window;
        break;
      case LayerKind::kDense:
        j["units"] = l.units;
        break;
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        break;
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<LayerSpec> LayersFromJson(const Json& j, const std::string& path,
                                      ErrorKind kind) {
  if (!j.is_array() || j.empty()) {
    fpa::Fail(kind, path + ": expected a non-empty array of layers");
  }
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < j.size(); ++i) {
    ObjectReader r(j[i], path + "[" + std::to_string(i) + "]", kind);
    const std::string type = r.String("type");
    LayerSpec l;
    try {
      l.kind = ParseLayerKind(type);
    } catch (const Error&) {
      r.Fail("type", "unknown layer type '" + type + "'");
    }
    switch (l.kind) {
      case LayerKind::kConv:
        l = LayerSpec::Conv(r.Unsigned("out_channels"), r.Unsigned("kernel", 3),
                            r.Unsigned("stride", 1), r.Unsigned("padding", 0));
        break;
      case LayerKind::kPool:
        l = LayerSpec::Pool(r.Unsigned("window", 2));
        break;
      case LayerKind::kDense:
        l = LayerSpec::Dense(r.Unsigned("units"));
        break;
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        break;
    }
    r.Finish();
    layers.push_back(l);
  }
  return layers;
}

Json TrainToJson(const TrainConfig& cfg) {
  Json j;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["lr_drop_epochs"] = cfg.lr_drop_epochs;
  j["lr_drop_factor"] = cfg.lr_drop_factor;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["augmentation"] = std::string(ArmName(cfg.augmentation));
  j["fpa"] = {{"p", cfg.fpa.p},
              {"p1_max", cfg.fpa.p1_max},
              {"p2", cfg.fpa.p2},
              {"s_max", cfg.fpa.s_max},
              {"mask_value", cfg.fpa.mask_value}};
  j["rectangle"] = {{"prob", cfg.rectangle.prob},
                    {"area_min", cfg.rectangle.area_min},
                    {"area_max", cfg.rectangle.area_max},
                    {"aspect_min", cfg.rectangle.aspect_min},
                    {"aspect_max", cfg.rectangle.aspect_max},
                    {"mask_value", cfg.rectangle.mask_value}};
  return j;
}

TrainConfig TrainFromJson(const Json& j, const std::string& path,
                          ErrorKind kind, TrainConfig base) {
  ObjectReader r(j, path, kind);
  TrainConfig cfg = std::move(base);
  cfg.epochs = r.Unsigned("epochs", cfg.epochs);
  cfg.lr = r.Number("lr", cfg.lr);
  cfg.momentum = r.Number("momentum", cfg.momentum);
  cfg.weight_decay = r.Number("weight_decay", cfg.weight_decay);
  if (r.Has("lr_drop_epochs")) {
    const Json& drops = r.Raw("lr_drop_epochs");
    if (!drops.is_array()) r.Fail("lr_drop_epochs", "expected an array");
    cfg.lr_drop_epochs.clear();
    for (const Json& d : drops) {
      if (!d.is_number_unsigned()) {
        r.Fail("lr_drop_epochs", "expected non-negative integers");
      }
      cfg.lr_drop_epochs.push_back(d.get<std::size_t>());
    }
  }
  cfg.lr_drop_factor = r.Number("lr_drop_factor", cfg.lr_drop_factor);
  cfg.batch_size = r.Unsigned("batch_size", cfg.batch_size);
  cfg.seed = r.Unsigned("seed", cfg.seed);
  if (r.Has("augmentation")) {
    const std::string arm = r.String("augmentation");
    try {
      cfg.augmentation = ParseArm(arm);
    } catch (const Error&) {
      r.Fail("augmentation", "expected none, fpa or rectangle");
    }
  }
  if (r.Has("fpa")) {
    ObjectReader f(r.Raw("fpa"), r.Path("fpa"), kind);
    cfg.fpa.p = f.Number("p", cfg.fpa.p);
    cfg.fpa.p1_max = f.Number("p1_max", cfg.fpa.p1_max);
    cfg.fpa.p2 = f.Number("p2", cfg.fpa.p2);
    cfg.fpa.s_max = f.Unsigned("s_max", cfg.fpa.s_max);
    cfg.fpa.mask_value =
        static_cast<float>(f.Number("mask_value", cfg.fpa.mask_value));
    f.Finish();
  }
  if (r.Has("rectangle")) {
    ObjectReader e(r.Raw("rectangle"), r.Path("rectangle"), kind);
    cfg.rectangle.prob = e.Number("prob", cfg.rectangle.prob);
    cfg.rectangle.area_min = e.Number("area_min", cfg.rectangle.area_min);
    cfg.rectangle.area_max = e.Number("area_max", cfg.rectangle.area_max);
    cfg.rectangle.aspect_min = e.Number("aspect_min", cfg.rectangle.aspect_min);
    cfg.rectangle.aspect_max = e.Number("aspect_max", cfg.rectangle.aspect_max);
    cfg.rectangle.mask_value = static_cast<float>(
        e.Number("mask_value", cfg.rectangle.mask_value));
    e.Finish();
  }
  r.Finish();
  try {
    cfg.Validate();
  } catch (const Error& err) {
    fpa::Fail(kind, path + ": " + err.what());
  }
  return cfg;
}

Json NormalizationToJson(const Normalization& norm) {
  return {{"mode", std::string(NormalizationModeName(norm.mode))},
          {"raw_max", norm.raw_max},
          {"mean", norm.mean},
          {"std", norm.stddev}};
}

Normalization NormalizationFromJson(const Json& j, const std::string& path,
                                    ErrorKind kind) {
  ObjectReader r(j, path, kind);
  Normalization n;
  const std::string mode = r.String("mode");
  try {
    n.mode = ParseNormalizationMode(mode);
  } catch (const Error&) {
    r.Fail("mode", "expected range or zscore");
  }
  n.raw_max = r.Number("raw_max");
  for (const char* key : {"mean", "std"}) {
    const Json& a = r.Raw(key);
    if (!a.is_array()) r.Fail(key, "expected an array");
    auto& dst = std::string(key) == "mean" ? n.mean : n.stddev;
    for (const Json& v : a) {
      if (!v.is_number()) r.Fail(key, "expected numbers");
      dst.push_back(v.get<double>());
    }
  }
  r.Finish();
  return n;
}

Json TensorToJson(const Tensor& t) {
  Json values = Json::array();
  for (float v : t.data()) values.push_back(v);
  return {{"shape", t.shape()}, {"values", std::move(values)}};
}

Tensor TensorFromJson(const Json& j, const std::string& path, ErrorKind kind) {
  ObjectReader r(j, path, kind);
  const Json& shape_json = r.Raw("shape");
  const Json& values = r.Raw("values");
  if (!shape_json.is_array()) r.Fail("shape", "expected an array");
  if (!values.is_array()) r.Fail("values", "expected an array");
  Shape shape;
  for (const Json& d : shape_json) {
    if (!d.is_number_unsigned()) r.Fail("shape", "expected dimensions");
    shape.push_back(d.get<std::size_t>());
  }
  if (NumElements(shape) != values.size()) {
    r.Fail("values", "expected " + std::to_string(NumElements(shape)) +
                         " values for shape " + ShapeToString(shape) +
                         ", got " + std::to_string(values.size()));
  }
  std::vector<float> data;
  data.reserve(values.size());
  for (const Json& v : values) {
    if (!v.is_number()) r.Fail("values", "expected numbers");
    data.push_back(static_cast<float>(v.get<double>()));
  }
  r.Finish();
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace fpa::json_io
