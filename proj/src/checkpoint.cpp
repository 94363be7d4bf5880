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

#include "fpa/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fpa/error.hpp"
#include "json_io.hpp"

namespace fpa {

using json_io::Json;

namespace {

constexpr char kFormat[] = "fpa-checkpoint";

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(static_cast<bool>(in), ErrorKind::kData,
        "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::string FileDigest(const std::filesystem::path& path) {
  return HexDigest(Fnv1a(ReadText(path)));
}

void SaveCheckpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  Json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["arm"] = std::string(ArmName(ck.arm));
  j["config_hash"] = ck.config_hash;
  j["seeds"] = {{"dataset", ck.dataset_seed},
                {"init", ck.init_seed},
                {"train", ck.train.seed}};
  j["input_shape"] = ck.model.input_shape;
  j["num_classes"] = ck.model.num_classes();
  j["layers"] = json_io::LayersToJson(ck.model.layers);
  j["normalization"] = json_io::NormalizationToJson(ck.normalization);
  j["train"] = json_io::TrainToJson(ck.train);
  Json params = Json::array();
  for (const Parameter& p : ck.model.params.tensors) {
    Json entry = json_io::TensorToJson(p.value);
    entry["name"] = p.name;
    params.push_back(std::move(entry));
  }
  j["params"] = std::move(params);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Check(static_cast<bool>(out), ErrorKind::kData,
        "cannot write " + path.string());
  out << j.dump(1) << '\n';
  Check(static_cast<bool>(out), ErrorKind::kData,
        "write failed for " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  const std::string text = ReadText(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    Fail(ErrorKind::kData, path.string() + ": not a checkpoint: " + e.what());
  }
  const ErrorKind k = ErrorKind::kData;
  const std::string where = path.string();
  json_io::ObjectReader r(j, "", k);
  if (r.String("format") != kFormat) {
    Fail(k, where + ": not an fpa checkpoint");
  }
  const auto version = r.Unsigned("version");
  if (version != kCheckpointVersion) {
    Fail(k, where + ": unsupported checkpoint version " +
                std::to_string(version));
  }

  Checkpoint ck;
  try {
    ck.arm = ParseArm(r.String("arm"));
  } catch (const Error&) {
    r.Fail("arm", "unknown augmentation arm");
  }
  ck.config_hash = r.String("config_hash");
  {
    json_io::ObjectReader s(r.Raw("seeds"), "seeds", k);
    ck.dataset_seed = s.Unsigned("dataset");
    ck.init_seed = s.Unsigned("init");
    s.Unsigned("train");
    s.Finish();
  }
  Shape input_shape;
  for (const Json& d : r.Raw("input_shape")) {
    if (!d.is_number_unsigned()) r.Fail("input_shape", "expected dimensions");
    input_shape.push_back(d.get<std::size_t>());
  }
  const std::size_t num_classes = r.Unsigned("num_classes");
  std::vector<LayerSpec> layers =
      json_io::LayersFromJson(r.Raw("layers"), "layers", k);
  ck.normalization =
      json_io::NormalizationFromJson(r.Raw("normalization"), "normalization", k);
  ck.train = json_io::TrainFromJson(r.Raw("train"), "train", k);

  // Rebuild the architecture to get names and shapes, then overwrite values.
  try {
    ck.model = BuildModel(input_shape, std::move(layers), 0);
  } catch (const Error& e) {
    Fail(k, where + ": " + e.what());
  }
  if (ck.model.num_classes() != num_classes) {
    r.Fail("num_classes", "does not match the final layer");
  }
  const Json& params = r.Raw("params");
  if (!params.is_array() || params.size() != ck.model.params.tensors.size()) {
    r.Fail("params", "expected " +
                         std::to_string(ck.model.params.tensors.size()) +
                         " tensors");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = ck.model.params.tensors[i];
    const std::string ppath = "params[" + std::to_string(i) + "]";
    Json body = params[i];
    if (!body.is_object() || !body.contains("name") ||
        body["name"] != p.name) {
      Fail(k, where + ": " + ppath + ": expected parameter " + p.name);
    }
    body.erase("name");
    Tensor value = json_io::TensorFromJson(body, ppath, k);
    if (value.shape() != p.value.shape()) {
      Fail(k, where + ": " + ppath + ": shape " + ShapeToString(value.shape()) +
                  " does not match " + ShapeToString(p.value.shape()));
    }
    p.value = std::move(value);
  }
  r.Finish();
  return ck;
}

}  // namespace fpa
