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

// JSON (de)serialization shared by checkpoints and experiment configs.
#ifndef FPA_SRC_JSON_IO_HPP_
#define FPA_SRC_JSON_IO_HPP_

#include <set>
#include <string>
#include <vector>

#include "fpa/data.hpp"
#include "fpa/error.hpp"
#include "fpa/model.hpp"
#include "fpa/train.hpp"
#include "json.hpp"

namespace fpa::json_io {

using Json = nlohmann::ordered_json;

// Reads the members of one JSON object, reporting failures as
// "<path>.<key>: <problem>" with the given error kind.
class ObjectReader {
 public:
  ObjectReader(const Json& object, std::string path, ErrorKind kind);

  bool Has(const std::string& key) const;
  const Json& Raw(const std::string& key);
  std::string Path(const std::string& key) const;

  double Number(const std::string& key, double fallback);
  double Number(const std::string& key);
  std::uint64_t Unsigned(const std::string& key, std::uint64_t fallback);
  std::uint64_t Unsigned(const std::string& key);
  std::string String(const std::string& key, const std::string& fallback);
  std::string String(const std::string& key);
  bool Bool(const std::string& key, bool fallback);

  // Throws if the object has members that were never read.
  void Finish() const;

  [[noreturn]] void Fail(const std::string& key, const std::string& what) const;

 private:
  const Json& object_;
  std::string path_;
  ErrorKind kind_;
  std::set<std::string> seen_;
};

Json LayersToJson(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> LayersFromJson(const Json& j, const std::string& path,
                                      ErrorKind kind);

Json TrainToJson(const TrainConfig& cfg);
// Missing members keep the values of `base`.
TrainConfig TrainFromJson(const Json& j, const std::string& path,
                          ErrorKind kind, TrainConfig base = {});

Json NormalizationToJson(const Normalization& norm);
Normalization NormalizationFromJson(const Json& j, const std::string& path,
                                    ErrorKind kind);

Json TensorToJson(const Tensor& t);
Tensor TensorFromJson(const Json& j, const std::string& path, ErrorKind kind);

}  // namespace fpa::json_io

#endif  // FPA_SRC_JSON_IO_HPP_
