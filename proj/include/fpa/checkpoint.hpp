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

#ifndef FPA_CHECKPOINT_HPP_
#define FPA_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "fpa/data.hpp"
#include "fpa/model.hpp"
#include "fpa/train.hpp"

namespace fpa {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  Normalization normalization;
  AugmentationArm arm = AugmentationArm::kNone;
  TrainConfig train;
  std::uint64_t init_seed = 0;
  std::uint64_t dataset_seed = 0;
  std::string config_hash;
};

// JSON container. Parameter values are written with enough digits to
// round-trip float32 exactly.
void SaveCheckpoint(const Checkpoint& checkpoint,
                    const std::filesystem::path& path);
// Throws kData for unreadable or malformed files.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// 64-bit FNV-1a.
std::uint64_t Fnv1a(std::string_view bytes);
std::string HexDigest(std::uint64_t value);
// FNV-1a digest of a file's contents.
std::string FileDigest(const std::filesystem::path& path);

}  // namespace fpa

#endif  // FPA_CHECKPOINT_HPP_
