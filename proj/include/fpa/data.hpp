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

#ifndef FPA_DATA_HPP_
#define FPA_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpa/error.hpp"
#include "fpa/random.hpp"
#include "fpa/tensor.hpp"

namespace fpa {

struct LabeledImage {
  Tensor pixels;  // H x W x C
  int label = 0;
};

enum class Split { kTrain, kTest };

enum class NormalizationMode { kRange, kZScore };

std::string_view NormalizationModeName(NormalizationMode mode);
NormalizationMode ParseNormalizationMode(std::string_view name);

// Maps raw pixels to model space. Range mode: x' = 2 x / raw_max - 1.
// Z-score mode: x' = (x - mean[c]) / stddev[c], statistics from the training
// split.
struct Normalization {
  NormalizationMode mode = NormalizationMode::kRange;
  double raw_max = 255.0;
  std::vector<double> mean;
  std::vector<double> stddev;

  Tensor Apply(const Tensor& raw) const;
  Tensor Invert(const Tensor& normalized) const;
  // Normalized value of a raw pixel value in channel `c`.
  double Map(double raw, std::size_t c) const;
};

struct Dataset {
  Split split = Split::kTrain;
  Shape image_shape;  // H x W x C
  std::size_t num_classes = 10;
  std::vector<LabeledImage> samples;
  double raw_max = 255.0;  // range of the raw pixel values
  bool normalized = false;

  std::size_t size() const { return samples.size(); }
};

class IdxError : public Error {
 public:
  enum class Code { kIo, kBadMagic, kTruncated, kCountMismatch };
  IdxError(Code code, const std::string& what)
      : Error(ErrorKind::kData, what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Parses big-endian IDX image (N x H x W, or N x H x W x C) and label files.
Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path,
                Split split = Split::kTrain);

// Writes raw pixels as unsigned bytes, rescaling [0, raw_max] to [0, 255].
void WriteIdx(const Dataset& dataset, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

// Ten-class 28 x 28 x 1 dataset in [0, 1]. Each class is a fixed geometric
// template (bars, crosses, blobs) at a class-specific position, mirror
// symmetric so that horizontal flips preserve the label, plus uniform noise
// of amplitude 0.1. Labels are balanced.
Dataset GenSynthetic(std::size_t num_samples, std::uint64_t seed,
                     Split split = Split::kTrain);

// 28 x 28 membership mask of the template for `label`.
std::vector<std::uint8_t> SyntheticTemplate(int label);

Normalization FitNormalization(const Dataset& train, NormalizationMode mode);
Dataset Normalize(const Dataset& dataset, const Normalization& norm);

// Model-space image of a raw all-zero ("black") input.
Tensor BlackImage(const Shape& image_shape, const Normalization& norm);

Tensor HorizontalFlip(const Tensor& image);
// Reverses the width axis with probability 0.5.
Tensor RandomHorizontalFlip(const Tensor& image, Rng& rng);

// Seeded permutation of [0, n) split into batches; the last partial batch is
// kept.
std::vector<std::vector<std::size_t>> BatchIter(std::size_t n,
                                                std::size_t batch_size,
                                                std::uint64_t epoch_seed);

Tensor GatherImages(const Dataset& dataset, std::span<const std::size_t> ids);
std::vector<int> GatherLabels(const Dataset& dataset,
                              std::span<const std::size_t> ids);

struct DatasetManifest {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  NormalizationMode normalization = NormalizationMode::kRange;
  std::vector<std::string> class_names;
};

// Relative paths resolve against the manifest's directory.
DatasetManifest LoadManifest(const std::filesystem::path& path);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

}  // namespace fpa

#endif  // FPA_DATA_HPP_
