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

#include "fpa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace fpa {
namespace {

constexpr std::size_t kSyntheticSide = 28;
constexpr double kBackground = 0.1;
constexpr double kTemplateLow = 0.9;
constexpr double kTemplateHigh = 1.0;
constexpr double kNoise = 0.1;
constexpr std::size_t kSyntheticClasses = 10;

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IdxError(IdxError::Code::kIo, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t ReadBigEndian(const std::vector<std::uint8_t>& bytes,
                            std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

void AppendBigEndian(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void WriteFile(const std::filesystem::path& path,
               const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IdxError(IdxError::Code::kIo, "cannot write " + path.string());
}

// Fisher-Yates with our own integer draws; std::shuffle's algorithm is
// unspecified and would make permutations library dependent.
template <typename T>
void Shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        UniformInt(rng, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(items[i - 1], items[j]);
  }
}

bool InDisk(double r, double c, double cr, double cc, double radius) {
  return (r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius;
}

bool TemplatePixel(int label, int r, int c) {
  auto in = [](int v, int lo, int hi) { return v >= lo && v <= hi; };
  switch (label) {
    case 0: return in(r, 3, 5) && in(c, 6, 21);
    case 1: return in(r, 22, 24) && in(c, 6, 21);
    case 2: return in(r, 7, 20) && (in(c, 4, 6) || in(c, 21, 23));
    case 3: return in(r, 4, 23) && in(c, 12, 15);
    case 4:
      return (in(r, 12, 15) && in(c, 5, 22)) || (in(c, 12, 15) && in(r, 5, 22));
    case 5: return InDisk(r, c, 8.0, 13.5, 4.5);
    case 6: return InDisk(r, c, 19.0, 13.5, 4.5);
    case 7:
      return InDisk(r, c, 14.0, 6.5, 3.5) || InDisk(r, c, 14.0, 20.5, 3.5);
    case 8:
      return in(r, 6, 21) && in(c, 6, 21) &&
             !(in(r, 8, 19) && in(c, 8, 19));
    case 9:
      return in(r, 4, 23) && (std::abs(r - c) <= 1 || std::abs(r + c - 27) <= 1);
    default: return false;
  }
}

}  // namespace

std::string_view NormalizationModeName(NormalizationMode mode) {
  return mode == NormalizationMode::kRange ? "range" : "zscore";
}

NormalizationMode ParseNormalizationMode(std::string_view name) {
  if (name == "range") return NormalizationMode::kRange;
  if (name == "zscore" || name == "z-score") return NormalizationMode::kZScore;
  Fail(ErrorKind::kConfig,
       "unknown normalization mode '" + std::string(name) + "'");
}

double Normalization::Map(double raw, std::size_t c) const {
  if (mode == NormalizationMode::kRange) return 2.0 * raw / raw_max - 1.0;
  return (raw - mean.at(c)) / stddev.at(c);
}

Tensor Normalization::Apply(const Tensor& raw) const {
  Tensor out = raw;
  const std::size_t channels = raw.shape().back();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(Map(raw[i], i % channels));
  }
  return out;
}

Tensor Normalization::Invert(const Tensor& normalized) const {
  Tensor out = normalized;
  const std::size_t channels = normalized.shape().back();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = normalized[i];
    out[i] = static_cast<float>(
        mode == NormalizationMode::kRange
            ? (v + 1.0) * raw_max / 2.0
            : v * stddev.at(i % channels) + mean.at(i % channels));
  }
  return out;
}

Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path, Split split) {
  const std::vector<std::uint8_t> images = ReadFile(images_path);
  const std::vector<std::uint8_t> labels = ReadFile(labels_path);

  if (images.size() < 16) {
    throw IdxError(IdxError::Code::kTruncated,
                   images_path.string() + ": file shorter than IDX header");
  }
  if (ReadBigEndian(images, 0) != kIdxImagesMagic) {
    throw IdxError(IdxError::Code::kBadMagic,
                   images_path.string() + ": bad IDX image magic number");
  }
  if (labels.size() < 8) {
    throw IdxError(IdxError::Code::kTruncated,
                   labels_path.string() + ": file shorter than IDX header");
  }
  if (ReadBigEndian(labels, 0) != kIdxLabelsMagic) {
    throw IdxError(IdxError::Code::kBadMagic,
                   labels_path.string() + ": bad IDX label magic number");
  }
  const std::size_t count = ReadBigEndian(images, 4);
  const std::size_t rows = ReadBigEndian(images, 8);
  const std::size_t cols = ReadBigEndian(images, 12);
  const std::size_t label_count = ReadBigEndian(labels, 4);
  if (count == 0 || rows == 0 || cols == 0) {
    throw IdxError(IdxError::Code::kTruncated,
                   images_path.string() + ": empty IDX image file");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw IdxError(IdxError::Code::kTruncated,
                   images_path.string() + ": header declares " +
                       std::to_string(count) + " images but the file ends early");
  }
  // Labels are one byte each, so a short label file simply holds fewer labels
  // than there are images.
  const std::size_t labels_present = std::min(label_count, labels.size() - 8);
  if (label_count != count || labels_present != count) {
    throw IdxError(IdxError::Code::kCountMismatch,
                   "count mismatch: " + std::to_string(count) + " images, " +
                       std::to_string(labels_present) + " labels");
  }

  Dataset ds;
  ds.split = split;
  ds.image_shape = {rows, cols, 1};
  ds.raw_max = 255.0;
  int max_label = 0;
  ds.samples.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<float> px(pixels);
    for (std::size_t i = 0; i < pixels; ++i) px[i] = images[16 + n * pixels + i];
    const int label = labels[8 + n];
    max_label = std::max(max_label, label);
    ds.samples.push_back({Tensor(ds.image_shape, std::move(px)), label});
  }
  ds.num_classes = std::max<std::size_t>(10, max_label + 1);
  return ds;
}

void WriteIdx(const Dataset& dataset, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  Check(!dataset.samples.empty(), ErrorKind::kData, "cannot write empty dataset");
  Check(dataset.image_shape.size() == 3 && dataset.image_shape[2] == 1,
        ErrorKind::kData, "IDX export supports single-channel images only");
  Check(!dataset.normalized, ErrorKind::kData,
        "IDX export expects raw (unnormalized) pixels");
  std::vector<std::uint8_t> img;
  std::vector<std::uint8_t> lab;
  AppendBigEndian(img, kIdxImagesMagic);
  AppendBigEndian(img, static_cast<std::uint32_t>(dataset.size()));
  AppendBigEndian(img, static_cast<std::uint32_t>(dataset.image_shape[0]));
  AppendBigEndian(img, static_cast<std::uint32_t>(dataset.image_shape[1]));
  AppendBigEndian(lab, kIdxLabelsMagic);
  AppendBigEndian(lab, static_cast<std::uint32_t>(dataset.size()));
  for (const LabeledImage& s : dataset.samples) {
    for (float v : s.pixels.data()) {
      const double scaled = std::round(v / dataset.raw_max * 255.0);
      img.push_back(static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0)));
    }
    lab.push_back(static_cast<std::uint8_t>(s.label));
  }
  WriteFile(images_path, img);
  WriteFile(labels_path, lab);
}

std::vector<std::uint8_t> SyntheticTemplate(int label) {
  std::vector<std::uint8_t> mask(kSyntheticSide * kSyntheticSide);
  for (std::size_t r = 0; r < kSyntheticSide; ++r) {
    for (std::size_t c = 0; c < kSyntheticSide; ++c) {
      mask[r * kSyntheticSide + c] =
          TemplatePixel(label, static_cast<int>(r), static_cast<int>(c));
    }
  }
  return mask;
}

Dataset GenSynthetic(std::size_t num_samples, std::uint64_t seed, Split split) {
  Check(num_samples >= 1, ErrorKind::kInvalidArgument,
        "synthetic dataset needs at least one sample");
  Rng rng(seed);
  std::vector<int> labels(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    labels[i] = static_cast<int>(i % kSyntheticClasses);
  }
  Shuffle(labels, rng);

  std::vector<std::vector<std::uint8_t>> templates;
  for (std::size_t k = 0; k < kSyntheticClasses; ++k) {
    templates.push_back(SyntheticTemplate(static_cast<int>(k)));
  }

  Dataset ds;
  ds.split = split;
  ds.image_shape = {kSyntheticSide, kSyntheticSide, 1};
  ds.num_classes = kSyntheticClasses;
  ds.raw_max = 1.0;
  ds.samples.reserve(num_samples);
  for (int label : labels) {
    const double intensity = UniformRange(rng, kTemplateLow, kTemplateHigh);
    Tensor img(ds.image_shape);
    const auto& mask = templates[label];
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double base = mask[i] ? intensity : kBackground;
      img[i] = static_cast<float>(
          std::clamp(base + UniformRange(rng, -kNoise, kNoise), 0.0, 1.0));
    }
    ds.samples.push_back({std::move(img), label});
  }
  return ds;
}

Normalization FitNormalization(const Dataset& train, NormalizationMode mode) {
  Check(!train.samples.empty(), ErrorKind::kData,
        "cannot fit normalization on an empty dataset");
  Normalization norm;
  norm.mode = mode;
  norm.raw_max = train.raw_max;
  if (mode == NormalizationMode::kRange) return norm;
  const std::size_t channels = train.image_shape.back();
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  std::size_t count = 0;
  for (const LabeledImage& s : train.samples) {
    for (std::size_t i = 0; i < s.pixels.size(); ++i) {
      sum[i % channels] += s.pixels[i];
    }
    count += s.pixels.size() / channels;
  }
  norm.mean.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) norm.mean[c] = sum[c] / count;
  for (const LabeledImage& s : train.samples) {
    for (std::size_t i = 0; i < s.pixels.size(); ++i) {
      const double d = s.pixels[i] - norm.mean[i % channels];
      sq[i % channels] += d * d;
    }
  }
  norm.stddev.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    norm.stddev[c] = std::sqrt(sq[c] / count);
    Check(norm.stddev[c] > 0.0, ErrorKind::kData,
          "z-score normalization: channel " + std::to_string(c) +
              " has zero standard deviation");
  }
  return norm;
}

Dataset Normalize(const Dataset& dataset, const Normalization& norm) {
  Check(!dataset.normalized, ErrorKind::kData, "dataset is already normalized");
  Dataset out;
  out.split = dataset.split;
  out.image_shape = dataset.image_shape;
  out.num_classes = dataset.num_classes;
  out.raw_max = dataset.raw_max;
  out.normalized = true;
  out.samples.reserve(dataset.size());
  for (const LabeledImage& s : dataset.samples) {
    out.samples.push_back({norm.Apply(s.pixels), s.label});
  }
  return out;
}

Tensor BlackImage(const Shape& image_shape, const Normalization& norm) {
  return norm.Apply(Tensor(image_shape));
}

Tensor HorizontalFlip(const Tensor& image) {
  Check(image.rank() == 3, ErrorKind::kShape,
        "flip expects H x W x C, got " + ShapeToString(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        out[(r * w + x) * c + ch] = image[(r * w + (w - 1 - x)) * c + ch];
      }
    }
  }
  return out;
}

Tensor RandomHorizontalFlip(const Tensor& image, Rng& rng) {
  return Bernoulli(rng, 0.5) ? HorizontalFlip(image) : image;
}

std::vector<std::vector<std::size_t>> BatchIter(std::size_t n,
                                                std::size_t batch_size,
                                                std::uint64_t epoch_seed) {
  Check(batch_size >= 1, ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(epoch_seed);
  Shuffle(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    batches.emplace_back(order.begin() + begin, order.begin() + end);
  }
  return batches;
}

Tensor GatherImages(const Dataset& dataset, std::span<const std::size_t> ids) {
  Check(!ids.empty(), ErrorKind::kInvalidArgument, "empty batch");
  Shape shape{ids.size()};
  shape.insert(shape.end(), dataset.image_shape.begin(),
               dataset.image_shape.end());
  std::vector<float> data;
  data.reserve(NumElements(shape));
  for (std::size_t id : ids) {
    const auto& px = dataset.samples.at(id).pixels.vector();
    data.insert(data.end(), px.begin(), px.end());
  }
  return Tensor(std::move(shape), std::move(data));
}

std::vector<int> GatherLabels(const Dataset& dataset,
                              std::span<const std::size_t> ids) {
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (std::size_t id : ids) labels.push_back(dataset.samples.at(id).label);
  return labels;
}

DatasetManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  Check(static_cast<bool>(in), ErrorKind::kConfig,
        "cannot open dataset manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const char* key) {
    Check(j.contains(key) && j[key].is_string(), ErrorKind::kConfig,
          path.string() + ": manifest field '" + key + "' missing");
    std::filesystem::path p = j[key].get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  DatasetManifest m;
  m.train_images = resolve("train_images");
  m.train_labels = resolve("train_labels");
  m.test_images = resolve("test_images");
  m.test_labels = resolve("test_labels");
  if (j.contains("normalization")) {
    m.normalization =
        ParseNormalizationMode(j["normalization"].get<std::string>());
  }
  if (j.contains("class_names")) {
    m.class_names = j["class_names"].get<std::vector<std::string>>();
  }
  return m;
}

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  nlohmann::json j;
  j["train_images"] = manifest.train_images.string();
  j["train_labels"] = manifest.train_labels.string();
  j["test_images"] = manifest.test_images.string();
  j["test_labels"] = manifest.test_labels.string();
  j["normalization"] = NormalizationModeName(manifest.normalization);
  j["class_names"] = manifest.class_names;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  Check(static_cast<bool>(out), ErrorKind::kData,
        "cannot write manifest " + path.string());
}

}  // namespace fpa
