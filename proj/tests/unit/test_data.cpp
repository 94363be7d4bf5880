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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "common/temp_dir.hpp"
#include "fpa/data.hpp"
#include "fpa/error.hpp"
#include "fpa/random.hpp"

namespace fpa {
namespace {

namespace fs = std::filesystem;

using testing_util::TempDir;

void WriteBytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> BigEndian(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

// Two 2 x 3 images and their labels, assembled byte by byte.
void WriteTinyIdx(const fs::path& images, const fs::path& labels,
                  std::uint32_t label_count = 2, bool truncate_images = false) {
  std::vector<std::uint8_t> img;
  for (std::uint32_t v : {0x00000803u, 2u, 2u, 3u}) {
    const auto b = BigEndian(v);
    img.insert(img.end(), b.begin(), b.end());
  }
  for (std::uint8_t p : {0, 10, 20, 30, 40, 50, 255, 254, 253, 1, 2, 3}) {
    img.push_back(p);
  }
  if (truncate_images) img.resize(img.size() - 4);
  WriteBytes(images, img);

  std::vector<std::uint8_t> lab;
  for (std::uint32_t v : {0x00000801u, label_count}) {
    const auto b = BigEndian(v);
    lab.insert(lab.end(), b.begin(), b.end());
  }
  lab.push_back(7);
  lab.push_back(3);
  WriteBytes(labels, lab);
}

IdxError::Code LoadError(const fs::path& images, const fs::path& labels) {
  try {
    LoadIdx(images, labels);
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    return e.code();
  }
  ADD_FAILURE() << "expected an IDX error";
  return IdxError::Code::kIo;
}

TEST(Idx, ParsesHandBuiltFile) {
  TempDir dir;
  WriteTinyIdx(dir.path() / "i", dir.path() / "l");
  const Dataset d = LoadIdx(dir.path() / "i", dir.path() / "l", Split::kTest);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.image_shape, (Shape{2, 3, 1}));
  EXPECT_EQ(d.split, Split::kTest);
  EXPECT_EQ(d.raw_max, 255.0);
  EXPECT_EQ(d.samples[0].label, 7);
  EXPECT_EQ(d.samples[1].label, 3);
  EXPECT_EQ(d.samples[0].pixels.vector(),
            (std::vector<float>{0, 10, 20, 30, 40, 50}));
  EXPECT_EQ(d.samples[1].pixels[0], 255.0f);
}

TEST(Idx, Errors) {
  TempDir dir;
  const fs::path i = dir.path() / "i", l = dir.path() / "l";
  EXPECT_EQ(LoadError(dir.path() / "missing", l), IdxError::Code::kIo);

  WriteTinyIdx(i, l, 2, /*truncate_images=*/true);
  EXPECT_EQ(LoadError(i, l), IdxError::Code::kTruncated);

  WriteTinyIdx(i, l, 3);
  EXPECT_EQ(LoadError(i, l), IdxError::Code::kCountMismatch);

  WriteTinyIdx(i, l);
  WriteBytes(l, {0, 0, 8, 1, 0, 0, 0, 2, 7});  // one label short
  EXPECT_EQ(LoadError(i, l), IdxError::Code::kCountMismatch);

  WriteTinyIdx(i, l);
  WriteBytes(i, {0, 0, 8, 4, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9});
  EXPECT_EQ(LoadError(i, l), IdxError::Code::kBadMagic);

  WriteBytes(i, {0, 0, 8});
  EXPECT_EQ(LoadError(i, l), IdxError::Code::kTruncated);
}

TEST(Idx, WriteRoundTripQuantizes) {
  TempDir dir;
  const Dataset d = GenSynthetic(20, 3);
  WriteIdx(d, dir.path() / "i", dir.path() / "l");
  const Dataset back = LoadIdx(dir.path() / "i", dir.path() / "l");
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t n = 0; n < d.size(); ++n) {
    EXPECT_EQ(back.samples[n].label, d.samples[n].label);
    for (std::size_t i = 0; i < d.samples[n].pixels.size(); ++i) {
      EXPECT_NEAR(back.samples[n].pixels[i] / 255.0, d.samples[n].pixels[i],
                  0.5 / 255.0 + 1e-6);
    }
  }
}

TEST(Synthetic, ShapeRangeBalanceAndDeterminism) {
  const Dataset a = GenSynthetic(200, 9);
  const Dataset b = GenSynthetic(200, 9);
  const Dataset c = GenSynthetic(200, 10);
  EXPECT_EQ(a.image_shape, (Shape{28, 28, 1}));
  EXPECT_EQ(a.num_classes, 10u);
  std::map<int, int> counts;
  for (std::size_t n = 0; n < a.size(); ++n) {
    ++counts[a.samples[n].label];
    EXPECT_EQ(a.samples[n].pixels, b.samples[n].pixels);
    EXPECT_EQ(a.samples[n].label, b.samples[n].label);
    for (float v : a.samples[n].pixels.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  EXPECT_EQ(counts.size(), 10u);
  for (const auto& [label, count] : counts) EXPECT_EQ(count, 20) << label;
  EXPECT_NE(a.samples[0].pixels, c.samples[0].pixels);
}

TEST(Synthetic, TemplateContrastAndSymmetry) {
  std::set<std::vector<std::uint8_t>> distinct;
  for (int k = 0; k < 10; ++k) {
    const std::vector<std::uint8_t> t = SyntheticTemplate(k);
    ASSERT_EQ(t.size(), 28u * 28u);
    distinct.insert(t);
    for (std::size_t r = 0; r < 28; ++r) {
      for (std::size_t c = 0; c < 28; ++c) {
        EXPECT_EQ(t[r * 28 + c], t[r * 28 + 27 - c]) << "class " << k;
      }
    }
  }
  EXPECT_EQ(distinct.size(), 10u);

  const Dataset d = GenSynthetic(1000, 2);
  double on = 0, off = 0;
  std::size_t n_on = 0, n_off = 0;
  for (const LabeledImage& s : d.samples) {
    const std::vector<std::uint8_t> t = SyntheticTemplate(s.label);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i]) {
        on += s.pixels[i];
        ++n_on;
      } else {
        off += s.pixels[i];
        ++n_off;
      }
    }
  }
  EXPECT_GE(on / n_on - off / n_off, 0.5);
}

TEST(Normalization, RangeMode) {
  Dataset d = GenSynthetic(10, 1);
  const Normalization n = FitNormalization(d, NormalizationMode::kRange);
  EXPECT_DOUBLE_EQ(n.Map(0.0, 0), -1.0);
  EXPECT_DOUBLE_EQ(n.Map(1.0, 0), 1.0);
  const Tensor x = n.Apply(d.samples[0].pixels);
  const Tensor back = n.Invert(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(x[i], 2.0 * d.samples[0].pixels[i] - 1.0, 1e-6);
    EXPECT_NEAR(back[i], d.samples[0].pixels[i], 1e-6);
  }
  const Tensor black = BlackImage({28, 28, 1}, n);
  for (float v : black.data()) EXPECT_EQ(v, -1.0f);
  const Dataset nd = Normalize(d, n);
  EXPECT_TRUE(nd.normalized);
}

TEST(Normalization, ZScoreMode) {
  const Dataset d = GenSynthetic(100, 1);
  const Normalization n = FitNormalization(d, NormalizationMode::kZScore);
  ASSERT_EQ(n.mean.size(), 1u);
  const Dataset nd = Normalize(d, n);
  double sum = 0, sq = 0, count = 0;
  for (const LabeledImage& s : nd.samples) {
    for (float v : s.pixels.data()) {
      sum += v;
      sq += static_cast<double>(v) * v;
      ++count;
    }
  }
  EXPECT_NEAR(sum / count, 0.0, 1e-4);
  EXPECT_NEAR(std::sqrt(sq / count), 1.0, 1e-3);
  const Tensor black = BlackImage({28, 28, 1}, n);
  EXPECT_NEAR(black[0], (0.0 - n.mean[0]) / n.stddev[0], 1e-5);
  EXPECT_EQ(ParseNormalizationMode("zscore"), NormalizationMode::kZScore);
  EXPECT_THROW(ParseNormalizationMode("minmax"), Error);
}

TEST(Flip, ReversesWidth) {
  Tensor t({2, 3, 2});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  const Tensor f = HorizontalFlip(t);
  // (row, col, ch) -> (row, 2 - col, ch)
  EXPECT_EQ(f[(0 * 3 + 0) * 2 + 1], t[(0 * 3 + 2) * 2 + 1]);
  EXPECT_EQ(f[(1 * 3 + 1) * 2 + 0], t[(1 * 3 + 1) * 2 + 0]);
  EXPECT_EQ(HorizontalFlip(f), t);

  Rng a(5), b(5);
  int flipped = 0;
  for (int i = 0; i < 200; ++i) {
    const Tensor x = RandomHorizontalFlip(t, a);
    EXPECT_EQ(x, RandomHorizontalFlip(t, b));
    if (x != t) ++flipped;
  }
  EXPECT_GT(flipped, 70);
  EXPECT_LT(flipped, 130);
}

TEST(Batches, PartitionWithPartialLastBatch) {
  const auto batches = BatchIter(103, 10, 42);
  ASSERT_EQ(batches.size(), 11u);
  EXPECT_EQ(batches.back().size(), 3u);
  std::vector<int> seen(103, 0);
  for (const auto& b : batches) {
    for (std::size_t id : b) ++seen[id];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(batches, BatchIter(103, 10, 42));
  EXPECT_NE(batches, BatchIter(103, 10, 43));

  const Dataset d = GenSynthetic(20, 1);
  const std::vector<std::size_t> ids{3, 0, 7};
  const Tensor x = GatherImages(d, ids);
  EXPECT_EQ(x.shape(), (Shape{3, 28, 28, 1}));
  EXPECT_EQ(x.Rows(2, 1).Reshaped({28, 28, 1}), d.samples[7].pixels);
  EXPECT_EQ(GatherLabels(d, ids),
            (std::vector<int>{d.samples[3].label, d.samples[0].label,
                              d.samples[7].label}));
}

TEST(Manifest, RelativePathsResolveAgainstManifest) {
  TempDir dir;
  fs::create_directories(dir.path() / "sub");
  DatasetManifest m;
  m.train_images = "train-images";
  m.train_labels = "train-labels";
  m.test_images = "t10k-images";
  m.test_labels = "t10k-labels";
  m.normalization = NormalizationMode::kZScore;
  m.class_names = {"a", "b"};
  WriteManifest(m, dir.path() / "sub" / "manifest.json");
  const DatasetManifest back = LoadManifest(dir.path() / "sub" / "manifest.json");
  EXPECT_EQ(back.train_images, dir.path() / "sub" / "train-images");
  EXPECT_EQ(back.test_labels, dir.path() / "sub" / "t10k-labels");
  EXPECT_EQ(back.normalization, NormalizationMode::kZScore);
  EXPECT_EQ(back.class_names, m.class_names);
  EXPECT_THROW(LoadManifest(dir.path() / "nope.json"), Error);
}

}  // namespace
}  // namespace fpa
