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
#include <random>

#include "fpa/error.hpp"
#include "fpa/model.hpp"
#include "fpa/saliency.hpp"
#include "oracle/reference.hpp"

namespace fpa {
namespace {

Tensor RandomImage(const Shape& shape, unsigned seed, float lo = -1.0f,
                   float hi = 1.0f) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(gen);
  return t;
}

// S(x) = sum_i x_i w_ic + b_c.
Model LinearModel(const Shape& shape, std::size_t classes, unsigned seed) {
  Model m = BuildModel(shape, {LayerSpec::Flatten(), LayerSpec::Dense(classes)},
                       seed);
  Tensor& b = m.params.tensors[1].value;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.1f * (i + 1);
  return m;
}

TEST(Linear, VanillaGradientIsWeightColumn) {
  const Shape shape{4, 3, 2};
  const Model m = LinearModel(shape, 5, 1);
  const Tensor x = RandomImage(shape, 2);
  const Tensor& w = m.params.tensors[0].value;  // 24 x 5
  for (int c = 0; c < 5; ++c) {
    const SaliencyMap3D e = VanillaGradient(m, x, c);
    ASSERT_EQ(e.scores.shape(), shape);
    for (std::size_t i = 0; i < 24; ++i) {
      EXPECT_NEAR(e.scores[i], w[i * 5 + c], 1e-6);
    }
  }
}

TEST(Linear, IntegratedGradientsIsInputTimesWeight) {
  const Shape shape{4, 3, 2};
  const Model m = LinearModel(shape, 5, 3);
  const Tensor x = RandomImage(shape, 4);
  const Tensor& w = m.params.tensors[0].value;
  EstimatorConfig cfg;
  cfg.ig_steps = 7;
  cfg.ig_baseline = Tensor(shape);  // zeros
  const SaliencyMap3D e = IntegratedGradients(m, x, 2, cfg);
  for (std::size_t i = 0; i < 24; ++i) {
    EXPECT_NEAR(e.scores[i], x[i] * w[i * 5 + 2], 1e-6);
  }
  // With a non-zero baseline: (x - x0) * w.
  cfg.ig_baseline = Tensor::Filled(shape, -1.0f);
  const SaliencyMap3D f = IntegratedGradients(m, x, 2, cfg);
  for (std::size_t i = 0; i < 24; ++i) {
    EXPECT_NEAR(f.scores[i], (x[i] + 1.0) * w[i * 5 + 2], 1e-6);
  }
}

TEST(SmoothGrad, ZeroSigmaEqualsVanillaGradientExactly) {
  const Model m = BuildModel({8, 8, 1}, {LayerSpec::Conv(3, 3, 1, 1),
                                         LayerSpec::Relu(), LayerSpec::Pool(),
                                         LayerSpec::Flatten(),
                                         LayerSpec::Dense(4)},
                             5);
  const Tensor x = RandomImage({8, 8, 1}, 6);
  EstimatorConfig cfg;
  cfg.sg_sigma = 0.0;
  cfg.sg_samples = 9;
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(SmoothGrad(m, x, c, cfg, 17).scores,
              VanillaGradient(m, x, c).scores);
  }
}

TEST(SmoothGrad, DrawsShareNoiseAndSquaredIsNonNegative) {
  const Model m = BuildModel({8, 8, 2}, {LayerSpec::Conv(3, 3, 1, 1),
                                         LayerSpec::Relu(), LayerSpec::Flatten(),
                                         LayerSpec::Dense(3)},
                             7);
  const Tensor x = RandomImage({8, 8, 2}, 8);
  EstimatorConfig cfg;
  cfg.sg_samples = 6;
  const std::vector<Tensor> draws = SmoothGradSamples(m, x, 1, cfg, 99);
  ASSERT_EQ(draws.size(), 6u);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const Tensor noise = SmoothGradNoise(x.shape(), cfg.sg_sigma, 99, i);
    Tensor shifted = x;
    for (std::size_t j = 0; j < x.size(); ++j) shifted[j] += noise[j];
    EXPECT_EQ(draws[i], VanillaGradient(m, shifted, 1).scores) << "draw " << i;
  }
  const SaliencyMap3D sg = SmoothGrad(m, x, 1, cfg, 99);
  const SaliencyMap3D sq = SquaredSmoothGrad(m, x, 1, cfg, 99);
  for (std::size_t j = 0; j < x.size(); ++j) {
    double mean = 0.0, mean_sq = 0.0;
    for (const Tensor& d : draws) {
      mean += d[j];
      mean_sq += static_cast<double>(d[j]) * d[j];
    }
    EXPECT_NEAR(sg.scores[j], mean / 6.0, 1e-6);
    EXPECT_NEAR(sq.scores[j], mean_sq / 6.0, 1e-6);
    EXPECT_GE(sq.scores[j], 0.0f);
  }
  const SaliencyMap2D reduced = Reduce(sq, Reduction::kPlainSum);
  EXPECT_EQ(reduced.signedness, Signedness::kUnsigned);
  for (float v : reduced.scores.data()) EXPECT_GE(v, 0.0f);
}

TEST(SmoothGrad, NoiseHasRequestedScale) {
  const Tensor n = SmoothGradNoise({100, 100, 1}, 0.2, 5, 0);
  double s = 0.0, sq = 0.0;
  for (float v : n.data()) {
    s += v;
    sq += static_cast<double>(v) * v;
  }
  EXPECT_NEAR(s / 1e4, 0.0, 0.01);
  EXPECT_NEAR(std::sqrt(sq / 1e4), 0.2, 0.01);
  EXPECT_NE(n, SmoothGradNoise({100, 100, 1}, 0.2, 5, 1));
}

TEST(IntegratedGradients, CompletenessImprovesWithSteps) {
  const Model m = BuildModel({10, 10, 1}, {LayerSpec::Conv(4, 3, 1, 1),
                                           LayerSpec::Relu(), LayerSpec::Pool(),
                                           LayerSpec::Flatten(),
                                           LayerSpec::Dense(3)},
                             9);
  const Tensor x = RandomImage({10, 10, 1}, 10);
  EstimatorConfig cfg;
  cfg.ig_baseline = Tensor::Filled({10, 10, 1}, -1.0f);
  const int c = PredictClass(m, x);
  const double target =
      ForwardLogits(m, x)[c] - ForwardLogits(m, cfg.ig_baseline)[c];
  auto error = [&](std::size_t steps) {
    cfg.ig_steps = steps;
    const SaliencyMap3D e = IntegratedGradients(m, x, c, cfg);
    double sum = 0.0;
    for (float v : e.scores.data()) sum += v;
    return std::abs(sum - target) / std::abs(target);
  };
  EXPECT_LE(error(400), error(50) + 1e-9);
  EXPECT_LT(error(400), 0.005);
}

TEST(Reduce, ModesAndRules) {
  Tensor e({1, 2, 3}, {1, -2, 3, -4, 5, -6});
  Tensor x({1, 2, 3}, {2, 2, -1, 0.5f, 1, 1});
  SaliencyMap3D map{e, Estimator::kVanillaGradient, 0, 0};
  const SaliencyMap2D abs = Reduce(map, Reduction::kAbsSum);
  EXPECT_EQ(abs.scores.shape(), (Shape{1, 2}));
  EXPECT_FLOAT_EQ(abs.scores[0], 6);
  EXPECT_FLOAT_EQ(abs.scores[1], 15);
  EXPECT_EQ(abs.signedness, Signedness::kUnsigned);
  const SaliencyMap2D prod = Reduce(map, Reduction::kInputProductSum, &x);
  EXPECT_FLOAT_EQ(prod.scores[0], 2 - 4 - 3);
  EXPECT_FLOAT_EQ(prod.scores[1], -2 + 5 - 6);
  EXPECT_EQ(prod.signedness, Signedness::kSigned);
  const SaliencyMap2D pabs = Reduce(map, Reduction::kInputProductAbsSum, &x);
  EXPECT_FLOAT_EQ(pabs.scores[0], 2 + 4 + 3);
  EXPECT_FLOAT_EQ(pabs.scores[1], 2 + 5 + 6);
  const SaliencyMap2D plain = Reduce(map, Reduction::kPlainSum);
  EXPECT_FLOAT_EQ(plain.scores[0], 2);
  EXPECT_FLOAT_EQ(plain.scores[1], -5);

  EXPECT_THROW(Reduce(map, Reduction::kInputProductSum), Error);
  map.estimator = Estimator::kIntegratedGradients;
  EXPECT_THROW(Reduce(map, Reduction::kInputProductSum, &x), Error);
  EXPECT_NO_THROW(Reduce(map, Reduction::kAbsSum));
}

TEST(Random, UniformSignedAndSeeded) {
  const SaliencyMap2D a = RandomSaliency(28, 28, 4);
  EXPECT_EQ(a.scores, RandomSaliency(28, 28, 4).scores);
  EXPECT_NE(a.scores, RandomSaliency(28, 28, 5).scores);
  EXPECT_EQ(a.estimator, Estimator::kRandom);
  std::size_t neg = 0;
  for (float v : a.scores.data()) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
    if (v < 0) ++neg;
  }
  EXPECT_GT(neg, 300u);
  EXPECT_LT(neg, 484u);
}

TEST(Catalog, LookupAndCombinedComputation) {
  EXPECT_EQ(FindEstimator("SG'_sum").id, "sgp_sum");
  EXPECT_EQ(FindEstimator("ig_abs").display, "IG_abs");
  try {
    FindEstimator("gradcam");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }

  const Model m = BuildModel({6, 6, 2}, {LayerSpec::Conv(2, 3, 1, 1),
                                         LayerSpec::Relu(), LayerSpec::Flatten(),
                                         LayerSpec::Dense(3)},
                             11);
  const Tensor x = RandomImage({6, 6, 2}, 12);
  EstimatorConfig cfg;
  cfg.ig_steps = 20;
  cfg.sg_samples = 4;
  cfg.ig_baseline = Tensor::Filled({6, 6, 2}, -1.0f);
  const int c = PredictClass(m, x);
  const std::vector<EstimatorSpec>& all = EstimatorCatalog();
  const std::vector<SaliencyMap2D> maps =
      ComputeSaliencyMaps(m, x, c, all, cfg, 21);
  ASSERT_EQ(maps.size(), all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const EstimatorSpec& s = all[i];
    SaliencyMap2D expected;
    switch (s.estimator) {
      case Estimator::kVanillaGradient:
        expected = Reduce(VanillaGradient(m, x, c), s.reduction, &x);
        break;
      case Estimator::kIntegratedGradients:
        expected = Reduce(IntegratedGradients(m, x, c, cfg), s.reduction, &x);
        break;
      case Estimator::kSmoothGrad:
        expected = Reduce(SmoothGrad(m, x, c, cfg, 21), s.reduction, &x);
        break;
      case Estimator::kSquaredSmoothGrad:
        expected = Reduce(SquaredSmoothGrad(m, x, c, cfg, 21), s.reduction, &x);
        break;
      case Estimator::kRandom:
        EXPECT_EQ(maps[i].scores.shape(), (Shape{6, 6}));
        continue;
    }
    EXPECT_EQ(maps[i].scores, expected.scores) << s.id;
  }
}

TEST(Gradients, BatchedRowsMatchSingleInputs) {
  const Model m = BuildModel({28, 28, 1}, DefaultCnnLayers(10), 13);
  Tensor batch({3, 28, 28, 1});
  const Tensor a = RandomImage({28, 28, 1}, 1), b = RandomImage({28, 28, 1}, 2),
               c = RandomImage({28, 28, 1}, 3);
  const Tensor rows[] = {a, b, c};
  batch = Stack(rows);
  const Tensor g = InputGradients(m, batch, 4);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(g.Rows(k, 1).Reshaped({28, 28, 1}),
              VanillaGradient(m, rows[k], 4).scores);
  }
  const Tensor logits = ForwardLogits(m, a);
  EXPECT_EQ(PredictClass(m, a), Argmax(logits.data()));
}

}  // namespace
}  // namespace fpa
