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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fpa/error.hpp"
#include "fpa/model.hpp"
#include "fpa/perturb.hpp"
#include "oracle/masking.hpp"

namespace fpa {
namespace {

SaliencyMap2D MapFrom(Shape shape, std::vector<float> scores) {
  SaliencyMap2D m;
  m.scores = Tensor(std::move(shape), std::move(scores));
  return m;
}

TEST(Ranking, DescendingWithIndexTieBreak) {
  const SaliencyMap2D m = MapFrom({2, 3}, {0.5f, -1.0f, 2.0f, 0.5f, 0.0f, 2.0f});
  const PixelRanking mif = RankPixels(m);
  EXPECT_EQ(mif.order, (std::vector<std::size_t>{2, 5, 0, 3, 4, 1}));
  EXPECT_EQ(mif.direction, Direction::kMif);
  const PixelRanking lif = ReverseRanking(mif);
  EXPECT_EQ(lif.order, (std::vector<std::size_t>{1, 4, 3, 0, 5, 2}));
  EXPECT_EQ(lif.direction, Direction::kLif);
  EXPECT_EQ(DirectionName(Direction::kLif), "LIF");
  EXPECT_EQ(RankedScoreSeries(m, lif),
            (std::vector<float>{-1.0f, 0.0f, 0.5f, 0.5f, 2.0f, 2.0f}));
  EXPECT_THROW(RankPixels(MapFrom({1, 2}, {NAN, 1.0f})), Error);
}

TEST(Grid, DefaultAndCounts) {
  const std::vector<double> g = DefaultFractionGrid();
  ASSERT_EQ(g.size(), 51u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_NEAR(g[15], 0.30, 1e-12);
  const std::vector<std::size_t> counts = MaskedCounts(g, 784);
  EXPECT_EQ(counts[0], 0u);
  EXPECT_EQ(counts[1], 15u);   // floor(15.68)
  EXPECT_EQ(counts[25], 392u);
  EXPECT_EQ(counts[50], 784u);
  const std::vector<double> tenths{0.0, 0.1, 0.3, 0.7, 1.0};
  EXPECT_EQ(MaskedCounts(tenths, 10), (std::vector<std::size_t>{0, 1, 3, 7, 10}));

  EXPECT_THROW(ValidateFractionGrid(std::vector<double>{0.1, 0.5}), Error);
  EXPECT_THROW(ValidateFractionGrid(std::vector<double>{0.0, 0.5, 0.5}), Error);
  EXPECT_THROW(ValidateFractionGrid(std::vector<double>{0.0, 1.5}), Error);
}

void CheckAgainstBruteForce(const Model& model, const Shape& shape,
                            const std::vector<double>& fractions,
                            unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x(shape);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(gen);
    std::vector<float> scores(shape[0] * shape[1]);
    for (float& s : scores) s = std::round(u(gen) * 3.0f);  // forces ties
    const SaliencyMap2D map = MapFrom({shape[0], shape[1]}, scores);
    const int c = static_cast<int>(gen() % model.num_classes());
    for (bool lif : {false, true}) {
      const PixelRanking r =
          lif ? ReverseRanking(RankPixels(map)) : RankPixels(map);
      const SampleCurve curve =
          ComputeSampleCurve(model, x, c, r, fractions, 0.0f);
      if (curve.excluded) continue;
      const std::vector<double> expected =
          oracle::BruteForceCurve(model, x, c, scores, lif, fractions, 0.0f);
      ASSERT_EQ(curve.values.size(), expected.size());
      EXPECT_EQ(curve.values[0], 1.0);
      for (std::size_t k = 0; k < expected.size(); ++k) {
        EXPECT_NEAR(curve.values[k], expected[k], 1e-6)
            << "trial " << trial << " point " << k;
      }
    }
  }
}

TEST(CurveOracle, TwoByTwo) {
  const Model m = BuildModel(
      {2, 2, 2}, {LayerSpec::Flatten(), LayerSpec::Dense(4), LayerSpec::Relu(),
                  LayerSpec::Dense(3)},
      1);
  CheckAgainstBruteForce(m, {2, 2, 2}, {0.0, 0.25, 0.5, 0.75, 1.0}, 2);
  CheckAgainstBruteForce(m, {2, 2, 2}, DefaultFractionGrid(), 3);
}

TEST(CurveOracle, FourByFour) {
  const Model m = BuildModel(
      {4, 4, 1}, {LayerSpec::Conv(3, 3, 1, 1), LayerSpec::Relu(),
                  LayerSpec::Pool(), LayerSpec::Flatten(), LayerSpec::Dense(3)},
      4);
  CheckAgainstBruteForce(m, {4, 4, 1}, DefaultFractionGrid(), 5);
  CheckAgainstBruteForce(m, {4, 4, 1}, {0.0, 0.1, 0.6, 1.0}, 6);
}

TEST(Curves, ExclusionOfVanishingLogit) {
  Model m = BuildModel({2, 2, 1}, {LayerSpec::Flatten(), LayerSpec::Dense(2)}, 1);
  for (Parameter& p : m.params.tensors) {
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = 0.0f;
  }
  const Tensor x = Tensor::Filled({2, 2, 1}, 0.5f);
  const PixelRanking r = RankPixels(MapFrom({2, 2}, {1, 2, 3, 4}));
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const SampleCurve s = ComputeSampleCurve(m, x, 0, r, grid, 0.0f);
  EXPECT_TRUE(s.excluded);

  SampleCurve a{{1.0, 0.5, 0.0}, 2.0, false};
  SampleCurve b{{1.0, 0.7, 0.2}, 3.0, false};
  const std::vector<SampleCurve> all{a, s, b};
  const PerturbationCurve agg = AggregateCurves(grid, all);
  EXPECT_EQ(agg.excluded, 1u);
  ASSERT_EQ(agg.per_sample.size(), 2u);
  EXPECT_DOUBLE_EQ(agg.mean[1], 0.6);
  EXPECT_DOUBLE_EQ(agg.mean[2], 0.1);
  const std::vector<SampleCurve> none{s};
  EXPECT_THROW(AggregateCurves(grid, none), Error);
}

TEST(Trapezoid, PiecewiseLinearClosedForms) {
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    // Random grid and a piecewise-linear function with knots on a subset.
    std::vector<double> grid{0.0};
    while (grid.back() < 1.0) {
      grid.push_back(std::min(1.0, grid.back() + 0.01 + 0.1 * std::abs(u(gen))));
    }
    std::vector<std::size_t> knots{0};
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      if (gen() % 3 == 0) knots.push_back(i);
    }
    knots.push_back(grid.size() - 1);
    std::vector<double> knot_values;
    for (std::size_t i = 0; i < knots.size(); ++i) knot_values.push_back(u(gen));
    std::vector<double> values(grid.size());
    double integral = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
      const double x0 = grid[knots[j]], x1 = grid[knots[j + 1]];
      const double y0 = knot_values[j], y1 = knot_values[j + 1];
      integral += 100.0 * (x1 - x0) * (y0 + y1) / 2.0;
      for (std::size_t i = knots[j]; i <= knots[j + 1]; ++i) {
        values[i] = y0 + (y1 - y0) * (grid[i] - x0) / (x1 - x0);
      }
    }
    EXPECT_NEAR(TrapezoidArea(grid, values), integral, 1e-9);
  }
  const std::vector<double> g = DefaultFractionGrid();
  std::vector<double> ones(g.size(), 1.0), ramp_down(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) ramp_down[i] = 1.0 - g[i];
  EXPECT_NEAR(TrapezoidArea(g, ones), 100.0, 1e-9);
  PerturbationCurve lif, mif;
  lif.fractions = mif.fractions = g;
  lif.mean = ones;
  mif.mean = ramp_down;
  EXPECT_NEAR(FidelityArea(lif, mif), 50.0, 1e-9);
}

// Per-sample curves on a {0, 1} grid whose per-sample area is `a`.
void AddSample(PerturbationCurve& lif, PerturbationCurve& mif, double a) {
  lif.per_sample.push_back({1.0, 1.0 + a / 50.0});
  mif.per_sample.push_back({1.0, 1.0});
}

void FinishMeans(PerturbationCurve& c) {
  c.mean.assign(2, 0.0);
  for (const auto& row : c.per_sample) {
    c.mean[0] += row[0];
    c.mean[1] += row[1];
  }
  for (double& v : c.mean) v /= static_cast<double>(c.per_sample.size());
}

TEST(Bootstrap, DegenerateAndDeterministic) {
  PerturbationCurve lif, mif;
  lif.fractions = mif.fractions = {0.0, 1.0};
  for (int i = 0; i < 10; ++i) AddSample(lif, mif, 7.0);
  FinishMeans(lif);
  FinishMeans(mif);
  const FidelityResult r = BootstrapCi(lif, mif, 200, 1);
  EXPECT_NEAR(r.area, 7.0, 1e-12);
  EXPECT_NEAR(r.ci_low, 7.0, 1e-12);
  EXPECT_NEAR(r.ci_high, 7.0, 1e-12);
  EXPECT_EQ(r.num_samples, 10u);

  PerturbationCurve l2, m2;
  l2.fractions = m2.fractions = {0.0, 1.0};
  for (int i = 0; i < 10; ++i) AddSample(l2, m2, i);
  FinishMeans(l2);
  FinishMeans(m2);
  const FidelityResult a = BootstrapCi(l2, m2, 300, 5);
  const FidelityResult b = BootstrapCi(l2, m2, 300, 5);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_LE(a.ci_low, a.area);
  EXPECT_GE(a.ci_high, a.area);
  EXPECT_NEAR(a.area, 4.5, 1e-12);
}

TEST(Bootstrap, CoverageOfGaussianMean) {
  std::mt19937_64 gen(2024);
  const double mu = 3.0, sigma = 2.0;
  std::normal_distribution<double> normal(mu, sigma);
  const int trials = 200;
  int covered = 0;
  for (int t = 0; t < trials; ++t) {
    PerturbationCurve lif, mif;
    lif.fractions = mif.fractions = {0.0, 1.0};
    for (int i = 0; i < 60; ++i) AddSample(lif, mif, normal(gen));
    FinishMeans(lif);
    FinishMeans(mif);
    const FidelityResult r = BootstrapCi(lif, mif, 1000, 100 + t);
    if (r.ci_low <= mu && mu <= r.ci_high) ++covered;
  }
  const double rate = static_cast<double>(covered) / trials;
  EXPECT_GE(rate, 0.90);
  EXPECT_LE(rate, 0.99);
}

}  // namespace
}  // namespace fpa
