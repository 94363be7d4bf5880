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

#include "fpa/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "fpa/error.hpp"
#include "fpa/random.hpp"

namespace fpa {
namespace {

constexpr std::size_t kGradientChunk = 50;
constexpr std::uint64_t kRandomStream = 0x52414e44;

Shape BatchShape(std::size_t k, const Shape& image) {
  Shape s{k};
  s.insert(s.end(), image.begin(), image.end());
  return s;
}

void CheckImage(const Model& model, const Tensor& x) {
  Check(x.shape() == model.input_shape, ErrorKind::kShape,
        "saliency: input " + ShapeToString(x.shape()) +
            " does not match model input " + ShapeToString(model.input_shape));
}

void CheckClass(const Model& model, int c) {
  Check(c >= 0 && static_cast<std::size_t>(c) < model.num_classes(),
        ErrorKind::kInvalidArgument,
        "class index " + std::to_string(c) + " out of range");
}

}  // namespace

std::string_view EstimatorName(Estimator e) {
  switch (e) {
    case Estimator::kVanillaGradient: return "vanilla-gradient";
    case Estimator::kIntegratedGradients: return "integrated-gradients";
    case Estimator::kSmoothGrad: return "smoothgrad";
    case Estimator::kSquaredSmoothGrad: return "squared-smoothgrad";
    case Estimator::kRandom: return "random";
  }
  return "unknown";
}

std::string_view ReductionName(Reduction r) {
  switch (r) {
    case Reduction::kAbsSum: return "abs-sum";
    case Reduction::kInputProductSum: return "input-product-sum";
    case Reduction::kInputProductAbsSum: return "input-product-abs-sum";
    case Reduction::kPlainSum: return "plain-sum";
  }
  return "unknown";
}

std::string_view SignednessName(Signedness s) {
  return s == Signedness::kSigned ? "signed" : "unsigned";
}

void EstimatorConfig::Validate() const {
  Check(ig_steps >= 1, ErrorKind::kConfig, "ig_steps must be >= 1");
  Check(sg_samples >= 1, ErrorKind::kConfig, "sg_samples must be >= 1");
  Check(sg_sigma >= 0.0, ErrorKind::kConfig, "sg_sigma must be >= 0");
}

int PredictClass(const Model& model, const Tensor& image) {
  const Tensor logits = ForwardLogits(model, image);
  return Argmax(logits.data());
}

Tensor InputGradients(const Model& model, const Tensor& batch,
                      int class_index) {
  CheckClass(model, class_index);
  Check(batch.rank() == 4, ErrorKind::kShape,
        "input gradients expect a K x H x W x C batch");
  const std::size_t k = batch.dim(0);
  std::vector<float> out;
  out.reserve(batch.size());
  for (std::size_t begin = 0; begin < k; begin += kGradientChunk) {
    const std::size_t count = std::min(kGradientChunk, k - begin);
    ad::Tape tape;
    ad::Var x = tape.Leaf(count == k ? batch : batch.Rows(begin, count));
    ad::Var logits = TraceForward(tape, model, x);
    ad::Var score =
        tape.GatherLogit(logits, std::vector<int>(count, class_index));
    const ad::Gradients g = tape.Backward(score);
    const auto& data = g[x].vector();
    out.insert(out.end(), data.begin(), data.end());
  }
  return Tensor(batch.shape(), std::move(out));
}

SaliencyMap3D VanillaGradient(const Model& model, const Tensor& x, int c) {
  CheckImage(model, x);
  const Tensor g = InputGradients(model, x.Reshaped(BatchShape(1, x.shape())), c);
  return {g.Reshaped(x.shape()), Estimator::kVanillaGradient, c, 0};
}

SaliencyMap3D IntegratedGradients(const Model& model, const Tensor& x, int c,
                                  const EstimatorConfig& cfg) {
  CheckImage(model, x);
  Check(cfg.ig_steps >= 1, ErrorKind::kInvalidArgument,
        "integrated gradients: m must be >= 1");
  const Tensor& x0 = cfg.ig_baseline;
  Check(x0.shape() == x.shape(), ErrorKind::kShape,
        "integrated gradients: baseline shape " + ShapeToString(x0.shape()) +
            " differs from input " + ShapeToString(x.shape()));
  const std::size_t m = cfg.ig_steps;
  const std::size_t n = x.size();
  std::vector<double> sum(n, 0.0);
  for (std::size_t begin = 1; begin <= m; begin += kGradientChunk) {
    const std::size_t count = std::min(kGradientChunk, m - begin + 1);
    Tensor path(BatchShape(count, x.shape()));
    for (std::size_t r = 0; r < count; ++r) {
      const double alpha =
          static_cast<double>(begin + r) / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        path[r * n + i] = static_cast<float>(
            x0[i] + alpha * (static_cast<double>(x[i]) - x0[i]));
      }
    }
    const Tensor g = InputGradients(model, path, c);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t i = 0; i < n; ++i) sum[i] += g[r * n + i];
    }
  }
  Tensor e(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double avg = sum[i] / static_cast<double>(m);
    e[i] = static_cast<float>((static_cast<double>(x[i]) - x0[i]) * avg);
  }
  return {std::move(e), Estimator::kIntegratedGradients, c, 0};
}

Tensor SmoothGradNoise(const Shape& shape, double sigma, std::uint64_t seed,
                       std::size_t draw) {
  Tensor noise(shape);
  if (sigma == 0.0) return noise;
  Rng rng(DeriveSeed(seed, draw));
  for (float& v : noise.data()) {
    v = static_cast<float>(sigma * StandardNormal(rng));
  }
  return noise;
}

std::vector<Tensor> SmoothGradSamples(const Model& model, const Tensor& x,
                                      int c, const EstimatorConfig& cfg,
                                      std::uint64_t seed) {
  CheckImage(model, x);
  Check(cfg.sg_samples >= 1, ErrorKind::kInvalidArgument,
        "smoothgrad: n must be >= 1");
  const std::size_t draws = cfg.sg_samples;
  const std::size_t n = x.size();
  Tensor noisy(BatchShape(draws, x.shape()));
  for (std::size_t d = 0; d < draws; ++d) {
    const Tensor noise = SmoothGradNoise(x.shape(), cfg.sg_sigma, seed, d);
    for (std::size_t i = 0; i < n; ++i) {
      noisy[d * n + i] = static_cast<float>(static_cast<double>(x[i]) + noise[i]);
    }
  }
  const Tensor g = InputGradients(model, noisy, c);
  std::vector<Tensor> out;
  out.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    out.push_back(g.Rows(d, 1).Reshaped(x.shape()));
  }
  return out;
}

SaliencyMap3D MeanOfDraws(std::span<const Tensor> draws, Estimator estimator,
                          int c, bool squared) {
  Check(!draws.empty(), ErrorKind::kInvalidArgument, "no gradient draws");
  const Tensor& first = draws.front();
  std::vector<double> sum(first.size(), 0.0);
  for (const Tensor& d : draws) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = d[i];
      sum[i] += squared ? v * v : v;
    }
  }
  Tensor e(first.shape());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = static_cast<float>(sum[i] / static_cast<double>(draws.size()));
  }
  return {std::move(e), estimator, c, 0};
}

SaliencyMap3D SmoothGrad(const Model& model, const Tensor& x, int c,
                         const EstimatorConfig& cfg, std::uint64_t seed) {
  const auto draws = SmoothGradSamples(model, x, c, cfg, seed);
  return MeanOfDraws(draws, Estimator::kSmoothGrad, c, false);
}

SaliencyMap3D SquaredSmoothGrad(const Model& model, const Tensor& x, int c,
                                const EstimatorConfig& cfg,
                                std::uint64_t seed) {
  const auto draws = SmoothGradSamples(model, x, c, cfg, seed);
  return MeanOfDraws(draws, Estimator::kSquaredSmoothGrad, c, true);
}

SaliencyMap2D Reduce(const SaliencyMap3D& map, Reduction mode, const Tensor* x) {
  const Tensor& e = map.scores;
  Check(e.rank() == 3, ErrorKind::kShape,
        "reduce expects an H x W x C map, got " + ShapeToString(e.shape()));
  const bool product = mode == Reduction::kInputProductSum ||
                       mode == Reduction::kInputProductAbsSum;
  if (product) {
    Check(x != nullptr, ErrorKind::kInvalidArgument,
          std::string(ReductionName(mode)) + " requires the input image");
    Check(x->shape() == e.shape(), ErrorKind::kShape,
          "reduce: input " + ShapeToString(x->shape()) + " differs from map " +
              ShapeToString(e.shape()));
    Check(map.estimator != Estimator::kIntegratedGradients,
          ErrorKind::kInvalidArgument,
          "integrated gradients already include the input factor; use "
          "plain-sum or abs-sum");
  }
  const std::size_t h = e.dim(0), w = e.dim(1), channels = e.dim(2);
  Tensor out({h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::size_t i = p * channels + ch;
      const double v = e[i];
      switch (mode) {
        case Reduction::kAbsSum: acc += std::abs(v); break;
        case Reduction::kInputProductSum: acc += v * (*x)[i]; break;
        case Reduction::kInputProductAbsSum:
          acc += std::abs(v * (*x)[i]);
          break;
        case Reduction::kPlainSum: acc += v; break;
      }
    }
    out[p] = static_cast<float>(acc);
  }
  Signedness sign = Signedness::kSigned;
  if (mode == Reduction::kAbsSum || mode == Reduction::kInputProductAbsSum ||
      map.estimator == Estimator::kSquaredSmoothGrad) {
    sign = Signedness::kUnsigned;
  }
  return {std::move(out), sign, mode, map.estimator};
}

SaliencyMap2D RandomSaliency(std::size_t height, std::size_t width,
                             std::uint64_t seed) {
  Rng rng(seed);
  Tensor scores({height, width});
  for (float& v : scores.data()) {
    v = static_cast<float>(UniformRange(rng, -1.0, 1.0));
  }
  return {std::move(scores), Signedness::kSigned, Reduction::kPlainSum,
          Estimator::kRandom};
}

const std::vector<EstimatorSpec>& EstimatorCatalog() {
  static const std::vector<EstimatorSpec> catalog{
      {"random", "Random", Estimator::kRandom, Reduction::kPlainSum},
      {"ig_sum", "IG_sum", Estimator::kIntegratedGradients, Reduction::kPlainSum},
      {"ig_abs", "IG_abs", Estimator::kIntegratedGradients, Reduction::kAbsSum},
      {"vg_abs", "VG_abs", Estimator::kVanillaGradient, Reduction::kAbsSum},
      {"vgp_sum", "VG'_sum", Estimator::kVanillaGradient,
       Reduction::kInputProductSum},
      {"vgp_abs", "VG'_abs", Estimator::kVanillaGradient,
       Reduction::kInputProductAbsSum},
      {"sg_abs", "SG_abs", Estimator::kSmoothGrad, Reduction::kAbsSum},
      {"sgp_sum", "SG'_sum", Estimator::kSmoothGrad,
       Reduction::kInputProductSum},
      {"sgp_abs", "SG'_abs", Estimator::kSmoothGrad,
       Reduction::kInputProductAbsSum},
      {"sq-sg_sum", "SQ-SG_sum", Estimator::kSquaredSmoothGrad,
       Reduction::kPlainSum},
  };
  return catalog;
}

const EstimatorSpec& FindEstimator(std::string_view id) {
  for (const EstimatorSpec& s : EstimatorCatalog()) {
    if (s.id == id || s.display == id) return s;
  }
  Fail(ErrorKind::kConfig, "unknown estimator id '" + std::string(id) + "'");
}

std::vector<SaliencyMap2D> ComputeSaliencyMaps(
    const Model& model, const Tensor& x, int c,
    std::span<const EstimatorSpec> specs, const EstimatorConfig& cfg,
    std::uint64_t seed) {
  CheckImage(model, x);
  std::optional<SaliencyMap3D> vg, ig;
  std::optional<std::vector<Tensor>> sg_draws;
  auto draws = [&]() -> const std::vector<Tensor>& {
    if (!sg_draws) sg_draws = SmoothGradSamples(model, x, c, cfg, seed);
    return *sg_draws;
  };
  std::vector<SaliencyMap2D> out;
  out.reserve(specs.size());
  for (const EstimatorSpec& spec : specs) {
    switch (spec.estimator) {
      case Estimator::kRandom:
        out.push_back(RandomSaliency(x.dim(0), x.dim(1),
                                     DeriveSeed(seed, kRandomStream)));
        break;
      case Estimator::kVanillaGradient:
        if (!vg) vg = VanillaGradient(model, x, c);
        out.push_back(Reduce(*vg, spec.reduction, &x));
        break;
      case Estimator::kIntegratedGradients:
        if (!ig) ig = IntegratedGradients(model, x, c, cfg);
        out.push_back(Reduce(*ig, spec.reduction, &x));
        break;
      case Estimator::kSmoothGrad:
      case Estimator::kSquaredSmoothGrad: {
        const bool squared = spec.estimator == Estimator::kSquaredSmoothGrad;
        const SaliencyMap3D m = MeanOfDraws(draws(), spec.estimator, c, squared);
        out.push_back(Reduce(m, spec.reduction, &x));
        break;
      }
    }
  }
  return out;
}

}  // namespace fpa
