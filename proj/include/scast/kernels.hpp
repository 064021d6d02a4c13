// Copyright 2026 The scast-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference and an
// OpenMP version. The OpenMP versions reduce over fixed-size pixel chunks in
// chunk order, so their results do not depend on the thread count; they agree
// with the serial references up to floating-point summation order.

#include <cstddef>
#include <cstdint>
#include <span>

#include "scast/config.hpp"
#include "scast/micronet.hpp"

namespace scast::kernels {

struct PixelRef {
  const float* x = nullptr;
  std::int32_t y_bi = kIgnore;
  std::int32_t y_sub = kIgnore;
};

struct Objective {
  double bi = 0;   // unweighted L_bi (mean BCE, or DICE)
  double sub = 0;  // unweighted mean L_sub
  std::size_t n_bi = 0;
  std::size_t n_sub = 0;
  double total(const LossWeights& w) const { return w.bi * bi + w.sub * sub; }
};

inline constexpr std::size_t kChunk = 64;

/// Objective over a pixel batch. When `grad` is non-empty it is overwritten
/// with d(total)/d(params). Terms with zero weight or no labelled pixels are
/// skipped (value 0, no gradient).
Objective objective_serial(const ModelParams& params, std::span<const PixelRef> batch,
                           const LossWeights& w, LossKind kind, std::span<double> grad);
Objective objective_omp(const ModelParams& params, std::span<const PixelRef> batch,
                        const LossWeights& w, LossKind kind, std::span<double> grad);

/// Forward over n contiguous pixels. hidden may be null; p_sub may be null.
void forward_serial(const ModelParams& params, const float* x, std::size_t n, float* hidden,
                    float* p_bi, float* p_sub);
void forward_omp(const ModelParams& params, const float* x, std::size_t n, float* hidden,
                 float* p_bi, float* p_sub);

/// counts[i] = |{j : ||p_i - p_j|| <= eps}| (including i) for row-major points.
void neighbor_counts_serial(std::span<const double> points, int dim, double eps,
                            std::span<std::int32_t> counts);
void neighbor_counts_omp(std::span<const double> points, int dim, double eps,
                         std::span<std::int32_t> counts);

}  // namespace scast::kernels
