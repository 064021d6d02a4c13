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

// Slow, obviously-correct references the tests compare against. Nothing here
// shares code with the library beyond its public types.

#include <cstdint>
#include <span>
#include <vector>

#include "scast/micronet.hpp"
#include "scast/rng.hpp"
#include "scast/tensor.hpp"

namespace scast::oracle {

/// DBSCAN from the definitions: core points by exhaustive neighbour count,
/// clusters as connected components of the core graph numbered by their
/// lowest-index core, border points in the lowest-numbered adjacent cluster.
std::vector<std::int32_t> dbscan(std::span<const double> points, int dim, double eps, int min_pts);

/// Canonical relabelling: clusters renumbered by first appearance, noise kept.
std::vector<std::int32_t> canonical(std::span<const std::int32_t> labels);

/// Per-class threshold by sorting that class's argmax scores (argmax ties go
/// to the lower class) and indexing position max(1, floor(n*rho/100)).
std::vector<double> thresholds(std::span<const PredictionMap> maps, double rho);

/// A gradient-check instance: small grid, random params with both heads,
/// random labels including IGNORE.
struct GradInstance {
  ModelParams params;
  PixelGrid grid;
  LabelMask y_bi;
  LabelMask y_sub;
};

/// Draws instances until one is well inside the smooth region: every hidden
/// pre-activation at least `kink_margin` from the ReLU kink and every
/// probability above the clamp by a wide margin. Finite differences across a
/// kink or a clamp measure something other than the derivative.
GradInstance grad_instance(Rng& rng, int h = 4, int w = 4, int in_dim = 3, int hidden = 5, int k = 3,
                           double kink_margin = 0.02);

/// Largest relative error between analytic and central-difference gradients,
/// |a - n| / max(|a|, |n|, floor).
double max_grad_rel_error(const GradInstance& inst, const LossWeights& w, LossKind kind, double h = 1e-4,
                          double floor = 1e-6);

}  // namespace scast::oracle
