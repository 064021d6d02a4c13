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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scast/tensor.hpp"

namespace scast {

/// Per-class confidence thresholds for class-balanced selection.
struct ThresholdSet {
  std::vector<double> theta;            // theta[k] in [0, 1]
  std::vector<std::size_t> candidates;  // |M^k|: pixels whose argmax is k
  double rho = 0;
};

/// For each class k: sort the probabilities of pixels whose argmax is k in
/// descending order (M^k), take l = max(1, floor(|M^k| * rho / 100)) and set
/// theta^k = M^k[l] (1-based). Classes that are never the argmax get 1.0.
/// Pooled over every map in `maps`.
ThresholdSet compute_thresholds(std::span<const PredictionMap> maps, double rho);
ThresholdSet compute_thresholds(const PredictionMap& map, double rho);

/// argmax label where p(argmax) >= theta^argmax, IGNORE elsewhere.
LabelMask assign_pseudo_labels(const PredictionMap& p, const ThresholdSet& thresholds);

/// Per-pixel cross-entropy between the parent-marginalised subcategory
/// distribution q and the bi-class prediction: -sum_c q(c) log p_bi(c), with
/// p_bi clamped. parent[k] is kParentText (1) or kParentBack (0).
Tensor coreg_distance(const PredictionMap& p_bi, const PredictionMap& p_sub,
                      std::span<const std::int32_t> parent);

struct CoRegConfig {
  double rho_reg = 10;
  bool per_image = false;  // rank candidates within each map instead of across the set
};

struct CoRegResult {
  std::vector<LabelMask> y_bi;
  std::vector<LabelMask> y_sub;
  double theta_reg = 0;  // per-image mode: smallest per-map threshold
  std::size_t candidates = 0;
  std::size_t dropped = 0;
  bool empty = false;  // no candidates: masks returned unchanged
};

/// Drops the top rho_reg% most inconsistent candidates (pixels labelled in
/// either mask). theta_reg is the distance at position
/// max(1, floor(n * rho_reg / 100)) of the descending order (ties broken by
/// map index, then row-major pixel index); every candidate with distance >=
/// theta_reg loses both labels.
CoRegResult coreg_filter(std::span<const LabelMask> y_bi, std::span<const LabelMask> y_sub,
                         std::span<const Tensor> distances, const CoRegConfig& cfg);

}  // namespace scast
