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

#include <cstdint>
#include <span>
#include <vector>

#include "scast/tensor.hpp"

namespace scast {

struct ClusterParams {
  double eps = 0.01;
  int min_pts = 4;
  int downsample = 4;
  void validate() const;
};

inline constexpr std::int32_t kParentBack = 0;
inline constexpr std::int32_t kParentText = 1;

/// Result of subcategory discovery. Text subcategories occupy [0, k_text),
/// background subcategories [k_text, K). Centroids are unit-norm.
struct SubcategoryModel {
  int k_text = 0;
  int k_back = 0;
  int dim = 0;
  std::vector<double> centroids;  // [K, dim]
  ClusterParams params;

  int k() const noexcept { return k_text + k_back; }
  std::int32_t parent(int sub) const noexcept { return sub < k_text ? kParentText : kParentBack; }
  std::vector<std::int32_t> parents() const;
  std::span<const double> centroid(int sub) const {
    return {centroids.data() + static_cast<std::size_t>(sub) * dim, static_cast<std::size_t>(dim)};
  }
  void validate() const;
};

inline constexpr std::int32_t kNoise = -1;

/// Exact DBSCAN over row-major points. A point is core when at least min_pts
/// points (itself included) lie within eps. Clusters are numbered in order of
/// their lowest-index core point; a border point joins the first cluster whose
/// expansion reaches it. Unreachable points are kNoise.
std::vector<std::int32_t> dbscan(std::span<const double> points, int dim, double eps, int min_pts);
/// Textbook single-threaded formulation kept as the reference for dbscan().
std::vector<std::int32_t> dbscan_serial(std::span<const double> points, int dim, double eps, int min_pts);

/// Block-mean pooling by d followed by per-cell L2 normalisation.
Tensor downsample_features(const Tensor& fmap, int d);
/// Majority bi-class label per d x d block; ties and text majorities give text.
/// IGNORE pixels do not vote; an all-IGNORE block is IGNORE.
LabelMask downsample_labels(const LabelMask& mask, int d);

struct DiscoveryResult {
  SubcategoryModel model;
  std::vector<LabelMask> y_sub;  // full resolution, one per input map
};

/// Pools downsampled cells of every map, clusters text and background cells
/// separately and paints each pixel with its cell's subcategory (IGNORE for
/// noise cells). Throws DiscoveryError when a class produces no cluster.
DiscoveryResult discover_subcategories(std::span<const Tensor> features,
                                       std::span<const LabelMask> masks,
                                       const ClusterParams& params);

/// Nearest centroid to the L2-normalised feature; ties go to the lower index.
int assign_subcategory(const SubcategoryModel& model, std::span<const double> feature);

}  // namespace scast
