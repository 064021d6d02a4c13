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
#include "scast/subcat.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "scast/errors.hpp"
#include "scast/kernels.hpp"

namespace scast {

void ClusterParams::validate() const {
  if (!(eps > 0)) throw DiscoveryError("eps must be > 0");
  if (min_pts < 1) throw DiscoveryError("min_pts must be >= 1");
  if (downsample < 1) throw DiscoveryError("downsample must be >= 1");
}

std::vector<std::int32_t> SubcategoryModel::parents() const {
  std::vector<std::int32_t> p(static_cast<std::size_t>(k()));
  for (int i = 0; i < k(); ++i) p[i] = parent(i);
  return p;
}

void SubcategoryModel::validate() const {
  if (k() < 2 || k_text < 0 || k_back < 0) throw DiscoveryError("subcategory model needs K >= 2");
  if (centroids.size() != static_cast<std::size_t>(k()) * dim) throw DiscoveryError("centroid array has wrong size");
  for (int s = 0; s < k(); ++s) {
    double n2 = 0;
    for (double v : centroid(s)) {
      if (!std::isfinite(v)) throw DiscoveryError("centroid is not finite");
      n2 += v * v;
    }
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) throw DiscoveryError("centroid is not unit-norm");
  }
}

namespace {

double dist2(const double* a, const double* b, int dim) {
  double s = 0;
  for (int k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

std::vector<std::int32_t> dbscan(std::span<const double> points, int dim, double eps, int min_pts) {
  const std::size_t n = dim > 0 ? points.size() / dim : 0;
  std::vector<std::int32_t> counts(n);
  kernels::neighbor_counts_omp(points, dim, eps, counts);

  const double eps2 = eps * eps;
  std::vector<std::int32_t> label(n, kNoise);
  std::vector<char> assigned(n, 0);
  std::deque<std::size_t> queue;
  std::int32_t cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i] || counts[i] < min_pts) continue;
    label[i] = cluster;
    assigned[i] = 1;
    queue.push_back(i);
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      const double* pq = points.data() + q * dim;
      for (std::size_t r = 0; r < n; ++r) {
        if (assigned[r] || dist2(pq, points.data() + r * dim, dim) > eps2) continue;
        label[r] = cluster;
        assigned[r] = 1;
        if (counts[r] >= min_pts) queue.push_back(r);
      }
    }
    ++cluster;
  }
  return label;
}

std::vector<std::int32_t> dbscan_serial(std::span<const double> points, int dim, double eps, int min_pts) {
  const std::size_t n = dim > 0 ? points.size() / dim : 0;
  const double eps2 = eps * eps;
  auto region = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (dist2(points.data() + p * dim, points.data() + j * dim, dim) <= eps2) out.push_back(j);
    return out;
  };
  constexpr std::int32_t kUndefined = -2;
  std::vector<std::int32_t> label(n, kUndefined);
  std::int32_t cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUndefined) continue;
    const auto neighbors = region(p);
    if (static_cast<int>(neighbors.size()) < min_pts) {
      label[p] = kNoise;
      continue;
    }
    label[p] = cluster;
    std::deque<std::size_t> seeds(neighbors.begin(), neighbors.end());
    while (!seeds.empty()) {
      const auto q = seeds.front();
      seeds.pop_front();
      if (label[q] == kNoise) label[q] = cluster;
      if (label[q] != kUndefined) continue;
      label[q] = cluster;
      const auto nq = region(q);
      if (static_cast<int>(nq.size()) >= min_pts) seeds.insert(seeds.end(), nq.begin(), nq.end());
    }
    ++cluster;
  }
  return label;
}

Tensor downsample_features(const Tensor& fmap, int d) {
  if (fmap.ndim() != 3 || fmap.dtype() != DType::F32) throw ShapeError("feature map must be F32 [H, W, D]");
  if (d < 1) throw ShapeError("downsample ratio must be >= 1");
  const int H = static_cast<int>(fmap.dims()[0]), W = static_cast<int>(fmap.dims()[1]);
  const int D = static_cast<int>(fmap.dims()[2]);
  if (H % d != 0 || W % d != 0)
    throw ShapeError("downsample ratio " + std::to_string(d) + " does not divide " + std::to_string(H) +
                     "x" + std::to_string(W));
  const int h = H / d, w = W / d;
  Tensor out({static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(D)},
             DType::F32);
  auto src = fmap.f32();
  auto dst = out.f32();
  std::vector<double> acc(static_cast<std::size_t>(D));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int dr = 0; dr < d; ++dr)
        for (int dc = 0; dc < d; ++dc) {
          const float* f = src.data() + (static_cast<std::size_t>(r * d + dr) * W + (c * d + dc)) * D;
          for (int k = 0; k < D; ++k) acc[k] += f[k];
        }
      double norm2 = 0;
      for (int k = 0; k < D; ++k) {
        acc[k] /= static_cast<double>(d) * d;
        norm2 += acc[k] * acc[k];
      }
      const double inv = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
      float* o = dst.data() + (static_cast<std::size_t>(r) * w + c) * D;
      for (int k = 0; k < D; ++k) o[k] = static_cast<float>(acc[k] * inv);
    }
  return out;
}

LabelMask downsample_labels(const LabelMask& mask, int d) {
  if (d < 1 || mask.height % d != 0 || mask.width % d != 0)
    throw ShapeError("downsample ratio does not divide the mask");
  const int h = mask.height / d, w = mask.width / d;
  LabelMask out(h, w, 2, kIgnore);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      int text = 0, back = 0;
      for (int dr = 0; dr < d; ++dr)
        for (int dc = 0; dc < d; ++dc) {
          const auto l = mask.labels[static_cast<std::size_t>(r * d + dr) * mask.width + (c * d + dc)];
          if (l == 1) ++text;
          else if (l == 0) ++back;
        }
      if (text + back > 0) out.labels[static_cast<std::size_t>(r) * w + c] = text >= back ? 1 : 0;
    }
  return out;
}

DiscoveryResult discover_subcategories(std::span<const Tensor> features,
                                       std::span<const LabelMask> masks,
                                       const ClusterParams& params) {
  params.validate();
  if (features.size() != masks.size()) throw ShapeError("features and masks differ in count");
  if (features.empty()) throw DiscoveryError("no feature maps supplied");
  const int d = params.downsample;
  const int dim = static_cast<int>(features[0].dims().at(2));

  // Pool cells per class, remembering where each came from.
  struct CellRef {
    std::size_t map;
    std::size_t cell;
  };
  std::vector<double> pts[2];
  std::vector<CellRef> refs[2];
  std::vector<LabelMask> cell_labels;
  std::vector<Tensor> cells;
  for (std::size_t m = 0; m < features.size(); ++m) {
    if (static_cast<int>(features[m].dims().at(2)) != dim) throw ShapeError("feature maps differ in depth");
    if (static_cast<int>(features[m].dims()[0]) != masks[m].height ||
        static_cast<int>(features[m].dims()[1]) != masks[m].width)
      throw ShapeError("feature map and mask are not aligned");
    cells.push_back(downsample_features(features[m], d));
    cell_labels.push_back(downsample_labels(masks[m], d));
    auto cf = cells.back().f32();
    const auto& cl = cell_labels.back();
    for (std::size_t c = 0; c < cl.pixels(); ++c) {
      const auto l = cl.labels[c];
      if (l == kIgnore) continue;
      for (int k = 0; k < dim; ++k) pts[l].push_back(cf[c * dim + k]);
      refs[l].push_back({m, c});
    }
  }

  // Cluster each class; text first so text subcategories get the low indices.
  std::vector<std::int32_t> assign[2];
  int counts[2] = {0, 0};
  for (int cls : {kParentText, kParentBack}) {
    const char* name = cls == kParentText ? "text" : "background";
    if (refs[cls].empty())
      throw DiscoveryError(std::string("no ") + name + " cells to cluster");
    assign[cls] = dbscan(pts[cls], dim, params.eps, params.min_pts);
    for (auto a : assign[cls]) counts[cls] = std::max(counts[cls], a + 1);
    if (counts[cls] == 0)
      throw DiscoveryError(std::string("DBSCAN found no ") + name +
                           " clusters; increase eps or decrease min_pts");
  }

  DiscoveryResult res;
  auto& model = res.model;
  model.k_text = counts[kParentText];
  model.k_back = counts[kParentBack];
  model.dim = dim;
  model.params = params;
  model.centroids.assign(static_cast<std::size_t>(model.k()) * dim, 0.0);
  std::vector<std::size_t> members(static_cast<std::size_t>(model.k()), 0);
  auto global = [&](int cls, std::int32_t local) { return cls == kParentText ? local : model.k_text + local; };
  for (int cls : {kParentText, kParentBack})
    for (std::size_t i = 0; i < assign[cls].size(); ++i) {
      if (assign[cls][i] == kNoise) continue;
      const int s = global(cls, assign[cls][i]);
      ++members[s];
      for (int k = 0; k < dim; ++k) model.centroids[static_cast<std::size_t>(s) * dim + k] += pts[cls][i * dim + k];
    }
  for (int s = 0; s < model.k(); ++s) {
    double n2 = 0;
    for (int k = 0; k < dim; ++k) {
      auto& v = model.centroids[static_cast<std::size_t>(s) * dim + k];
      v /= static_cast<double>(members[s]);
      n2 += v * v;
    }
    const double inv = n2 > 0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (int k = 0; k < dim; ++k) model.centroids[static_cast<std::size_t>(s) * dim + k] *= inv;
  }

  // Paint full-resolution masks from cell assignments.
  std::vector<LabelMask> cell_sub;
  for (const auto& cl : cell_labels) cell_sub.emplace_back(cl.height, cl.width, model.k(), kIgnore);
  for (int cls : {kParentText, kParentBack})
    for (std::size_t i = 0; i < assign[cls].size(); ++i)
      if (assign[cls][i] != kNoise)
        cell_sub[refs[cls][i].map].labels[refs[cls][i].cell] = global(cls, assign[cls][i]);
  for (std::size_t m = 0; m < masks.size(); ++m) {
    LabelMask full(masks[m].height, masks[m].width, model.k(), kIgnore);
    const int w = cell_sub[m].width;
    for (int r = 0; r < full.height; ++r)
      for (int c = 0; c < full.width; ++c)
        full.labels[static_cast<std::size_t>(r) * full.width + c] =
            cell_sub[m].labels[static_cast<std::size_t>(r / d) * w + c / d];
    res.y_sub.push_back(std::move(full));
  }
  return res;
}

int assign_subcategory(const SubcategoryModel& model, std::span<const double> feature) {
  if (feature.size() != static_cast<std::size_t>(model.dim)) throw ShapeError("feature has wrong dimension");
  double n2 = 0;
  for (double v : feature) n2 += v * v;
  const double inv = n2 > 0 ? 1.0 / std::sqrt(n2) : 0.0;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int s = 0; s < model.k(); ++s) {
    const auto c = model.centroid(s);
    double d2 = 0;
    for (int k = 0; k < model.dim; ++k) d2 += (feature[k] * inv - c[k]) * (feature[k] * inv - c[k]);
    if (d2 < best_d) {
      best_d = d2;
      best = s;
    }
  }
  return best;
}

}  // namespace scast
