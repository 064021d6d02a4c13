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
#include "scast/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "scast/errors.hpp"
#include "scast/micronet.hpp"
#include "scast/subcat.hpp"

namespace scast {

namespace {

int argmax(std::span<const float> p) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(p.size()); ++c)
    if (p[c] > p[best]) best = c;
  return best;
}

}  // namespace

ThresholdSet compute_thresholds(std::span<const PredictionMap> maps, double rho) {
  if (!(rho > 0 && rho <= 100)) throw ShapeError("rho must lie in (0, 100]");
  if (maps.empty() || maps[0].pixels() == 0) throw ShapeError("empty prediction map");
  const int C = maps[0].channels;
  std::vector<std::vector<float>> pools(static_cast<std::size_t>(C));
  for (const auto& m : maps) {
    if (m.channels != C) throw ShapeError("prediction maps differ in channel count");
    for (std::size_t i = 0; i < m.pixels(); ++i) {
      const auto p = m.at(i);
      const int k = argmax(p);
      pools[k].push_back(p[k]);
    }
  }
  ThresholdSet t;
  t.rho = rho;
  t.theta.assign(static_cast<std::size_t>(C), 1.0);
  t.candidates.assign(static_cast<std::size_t>(C), 0);
  for (int k = 0; k < C; ++k) {
    auto& pool = pools[k];
    t.candidates[k] = pool.size();
    if (pool.empty()) continue;
    std::sort(pool.begin(), pool.end(), std::greater<>());
    const auto l = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(pool.size()) * rho / 100.0)));
    t.theta[k] = pool[l - 1];
  }
  return t;
}

ThresholdSet compute_thresholds(const PredictionMap& map, double rho) {
  return compute_thresholds(std::span<const PredictionMap>(&map, 1), rho);
}

LabelMask assign_pseudo_labels(const PredictionMap& p, const ThresholdSet& thresholds) {
  if (static_cast<int>(thresholds.theta.size()) != p.channels)
    throw ShapeError("threshold set has " + std::to_string(thresholds.theta.size()) +
                     " classes, prediction map has " + std::to_string(p.channels));
  LabelMask out(p.height, p.width, p.channels, kIgnore);
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto pr = p.at(i);
    const int k = argmax(pr);
    if (static_cast<double>(pr[k]) >= thresholds.theta[k]) out.labels[i] = k;
  }
  return out;
}

Tensor coreg_distance(const PredictionMap& p_bi, const PredictionMap& p_sub,
                      std::span<const std::int32_t> parent) {
  if (p_bi.channels != 2) throw ShapeError("bi-class map must have 2 channels");
  if (p_bi.height != p_sub.height || p_bi.width != p_sub.width) throw ShapeError("maps are not aligned");
  if (static_cast<int>(parent.size()) != p_sub.channels) throw ShapeError("parent map does not cover every subcategory");
  Tensor out({static_cast<std::uint32_t>(p_bi.height), static_cast<std::uint32_t>(p_bi.width)}, DType::F32);
  auto d = out.f32();
  const double log_clamp_lo = kProbClamp, log_clamp_hi = 1.0 - kProbClamp;
  for (std::size_t i = 0; i < p_bi.pixels(); ++i) {
    const auto ps = p_sub.at(i);
    double q_text = 0;
    for (int k = 0; k < p_sub.channels; ++k)
      if (parent[k] == kParentText) q_text += ps[k];
    q_text = std::clamp(q_text, 0.0, 1.0);
    const double q_back = 1.0 - q_text;
    const auto pb = p_bi.at(i);
    const double lb = std::log(std::clamp<double>(pb[kParentBack], log_clamp_lo, log_clamp_hi));
    const double lt = std::log(std::clamp<double>(pb[kParentText], log_clamp_lo, log_clamp_hi));
    d[i] = static_cast<float>(-(q_text * lt + q_back * lb));
  }
  return out;
}

namespace {

CoRegResult coreg_pooled(std::span<const LabelMask> y_bi, std::span<const LabelMask> y_sub,
                         std::span<const Tensor> distances, double rho_reg) {
  CoRegResult r;
  r.y_bi.assign(y_bi.begin(), y_bi.end());
  r.y_sub.assign(y_sub.begin(), y_sub.end());

  struct Candidate {
    float dist;
    std::uint32_t map;
    std::uint32_t pixel;
  };
  std::vector<Candidate> cands;
  for (std::size_t m = 0; m < y_bi.size(); ++m) {
    const auto d = distances[m].f32();
    if (d.size() != y_bi[m].pixels() || d.size() != y_sub[m].pixels())
      throw ShapeError("distance map is not aligned with the masks");
    for (std::size_t i = 0; i < d.size(); ++i)
      if (y_bi[m].labels[i] != kIgnore || y_sub[m].labels[i] != kIgnore)
        cands.push_back({d[i], static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(i)});
  }
  r.candidates = cands.size();
  if (cands.empty()) {
    r.empty = true;
    return r;
  }
  if (rho_reg == 0) {
    r.theta_reg = std::numeric_limits<double>::infinity();
    return r;
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist > b.dist;
    if (a.map != b.map) return a.map < b.map;
    return a.pixel < b.pixel;
  });
  const auto l = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(cands.size()) * rho_reg / 100.0)));
  const float theta = cands[l - 1].dist;
  r.theta_reg = theta;
  for (const auto& c : cands) {
    if (c.dist < theta) break;
    r.y_bi[c.map].labels[c.pixel] = kIgnore;
    r.y_sub[c.map].labels[c.pixel] = kIgnore;
    ++r.dropped;
  }
  return r;
}

}  // namespace

CoRegResult coreg_filter(std::span<const LabelMask> y_bi, std::span<const LabelMask> y_sub,
                         std::span<const Tensor> distances, const CoRegConfig& cfg) {
  if (!(cfg.rho_reg >= 0 && cfg.rho_reg < 100)) throw ShapeError("rho_reg must lie in [0, 100)");
  if (y_bi.size() != y_sub.size() || y_bi.size() != distances.size())
    throw ShapeError("co-regularisation inputs differ in count");
  if (!cfg.per_image) return coreg_pooled(y_bi, y_sub, distances, cfg.rho_reg);

  CoRegResult r;
  r.theta_reg = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t m = 0; m < y_bi.size(); ++m) {
    auto one = coreg_pooled(y_bi.subspan(m, 1), y_sub.subspan(m, 1), distances.subspan(m, 1), cfg.rho_reg);
    r.y_bi.push_back(std::move(one.y_bi[0]));
    r.y_sub.push_back(std::move(one.y_sub[0]));
    r.candidates += one.candidates;
    r.dropped += one.dropped;
    if (!one.empty) {
      any = true;
      r.theta_reg = std::min(r.theta_reg, one.theta_reg);
    }
  }
  r.empty = !any;
  return r;
}

}  // namespace scast
