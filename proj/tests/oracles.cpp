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
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

namespace scast::oracle {

std::vector<std::int32_t> dbscan(std::span<const double> points, int dim, double eps, int min_pts) {
  const std::size_t n = points.size() / dim;
  auto near = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (int k = 0; k < dim; ++k) {
      const double d = points[a * dim + k] - points[b * dim + k];
      s += d * d;
    }
    return std::sqrt(s) <= eps;
  };
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int c = 0;
    for (std::size_t j = 0; j < n; ++j) c += near(i, j);
    core[i] = c >= min_pts;
  }
  // Union-find over core points.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && near(i, j)) parent[find(i)] = find(j);
  // Number components by their lowest-index core.
  std::map<std::size_t, std::int32_t> id;
  std::vector<std::int32_t> label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    auto [it, fresh] = id.emplace(find(i), static_cast<std::int32_t>(id.size()));
    label[i] = it->second;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::int32_t best = -1;
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && near(i, j) && (best < 0 || label[j] < best)) best = label[j];
    label[i] = best;
  }
  return label;
}

std::vector<std::int32_t> canonical(std::span<const std::int32_t> labels) {
  std::map<std::int32_t, std::int32_t> seen;
  std::vector<std::int32_t> out;
  for (auto l : labels) {
    if (l < 0) {
      out.push_back(l);
      continue;
    }
    auto [it, fresh] = seen.emplace(l, static_cast<std::int32_t>(seen.size()));
    out.push_back(it->second);
  }
  return out;
}

std::vector<double> thresholds(std::span<const PredictionMap> maps, double rho) {
  const int c = maps.front().channels;
  std::vector<std::vector<double>> pool(c);
  for (const auto& m : maps)
    for (std::size_t i = 0; i < m.pixels(); ++i) {
      const auto p = m.at(i);
      int best = 0;
      for (int k = 1; k < c; ++k)
        if (p[k] > p[best]) best = k;
      pool[best].push_back(p[best]);
    }
  std::vector<double> theta(c, 1.0);
  for (int k = 0; k < c; ++k) {
    auto& v = pool[k];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end(), std::greater<>());
    const auto l = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(v.size() * rho / 100.0)));
    theta[k] = v[l - 1];
  }
  return theta;
}

GradInstance grad_instance(Rng& rng, int h, int w, int in_dim, int hidden, int k, double kink_margin) {
  for (;;) {
    GradInstance g;
    g.params = ModelParams(in_dim, hidden);
    g.params.allocate_sub_head(k);
    for (auto& v : g.params.values()) v = rng.uniform(-1.0, 1.0);
    g.grid = {h, w, in_dim, std::vector<float>(static_cast<std::size_t>(h) * w * in_dim)};
    for (auto& x : g.grid.features) x = static_cast<float>(rng.normal());
    g.y_bi = LabelMask(h, w, 2);
    g.y_sub = LabelMask(h, w, k);
    for (std::size_t i = 0; i < g.y_bi.pixels(); ++i) {
      g.y_bi.labels[i] = static_cast<std::int32_t>(rng.below(3)) - 1;
      g.y_sub.labels[i] = static_cast<std::int32_t>(rng.below(k + 1)) - 1;
    }
    g.y_bi.labels[0] = 1;  // at least one labelled pixel per head
    g.y_sub.labels[0] = 0;

    bool ok = true;
    const auto v = g.params.values();
    for (std::size_t p = 0; p < g.grid.pixels() && ok; ++p) {
      const float* x = g.grid.pixel(p);
      for (int j = 0; j < hidden && ok; ++j) {
        double z = v[g.params.off_b1() + j];
        for (int i = 0; i < in_dim; ++i) z += x[i] * v[g.params.off_w1() + static_cast<std::size_t>(i) * hidden + j];
        ok = std::abs(z) >= kink_margin;
      }
    }
    if (!ok) continue;
    const auto f = forward(g.params, g.grid, true);
    for (float p : f.p_bi.probs) ok = ok && p > 1e-4;
    for (float p : f.p_sub->probs) ok = ok && p > 1e-4;
    if (ok) return g;
  }
}

double max_grad_rel_error(const GradInstance& inst, const LossWeights& w, LossKind kind, double h, double floor) {
  const GridLabels labels{&inst.y_bi, &inst.y_sub};
  const auto analytic = backward(inst.params, inst.grid, labels, w, kind);
  ModelParams p = inst.params;
  double worst = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p.values()[i];
    p.values()[i] = orig + h;
    const double up = objective(p, inst.grid, labels, w, kind).total;
    p.values()[i] = orig - h;
    const double down = objective(p, inst.grid, labels, w, kind).total;
    p.values()[i] = orig;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace scast::oracle
