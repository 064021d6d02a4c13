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
#include <algorithm>
#include <vector>

#include "kernels_detail.hpp"

namespace scast::kernels {

using detail::Activations;

namespace {

std::ptrdiff_t chunk_count(std::size_t n) { return static_cast<std::ptrdiff_t>((n + kChunk - 1) / kChunk); }

}  // namespace

Objective objective_omp(const ModelParams& m, std::span<const PixelRef> batch,
                        const LossWeights& w, LossKind kind, std::span<double> grad) {
  detail::check_dims(m);
  Objective o;
  for (const auto& px : batch) {
    o.n_bi += px.y_bi != kIgnore;
    o.n_sub += px.y_sub != kIgnore;
  }
  const bool use_bi = w.bi > 0 && o.n_bi > 0;
  const bool use_sub = w.sub > 0 && m.has_sub_head() && o.n_sub > 0;
  if (!use_bi) o.n_bi = 0;
  if (!use_sub) o.n_sub = 0;

  const std::size_t n = batch.size();
  const std::ptrdiff_t chunks = chunk_count(n);
  const std::size_t P = m.size();
  const bool want_grad = !grad.empty();

  detail::DiceSums dice;
  if (use_bi && kind == LossKind::DICE) {
    std::vector<detail::DiceSums> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
      Activations a;
      detail::DiceSums s;
      const std::size_t end = std::min(n, (static_cast<std::size_t>(c) + 1) * kChunk);
      for (std::size_t i = static_cast<std::size_t>(c) * kChunk; i < end; ++i) {
        const auto& px = batch[i];
        if (px.y_bi == kIgnore) continue;
        detail::forward_pixel(m, px.x, false, a);
        s.sp += a.p_bi[1];
        s.sy += px.y_bi;
        s.inter += a.p_bi[1] * px.y_bi;
      }
      partial[c] = s;
    }
    for (const auto& s : partial) dice.add(s);
  }

  const double scale_bi = use_bi ? w.bi / static_cast<double>(o.n_bi) : 0.0;
  const double scale_sub = use_sub ? w.sub / static_cast<double>(o.n_sub) : 0.0;
  std::vector<double> sums(2 * static_cast<std::size_t>(chunks), 0.0);
  std::vector<double> chunk_grad(want_grad ? P * static_cast<std::size_t>(chunks) : 0, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    Activations a;
    double dbi[2], dsub[detail::kMaxClasses];
    double sum_bi = 0, sum_sub = 0;
    double* g = want_grad ? chunk_grad.data() + static_cast<std::size_t>(c) * P : nullptr;
    const std::size_t end = std::min(n, (static_cast<std::size_t>(c) + 1) * kChunk);
    for (std::size_t i = static_cast<std::size_t>(c) * kChunk; i < end; ++i) {
      const auto& px = batch[i];
      const bool bi = use_bi && px.y_bi != kIgnore;
      const bool sub = use_sub && px.y_sub != kIgnore;
      if (!bi && !sub) continue;
      detail::forward_pixel(m, px.x, sub, a);
      if (bi) {
        if (kind == LossKind::BCE) {
          sum_bi += detail::ce_pixel(a.p_bi, 2, px.y_bi, dbi);
          dbi[0] *= scale_bi;
          dbi[1] *= scale_bi;
        } else {
          detail::dice_logit_grad(a.p_bi, dice.dp1(px.y_bi), w.bi, dbi);
        }
      }
      if (sub) {
        sum_sub += detail::ce_pixel(a.p_sub, m.sub_classes(), px.y_sub, dsub);
        for (int k = 0; k < m.sub_classes(); ++k) dsub[k] *= scale_sub;
      }
      if (g) detail::backward_pixel(m, px.x, a, bi ? dbi : nullptr, sub ? dsub : nullptr, g);
    }
    sums[2 * c] = sum_bi;
    sums[2 * c + 1] = sum_sub;
  }

  double sum_bi = 0, sum_sub = 0;
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    sum_bi += sums[2 * c];
    sum_sub += sums[2 * c + 1];
  }
  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
      const double* g = chunk_grad.data() + static_cast<std::size_t>(c) * P;
      for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
    }
  }
  if (use_bi) o.bi = kind == LossKind::BCE ? sum_bi / static_cast<double>(o.n_bi) : dice.loss();
  if (use_sub) o.sub = sum_sub / static_cast<double>(o.n_sub);
  return o;
}

void forward_omp(const ModelParams& m, const float* x, std::size_t n, float* hidden,
                 float* p_bi, float* p_sub) {
  detail::check_dims(m);
  const int din = m.in_dim(), dh = m.hidden_dim(), k = m.sub_classes();
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Activations a;
    detail::forward_pixel(m, x + i * din, p_sub != nullptr, a);
    if (hidden)
      for (int j = 0; j < dh; ++j) hidden[i * dh + j] = static_cast<float>(a.h[j]);
    p_bi[2 * i] = static_cast<float>(a.p_bi[0]);
    p_bi[2 * i + 1] = static_cast<float>(a.p_bi[1]);
    if (p_sub)
      for (int c = 0; c < k; ++c) p_sub[i * k + c] = static_cast<float>(a.p_sub[c]);
  }
}

void neighbor_counts_omp(std::span<const double> points, int dim, double eps,
                         std::span<std::int32_t> counts) {
  const auto n = static_cast<std::ptrdiff_t>(counts.size());
  const double eps2 = eps * eps;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::int32_t c = 0;
    const double* pi = points.data() + i * dim;
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      const double* pj = points.data() + j * dim;
      double d2 = 0;
      for (int k = 0; k < dim; ++k) d2 += (pi[k] - pj[k]) * (pi[k] - pj[k]);
      c += d2 <= eps2;
    }
    counts[i] = c;
  }
}

}  // namespace scast::kernels
