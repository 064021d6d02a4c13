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

Objective objective_serial(const ModelParams& m, std::span<const PixelRef> batch,
                           const LossWeights& w, LossKind kind, std::span<double> grad) {
  detail::check_dims(m);
  Objective o;
  for (const auto& px : batch) {
    o.n_bi += px.y_bi != kIgnore;
    o.n_sub += px.y_sub != kIgnore;
  }
  const bool use_bi = w.bi > 0 && o.n_bi > 0;
  const bool use_sub = w.sub > 0 && m.has_sub_head() && o.n_sub > 0;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (!use_bi) o.n_bi = 0;
  if (!use_sub) o.n_sub = 0;

  Activations a;
  detail::DiceSums dice;
  if (use_bi && kind == LossKind::DICE) {
    for (const auto& px : batch) {
      if (px.y_bi == kIgnore) continue;
      detail::forward_pixel(m, px.x, false, a);
      dice.sp += a.p_bi[1];
      dice.sy += px.y_bi;
      dice.inter += a.p_bi[1] * px.y_bi;
    }
  }

  const double scale_bi = use_bi ? w.bi / static_cast<double>(o.n_bi) : 0.0;
  const double scale_sub = use_sub ? w.sub / static_cast<double>(o.n_sub) : 0.0;
  double sum_bi = 0, sum_sub = 0;
  double dbi[2], dsub[detail::kMaxClasses];
  for (const auto& px : batch) {
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
      for (int c = 0; c < m.sub_classes(); ++c) dsub[c] *= scale_sub;
    }
    if (!grad.empty()) detail::backward_pixel(m, px.x, a, bi ? dbi : nullptr, sub ? dsub : nullptr, grad.data());
  }
  if (use_bi) o.bi = kind == LossKind::BCE ? sum_bi / static_cast<double>(o.n_bi) : dice.loss();
  if (use_sub) o.sub = sum_sub / static_cast<double>(o.n_sub);
  return o;
}

void forward_serial(const ModelParams& m, const float* x, std::size_t n, float* hidden,
                    float* p_bi, float* p_sub) {
  detail::check_dims(m);
  const int din = m.in_dim(), dh = m.hidden_dim(), k = m.sub_classes();
  Activations a;
  for (std::size_t i = 0; i < n; ++i) {
    detail::forward_pixel(m, x + i * din, p_sub != nullptr, a);
    if (hidden)
      for (int j = 0; j < dh; ++j) hidden[i * dh + j] = static_cast<float>(a.h[j]);
    p_bi[2 * i] = static_cast<float>(a.p_bi[0]);
    p_bi[2 * i + 1] = static_cast<float>(a.p_bi[1]);
    if (p_sub)
      for (int c = 0; c < k; ++c) p_sub[i * k + c] = static_cast<float>(a.p_sub[c]);
  }
}

void neighbor_counts_serial(std::span<const double> points, int dim, double eps,
                            std::span<std::int32_t> counts) {
  const std::size_t n = counts.size();
  const double eps2 = eps * eps;
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t c = 0;
    const double* pi = points.data() + i * dim;
    for (std::size_t j = 0; j < n; ++j) {
      const double* pj = points.data() + j * dim;
      double d2 = 0;
      for (int k = 0; k < dim; ++k) d2 += (pi[k] - pj[k]) * (pi[k] - pj[k]);
      c += d2 <= eps2;
    }
    counts[i] = c;
  }
}

}  // namespace scast::kernels
