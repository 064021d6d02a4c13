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

// Per-pixel math shared by the serial and OpenMP kernels.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

#include "scast/kernels.hpp"

namespace scast::kernels::detail {

inline constexpr int kMaxHidden = 256;
inline constexpr int kMaxClasses = 256;

struct Activations {
  double z[kMaxHidden];
  double h[kMaxHidden];
  double p_bi[2];
  double p_sub[kMaxClasses];
};

inline void softmax(const double* logits, int n, double* out) {
  double top = logits[0];
  for (int i = 1; i < n; ++i) top = std::max(top, logits[i]);
  double z = 0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - top);
    z += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= z;
}

inline void forward_pixel(const ModelParams& m, const float* x, bool with_sub, Activations& a) {
  const int din = m.in_dim(), dh = m.hidden_dim(), k = m.sub_classes();
  const auto v = m.values();
  const double* w1 = v.data() + m.off_w1();
  const double* b1 = v.data() + m.off_b1();
  for (int j = 0; j < dh; ++j) a.z[j] = b1[j];
  for (int i = 0; i < din; ++i) {
    const double xi = x[i];
    const double* row = w1 + static_cast<std::size_t>(i) * dh;
    for (int j = 0; j < dh; ++j) a.z[j] += xi * row[j];
  }
  for (int j = 0; j < dh; ++j) a.h[j] = a.z[j] > 0 ? a.z[j] : 0.0;

  const double* wbi = v.data() + m.off_wbi();
  const double* bbi = v.data() + m.off_bbi();
  double lbi[2] = {bbi[0], bbi[1]};
  for (int j = 0; j < dh; ++j) {
    lbi[0] += a.h[j] * wbi[2 * j];
    lbi[1] += a.h[j] * wbi[2 * j + 1];
  }
  softmax(lbi, 2, a.p_bi);

  if (with_sub && k > 0) {
    const double* ws = v.data() + m.off_wsub();
    const double* bs = v.data() + m.off_bsub();
    double ls[kMaxClasses];
    for (int c = 0; c < k; ++c) ls[c] = bs[c];
    for (int j = 0; j < dh; ++j) {
      const double hj = a.h[j];
      if (hj == 0.0) continue;
      const double* row = ws + static_cast<std::size_t>(j) * k;
      for (int c = 0; c < k; ++c) ls[c] += hj * row[c];
    }
    softmax(ls, k, a.p_sub);
  }
}

/// Cross-entropy of one pixel with the probability clamped before the log,
/// and its logit gradient p - onehot. The gradient is the log-softmax one even
/// where the clamp is active: a zero gradient there would freeze any pixel
/// that starts out confidently wrong.
inline double ce_pixel(const double* p, int n, int y, double* dlogit) {
  for (int c = 0; c < n; ++c) dlogit[c] = p[c];
  dlogit[y] -= 1.0;
  return -std::log(std::clamp(p[y], kProbClamp, 1.0 - kProbClamp));
}

/// Accumulates the parameter gradient of one pixel given logit gradients.
/// dsub may be null.
inline void backward_pixel(const ModelParams& m, const float* x, const Activations& a,
                           const double* dbi, const double* dsub, double* grad) {
  const int din = m.in_dim(), dh = m.hidden_dim(), k = m.sub_classes();
  const auto v = m.values();
  const double* wbi = v.data() + m.off_wbi();
  const double* ws = v.data() + m.off_wsub();
  double* g_w1 = grad + m.off_w1();
  double* g_b1 = grad + m.off_b1();
  double* g_wbi = grad + m.off_wbi();
  double* g_bbi = grad + m.off_bbi();
  double* g_ws = grad + m.off_wsub();
  double* g_bs = grad + m.off_bsub();

  double gz[kMaxHidden];
  for (int j = 0; j < dh; ++j) {
    double gh = 0;
    if (dbi) gh += dbi[0] * wbi[2 * j] + dbi[1] * wbi[2 * j + 1];
    if (dsub) {
      const double* row = ws + static_cast<std::size_t>(j) * k;
      for (int c = 0; c < k; ++c) gh += dsub[c] * row[c];
    }
    gz[j] = a.z[j] > 0 ? gh : 0.0;
  }
  if (dbi) {
    g_bbi[0] += dbi[0];
    g_bbi[1] += dbi[1];
    for (int j = 0; j < dh; ++j) {
      g_wbi[2 * j] += a.h[j] * dbi[0];
      g_wbi[2 * j + 1] += a.h[j] * dbi[1];
    }
  }
  if (dsub) {
    for (int c = 0; c < k; ++c) g_bs[c] += dsub[c];
    for (int j = 0; j < dh; ++j) {
      const double hj = a.h[j];
      if (hj == 0.0) continue;
      double* row = g_ws + static_cast<std::size_t>(j) * k;
      for (int c = 0; c < k; ++c) row[c] += hj * dsub[c];
    }
  }
  for (int j = 0; j < dh; ++j) g_b1[j] += gz[j];
  for (int i = 0; i < din; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* row = g_w1 + static_cast<std::size_t>(i) * dh;
    for (int j = 0; j < dh; ++j) row[j] += xi * gz[j];
  }
}

/// Which terms of the objective are active for a batch.
struct Plan {
  bool bi = false;
  bool sub = false;
};

inline void check_dims(const ModelParams& m) {
  if (m.hidden_dim() > kMaxHidden || m.sub_classes() > kMaxClasses)
    throw std::length_error("model exceeds kernel limits");
}

/// DICE needs the batch sums before any per-pixel gradient can be formed.
struct DiceSums {
  double sp = 0;  // sum of text probabilities
  double sy = 0;  // sum of text labels
  double inter = 0;
  void add(const DiceSums& o) {
    sp += o.sp;
    sy += o.sy;
    inter += o.inter;
  }
  double loss() const { return 1.0 - 2.0 * inter / (sp + sy); }
  /// dL/dp1 for a pixel with label y.
  double dp1(int y) const {
    const double den = sp + sy;
    return -2.0 * (y * den - inter) / (den * den);
  }
};

inline void dice_logit_grad(const double* p, double dldp1, double scale, double* dlogit) {
  const double s = p[0] * p[1];
  dlogit[0] = -scale * dldp1 * s;
  dlogit[1] = scale * dldp1 * s;
}

}  // namespace scast::kernels::detail
