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
#include "scast/micronet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scast/errors.hpp"
#include "scast/kernels.hpp"

namespace scast {

ModelParams::ModelParams(int in_dim, int hidden_dim)
    : in_dim_(in_dim), hidden_dim_(hidden_dim) {
  if (in_dim < 1 || hidden_dim < 1) throw ShapeError("model dims must be >= 1");
  values_.assign(off_wsub(), 0.0);
  momentum_.assign(values_.size(), 0.0);
}

ModelParams ModelParams::init(int in_dim, int hidden_dim, Rng& rng, double hidden_bias) {
  ModelParams m(in_dim, hidden_dim);
  const double a_in = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double a_h = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (std::size_t i = m.off_w1(); i < m.off_wbi(); ++i) m.values_[i] = rng.uniform(-a_in, a_in);
  for (std::size_t i = m.off_wbi(); i < m.off_wsub(); ++i) m.values_[i] = rng.uniform(-a_h, a_h);
  for (std::size_t i = m.off_b1(); i < m.off_wbi(); ++i) m.values_[i] = hidden_bias;
  return m;
}

void ModelParams::allocate_sub_head(int k) {
  if (k < 2) throw ShapeError("subcategory head needs K >= 2");
  sub_classes_ = k;
  values_.resize(off_wsub());
  momentum_.resize(off_wsub());
  values_.resize(values_.size() + static_cast<std::size_t>(hidden_dim_ + 1) * k, 0.0);
  momentum_.resize(values_.size(), 0.0);
}

void ModelParams::add_sub_head(int k, Rng& rng) {
  allocate_sub_head(k);
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
  for (std::size_t i = off_wsub(); i < values_.size(); ++i) values_[i] = rng.uniform(-a, a);
}

bool ModelParams::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ForwardResult forward(const ModelParams& params, const PixelGrid& grid, bool require_sub) {
  if (grid.feat_dim != params.in_dim())
    throw ShapeError("grid feature dim " + std::to_string(grid.feat_dim) + " != model input dim " +
                     std::to_string(params.in_dim()));
  if (require_sub && !params.has_sub_head()) throw ShapeError("subcategory head not allocated");
  const std::size_t n = grid.pixels();
  ForwardResult r;
  const auto H = static_cast<std::uint32_t>(grid.height), W = static_cast<std::uint32_t>(grid.width);
  r.features = Tensor({H, W, static_cast<std::uint32_t>(params.hidden_dim())}, DType::F32);
  r.p_bi = PredictionMap{grid.height, grid.width, 2, std::vector<float>(n * 2)};
  float* p_sub = nullptr;
  if (params.has_sub_head()) {
    r.p_sub = PredictionMap{grid.height, grid.width, params.sub_classes(),
                            std::vector<float>(n * static_cast<std::size_t>(params.sub_classes()))};
    p_sub = r.p_sub->probs.data();
  }
  kernels::forward_omp(params, grid.features.data(), n, r.features.f32().data(), r.p_bi.probs.data(), p_sub);
  return r;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void check_aligned(const PredictionMap& p, const LabelMask& y) {
  if (p.height != y.height || p.width != y.width || p.probs.size() != p.pixels() * p.channels ||
      y.labels.size() != y.pixels())
    throw ShapeError("prediction map and label mask are not aligned");
}

}  // namespace

double loss_bi(const PredictionMap& p, const LabelMask& y, LossKind kind) {
  check_aligned(p, y);
  if (p.channels != 2) throw ShapeError("bi-class loss needs a 2-channel map");
  double sum = 0, sp = 0, sy = 0, inter = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.pixels(); ++i) {
    const int label = y.labels[i];
    if (label == kIgnore) continue;
    if (label != 0 && label != 1) throw LabelError("bi-class label must be -1, 0 or 1");
    const auto pr = p.at(i);
    ++n;
    if (kind == LossKind::BCE) {
      sum -= std::log(clamp_prob(pr[label]));
    } else {
      sp += pr[1];
      sy += label;
      inter += pr[1] * label;
    }
  }
  if (n == 0) throw LossError("bi-class loss undefined: every pixel is IGNORE");
  if (kind == LossKind::BCE) return sum / static_cast<double>(n);
  return 1.0 - 2.0 * inter / (sp + sy);
}

double loss_sub(const PredictionMap& p, const LabelMask& y) {
  check_aligned(p, y);
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.pixels(); ++i) {
    const int label = y.labels[i];
    if (label == kIgnore) continue;
    if (label < 0 || label >= p.channels)
      throw LabelError("subcategory label " + std::to_string(label) + " outside [0, " +
                       std::to_string(p.channels) + ")");
    sum -= std::log(clamp_prob(p.at(i)[label]));
    ++n;
  }
  if (n == 0) throw LossError("subcategory loss undefined: every pixel is IGNORE");
  return sum / static_cast<double>(n);
}

double loss_target(const PredictionMap& p_bi, const PredictionMap& p_sub, const LabelMask& y_bi,
                   const LabelMask& y_sub, const LossWeights& w, LossKind kind) {
  double total = 0;
  if (w.sub != 0) total += w.sub * loss_sub(p_sub, y_sub);
  if (w.bi != 0) total += w.bi * loss_bi(p_bi, y_bi, kind);
  return total;
}

namespace {

std::vector<kernels::PixelRef> grid_refs(const ModelParams& params, const PixelGrid& grid,
                                         const GridLabels& labels) {
  if (grid.feat_dim != params.in_dim()) throw ShapeError("grid feature dim does not match model");
  const std::size_t n = grid.pixels();
  if ((labels.y_bi && labels.y_bi->pixels() != n) || (labels.y_sub && labels.y_sub->pixels() != n))
    throw ShapeError("label masks are not aligned with the grid");
  if (labels.y_sub && labels.y_sub->num_classes > params.sub_classes())
    throw LabelError("subcategory mask has more classes than the model head");
  std::vector<kernels::PixelRef> refs(n);
  for (std::size_t i = 0; i < n; ++i) {
    refs[i].x = grid.pixel(i);
    refs[i].y_bi = labels.y_bi ? labels.y_bi->labels[i] : kIgnore;
    refs[i].y_sub = labels.y_sub ? labels.y_sub->labels[i] : kIgnore;
  }
  return refs;
}

LossValue to_value(const kernels::Objective& o, const LossWeights& w) {
  return {o.total(w), o.bi, o.sub, o.n_bi, o.n_sub};
}

}  // namespace

std::vector<double> backward(const ModelParams& params, const PixelGrid& grid, const GridLabels& labels,
                             const LossWeights& w, LossKind kind, LossValue* value) {
  const auto refs = grid_refs(params, grid, labels);
  std::vector<double> grad(params.size());
  const auto o = kernels::objective_omp(params, refs, w, kind, grad);
  if (o.n_bi == 0 && o.n_sub == 0) throw LossError("objective undefined: no labelled pixels");
  if (value) *value = to_value(o, w);
  return grad;
}

LossValue objective(const ModelParams& params, const PixelGrid& grid, const GridLabels& labels,
                    const LossWeights& w, LossKind kind) {
  const auto refs = grid_refs(params, grid, labels);
  const auto o = kernels::objective_omp(params, refs, w, kind, {});
  if (o.n_bi == 0 && o.n_sub == 0) throw LossError("objective undefined: no labelled pixels");
  return to_value(o, w);
}

double poly_lr(const OptimConfig& cfg, std::int64_t iter) {
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(cfg.max_iter);
  return cfg.lr0 * std::pow(std::max(frac, 0.0), cfg.power);
}

void sgd_step(ModelParams& params, std::span<const double> grads, const OptimConfig& cfg) {
  if (grads.size() != params.size()) throw ShapeError("gradient does not match parameters");
  if (params.iteration >= cfg.max_iter)
    throw StateError("iteration " + std::to_string(params.iteration) + " reached max_iter " +
                     std::to_string(cfg.max_iter));
  const double lr = poly_lr(cfg, params.iteration);
  auto theta = params.values();
  auto v = params.momentum();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    v[i] = cfg.momentum * v[i] + grads[i] + cfg.weight_decay * theta[i];
    theta[i] -= lr * v[i];
  }
  ++params.iteration;
}

std::size_t PixelPool::pixels() const {
  std::size_t n = 0;
  for (const auto* g : grids) n += g->pixels();
  return n;
}

std::int64_t steps_per_epoch(std::size_t source_pixels, int batch_size, bool mixed) {
  const std::size_t per = mixed ? static_cast<std::size_t>(batch_size / 2) : static_cast<std::size_t>(batch_size);
  return static_cast<std::int64_t>((source_pixels + per - 1) / per);
}

namespace {

std::vector<kernels::PixelRef> pool_refs(const PixelPool& pool, bool skip_unlabelled) {
  if (pool.y_bi.size() != pool.grids.size() || (!pool.y_sub.empty() && pool.y_sub.size() != pool.grids.size()))
    throw ShapeError("pixel pool lists have different lengths");
  std::vector<kernels::PixelRef> refs;
  refs.reserve(pool.pixels());
  for (std::size_t g = 0; g < pool.grids.size(); ++g) {
    const auto& grid = *pool.grids[g];
    const LabelMask* ysub = pool.y_sub.empty() ? nullptr : pool.y_sub[g];
    for (std::size_t i = 0; i < grid.pixels(); ++i) {
      kernels::PixelRef r{grid.pixel(i), pool.y_bi[g] ? pool.y_bi[g]->labels[i] : kIgnore,
                          ysub ? ysub->labels[i] : kIgnore};
      if (skip_unlabelled && r.y_bi == kIgnore && r.y_sub == kIgnore) continue;
      refs.push_back(r);
    }
  }
  return refs;
}

}  // namespace

std::vector<EpochStats> train_epochs(ModelParams& params, const PixelPool& source,
                                     const PixelPool* target, const TrainOptions& opt) {
  std::vector<EpochStats> trace;
  if (opt.epochs <= 0) return trace;
  for (const auto* g : source.grids)
    if (g->feat_dim != params.in_dim()) throw ShapeError("source grid feature dim does not match model");

  const auto src = pool_refs(source, false);
  // Target pools keep IGNORE pixels in the sampling frame, so the pseudo-labelled
  // share of a batch tracks the selected fraction, as with whole-image batches.
  const auto tgt = target ? pool_refs(*target, false) : std::vector<kernels::PixelRef>{};
  const bool mixed = target != nullptr && !tgt.empty();
  if (src.empty()) throw TrainingError("empty source pool");

  Rng rng(opt.seed);
  std::vector<std::uint32_t> sperm(src.size()), tperm(tgt.size());
  for (std::size_t i = 0; i < sperm.size(); ++i) sperm[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < tperm.size(); ++i) tperm[i] = static_cast<std::uint32_t>(i);
  std::size_t tcursor = tperm.size();

  const std::size_t half = mixed ? static_cast<std::size_t>(opt.batch_size / 2) : static_cast<std::size_t>(opt.batch_size);
  std::vector<kernels::PixelRef> batch;
  batch.reserve(2 * half);
  std::vector<double> grad(params.size());

  for (int e = 0; e < opt.epochs; ++e) {
    rng.shuffle(std::span<std::uint32_t>(sperm));
    double sum_bi = 0, sum_sub = 0;
    std::size_t cnt_bi = 0, cnt_sub = 0;
    double lr = 0;
    for (std::size_t start = 0; start < src.size(); start += half) {
      batch.clear();
      const std::size_t end = std::min(src.size(), start + half);
      for (std::size_t i = start; i < end; ++i) batch.push_back(src[sperm[i]]);
      if (mixed) {
        for (std::size_t i = 0; i < half; ++i) {
          if (tcursor == tperm.size()) {
            rng.shuffle(std::span<std::uint32_t>(tperm));
            tcursor = 0;
          }
          batch.push_back(tgt[tperm[tcursor++]]);
        }
      }
      const auto o = kernels::objective_omp(params, batch, opt.weights, opt.kind, grad);
      if (o.n_bi == 0 && o.n_sub == 0) {
        // Nothing labelled in this batch; the step still advances the schedule.
        std::fill(grad.begin(), grad.end(), 0.0);
      }
      const double total = o.total(opt.weights);
      if (!std::isfinite(total))
        throw TrainingError("non-finite loss at epoch " + std::to_string(e) + ", iteration " +
                            std::to_string(params.iteration));
      if (o.n_bi) {
        sum_bi += o.bi;
        ++cnt_bi;
      }
      if (o.n_sub) {
        sum_sub += o.sub;
        ++cnt_sub;
      }
      lr = poly_lr(opt.optim, params.iteration);
      sgd_step(params, grad, opt.optim);
    }
    if (!params.all_finite())
      throw TrainingError("non-finite parameters after epoch " + std::to_string(e));
    trace.push_back({e, cnt_bi ? sum_bi / cnt_bi : 0.0, cnt_sub ? sum_sub / cnt_sub : 0.0, lr});
  }
  return trace;
}

}  // namespace scast
