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
#include <optional>
#include <span>
#include <vector>

#include "scast/config.hpp"
#include "scast/rng.hpp"
#include "scast/tensor.hpp"

namespace scast {

/// Shared pixelwise extractor E (one ReLU layer) with a bi-class head and an
/// optional K-way subcategory head. All parameters live in one flat vector so
/// the optimiser and the gradient checks can treat them uniformly.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(int in_dim, int hidden_dim);

  /// Weights uniform in +-1/sqrt(fan_in); hidden biases start at
  /// `hidden_bias`, head biases at zero.
  static ModelParams init(int in_dim, int hidden_dim, Rng& rng, double hidden_bias = 0.0);
  /// Allocates (or re-allocates) the K-way head, initialised from rng.
  void add_sub_head(int k, Rng& rng);
  /// Zero-filled K-way head, for loading stored parameters.
  void allocate_sub_head(int k);

  int in_dim() const noexcept { return in_dim_; }
  int hidden_dim() const noexcept { return hidden_dim_; }
  int sub_classes() const noexcept { return sub_classes_; }
  bool has_sub_head() const noexcept { return sub_classes_ > 0; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> momentum() noexcept { return momentum_; }
  std::span<const double> momentum() const noexcept { return momentum_; }
  std::size_t size() const noexcept { return values_.size(); }

  // Row-major blocks: w1 [in x hidden], b1 [hidden], w_bi [hidden x 2],
  // b_bi [2], w_sub [hidden x K], b_sub [K].
  std::size_t off_w1() const noexcept { return 0; }
  std::size_t off_b1() const noexcept { return off_w1() + static_cast<std::size_t>(in_dim_) * hidden_dim_; }
  std::size_t off_wbi() const noexcept { return off_b1() + hidden_dim_; }
  std::size_t off_bbi() const noexcept { return off_wbi() + 2 * static_cast<std::size_t>(hidden_dim_); }
  std::size_t off_wsub() const noexcept { return off_bbi() + 2; }
  std::size_t off_bsub() const noexcept { return off_wsub() + static_cast<std::size_t>(hidden_dim_) * sub_classes_; }

  std::span<double> w1() { return block(off_w1(), off_b1()); }
  std::span<double> b1() { return block(off_b1(), off_wbi()); }
  std::span<double> w_bi() { return block(off_wbi(), off_bbi()); }
  std::span<double> b_bi() { return block(off_bbi(), off_wsub()); }
  std::span<double> w_sub() { return block(off_wsub(), off_bsub()); }
  std::span<double> b_sub() { return block(off_bsub(), values_.size()); }

  std::int64_t iteration = 0;

  bool all_finite() const noexcept;
  bool operator==(const ModelParams&) const = default;

 private:
  std::span<double> block(std::size_t a, std::size_t b) { return {values_.data() + a, b - a}; }

  int in_dim_ = 0;
  int hidden_dim_ = 0;
  int sub_classes_ = 0;
  std::vector<double> values_;
  std::vector<double> momentum_;
};

struct LossWeights {
  double bi = 1.0;
  double sub = 1.0;
};

struct OptimConfig {
  double lr0 = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double power = 0.9;
  std::int64_t max_iter = 1;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

struct ForwardResult {
  Tensor features;  // [H, W, hidden], post-ReLU
  PredictionMap p_bi;
  std::optional<PredictionMap> p_sub;
};

/// Pixelwise forward pass; p_sub is produced whenever the subcategory head
/// exists. Throws ShapeError when grid.feat_dim != in_dim, or when require_sub
/// is set and no subcategory head has been allocated.
ForwardResult forward(const ModelParams& params, const PixelGrid& grid, bool require_sub = false);

// Losses over prediction maps. IGNORE pixels contribute nothing; a loss with no
// labelled pixels throws LossError.
double loss_bi(const PredictionMap& p_bi, const LabelMask& y, LossKind kind);
double loss_sub(const PredictionMap& p_sub, const LabelMask& y_sub);
double loss_target(const PredictionMap& p_bi, const PredictionMap& p_sub, const LabelMask& y_bi,
                   const LabelMask& y_sub, const LossWeights& w, LossKind kind);

/// Gradient of lambda_bi * L_bi + lambda_sub * L_sub over one grid. A term
/// whose weight is zero or whose mask is absent is skipped.
struct GridLabels {
  const LabelMask* y_bi = nullptr;
  const LabelMask* y_sub = nullptr;
};
struct LossValue {
  double total = 0;
  double bi = 0;
  double sub = 0;
  std::size_t n_bi = 0;
  std::size_t n_sub = 0;
};
std::vector<double> backward(const ModelParams& params, const PixelGrid& grid, const GridLabels& labels,
                             const LossWeights& w, LossKind kind, LossValue* value = nullptr);
/// Objective value only (same semantics as backward), evaluated in double.
LossValue objective(const ModelParams& params, const PixelGrid& grid, const GridLabels& labels,
                    const LossWeights& w, LossKind kind);

double poly_lr(const OptimConfig& cfg, std::int64_t iter);
/// v <- m v + g + wd * theta; theta <- theta - lr v; iteration += 1.
void sgd_step(ModelParams& params, std::span<const double> grads, const OptimConfig& cfg);

// ---------------------------------------------------------------------------
// Training loops

/// One labelled pool of pixels: parallel lists of grids and masks. y_sub may be
/// empty (no subcategory labels for this pool).
struct PixelPool {
  std::vector<const PixelGrid*> grids;
  std::vector<const LabelMask*> y_bi;
  std::vector<const LabelMask*> y_sub;

  std::size_t pixels() const;
};

struct TrainOptions {
  OptimConfig optim;
  LossWeights weights;
  LossKind kind = LossKind::BCE;
  int epochs = 0;
  int batch_size = 256;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss_bi = 0;
  double loss_sub = 0;
  double lr = 0;
};

/// Mini-batch SGD over shuffled pixels of `source`; when `target` is given every
/// batch is half source, half target pixels. Throws TrainingError on a
/// non-finite loss.
std::vector<EpochStats> train_epochs(ModelParams& params, const PixelPool& source,
                                     const PixelPool* target, const TrainOptions& opt);

/// Number of SGD steps train_epochs performs per epoch.
std::int64_t steps_per_epoch(std::size_t source_pixels, int batch_size, bool mixed);

}  // namespace scast
