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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scast/config.hpp"
#include "scast/metrics.hpp"
#include "scast/micronet.hpp"
#include "scast/pseudolabel.hpp"
#include "scast/subcat.hpp"
#include "scast/synthgen.hpp"

namespace scast {

/// Which parts of the method are switched on. Dependencies are enforced at
/// construction: st_k needs sc_k, reg needs st_k and st_2.
class AblationMode {
 public:
  AblationMode() = default;
  AblationMode(bool sc_k, bool st_2, bool st_k, bool reg);

  /// baseline | sck | st2 | st2_sck | st2_sck_stk | full
  static AblationMode parse(std::string_view name);
  std::string name() const;

  bool sc_k() const noexcept { return sc_k_; }
  bool st_2() const noexcept { return st_2_; }
  bool st_k() const noexcept { return st_k_; }
  bool reg() const noexcept { return reg_; }
  bool runs_rounds() const noexcept { return st_2_ || st_k_; }

  bool operator==(const AblationMode&) const = default;

 private:
  bool sc_k_ = false;
  bool st_2_ = false;
  bool st_k_ = false;
  bool reg_ = false;
};

inline constexpr const char* kModeNames[] = {"baseline", "sck", "st2", "st2_sck", "st2_sck_stk", "full"};

/// Source train, target train (unlabelled during adaptation) and target eval.
struct Dataset {
  WorldSpec world;
  std::vector<DomainSample> source;
  std::vector<DomainSample> target;
  std::vector<DomainSample> target_eval;
};

Dataset make_dataset(const RunConfig& cfg);

struct PseudoLabels {
  std::vector<LabelMask> y_bi;
  std::vector<LabelMask> y_sub;  // all IGNORE unless subcategory self-training is on
  ThresholdSet theta_bi;
  std::optional<ThresholdSet> theta_sub;
  std::optional<CoRegResult> coreg;  // filtering statistics (masks moved out)
  std::size_t selected_bi = 0;
  std::size_t selected_sub = 0;
  ErrorCount error_bi;          // after filtering
  ErrorCount error_bi_unfiltered;
};

struct RoundReport {
  std::string round;  // "1".."n" or "final"
  double rho = 0;
  std::size_t selected_bi = 0;
  std::size_t selected_sub = 0;
  std::size_t dropped = 0;
  double pseudo_err = 0;
  double precision = 0;
  double recall = 0;
  double f_score = 0;
  double entropy_text = 0;
  double likelihood_text = 0;
  double extreme_mass_text = 0;
};

struct SelfTrainState {
  int round = 0;
  ModelParams params;
  std::optional<SubcategoryModel> subcat;
  std::vector<LabelMask> source_y_sub;  // discovery output on the source set
  PseudoLabels pseudo;
  std::vector<RoundReport> log;
  std::vector<EpochStats> trace;
};

/// Everything a run shares: config, data and the optimiser schedule.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);
  Pipeline(RunConfig cfg, Dataset data);

  const RunConfig& config() const noexcept { return cfg_; }
  const Dataset& data() const noexcept { return data_; }
  /// Poly decay spans the whole run: both source phases plus every round.
  const OptimConfig& optim() const noexcept { return optim_; }

  /// Initialisation plus bi-class source training.
  SelfTrainState source_phase_a() const;
  /// Subcategory discovery on the source set and sub-head allocation.
  void discover(SelfTrainState& s) const;
  /// Second source phase; adds the subcategory loss when sc_k is on.
  void source_phase_b(SelfTrainState& s, const AblationMode& mode) const;
  /// Full source stage for a mode: phase A, discovery when sc_k, phase B.
  SelfTrainState train_source(const AblationMode& mode) const;

  /// Pseudo-label step at the given rho; never touches params.
  PseudoLabels predict_pseudo(const SelfTrainState& s, const AblationMode& mode, double rho) const;
  /// One round: pseudo-label step at rho_(round), then mixed retraining.
  void run_round(SelfTrainState& s, const AblationMode& mode) const;
  /// Detection metrics and text-scope diagnostics on the target eval set.
  RoundReport evaluate(const SelfTrainState& s) const;

  using RoundHook = std::function<void(const SelfTrainState&)>;
  /// Rounds for the mode starting from a trained source state, plus the final
  /// row. `on_round` sees the state after every round.
  void adapt(SelfTrainState& s, const AblationMode& mode, const RoundHook& on_round = {}) const;
  SelfTrainState run(const AblationMode& mode) const;

 private:
  PixelPool source_pool(const SelfTrainState& s, bool with_sub) const;
  TrainOptions train_options(int epochs, std::uint64_t seed, bool with_sub) const;

  RunConfig cfg_;
  Dataset data_;
  OptimConfig optim_;
};

/// Distribution used for the confidence diagnostics: the K-way subcategory
/// head when present, the bi-class head otherwise.
PredictionMap diagnostic_map(const ForwardResult& f, const SubcategoryModel* subcat);
/// Two-channel [1 - s, s] map of the text score s: p_bi(text) for a bi-class
/// map (subcat null), the largest text-subcategory probability for a K-way one.
PredictionMap text_score_map(const PredictionMap& diag, const SubcategoryModel* subcat);
/// Bi-class argmax.
LabelMask detect(const PredictionMap& p_bi);

void write_report_csv(const std::filesystem::path& path, const std::vector<RoundReport>& rows);

}  // namespace scast
