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
#include <string>
#include <vector>

#include "json.hpp"

namespace scast {

enum class LossKind { BCE, DICE };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

/// Every tunable of a run. JSON keys are the snake_case member names.
struct RunConfig {
  std::uint64_t seed = 1;

  // World / data.
  int height = 64;
  int width = 64;
  int feat_dim = 8;
  int s_text = 3;
  int s_back = 3;
  double noise_sigma = 0.5;
  double separation = 5.0;  // minimum pairwise distance between planted means
  double shift = 1.5;       // |delta|
  int n_train = 32;
  int n_eval = 16;
  int text_regions_min = 2;
  int text_regions_max = 6;
  int text_size_min = 8;
  int text_size_max = 24;
  int align = 4;  // region boundaries snap to this pixel grid

  // Model and optimisation.
  int hidden_dim = 16;
  // Shared positive offset on hidden pre-activations. With zero biases the
  // trained features spread too far in angle for the default eps.
  double hidden_bias_init = 10.0;
  double lr0 = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.9;
  int batch_size = 256;
  int source_epochs = 10;   // bi-class pretraining before discovery
  int refine_epochs = 10;   // second source phase (adds the subcategory loss when enabled)
  int epochs_per_round = 20;
  LossKind loss = LossKind::BCE;
  double lambda_bi = 1.0;
  double lambda_sub = 1.0;

  // Subcategory discovery.
  double eps = 0.01;
  int min_pts = 4;
  int downsample = 4;

  // Self-training.
  std::vector<double> rho_schedule{20, 40, 60, 80, 100};
  double rho_reg = 10;
  bool coreg_per_image = false;

  // Diagnostics.
  int hist_bins = 100;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace scast
