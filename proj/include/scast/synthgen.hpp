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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "scast/config.hpp"
#include "scast/tensor.hpp"

namespace scast {

enum class Domain { Source, Target };

const char* to_string(Domain d) noexcept;

/// Generative description of a paired source/target world. Subpopulations
/// [0, s_text) are text, [s_text, s_text + s_back) are background. Every
/// subpopulation is an isotropic Gaussian around its mean; the target domain
/// adds `shift` to every mean.
struct WorldSpec {
  int height = 64;
  int width = 64;
  int feat_dim = 8;
  int s_text = 3;
  int s_back = 3;
  std::vector<std::vector<double>> means;
  double noise_sigma = 0.5;
  std::vector<double> shift;
  int text_regions_min = 2;
  int text_regions_max = 6;
  int text_size_min = 8;
  int text_size_max = 24;
  int align = 4;
  std::uint64_t seed = 1;

  int subpops() const noexcept { return s_text + s_back; }
  bool is_text(int subpop) const noexcept { return subpop < s_text; }
  std::vector<double> mean(int subpop, Domain d) const;
  void validate() const;
};

/// Builds the world for a run: means on a scaled simplex so that every pair is
/// exactly `separation` apart (random layout with rejection when there are
/// more subpopulations than feature dims), shift of length `shift` along the
/// direction from a seed-chosen text mean to a seed-chosen background mean.
WorldSpec make_world(const RunConfig& cfg);

struct DomainSample {
  PixelGrid grid;
  LabelMask biclass;      // 1 = text, 0 = background
  LabelMask true_subpop;  // hidden ground truth, evaluation only
};

/// Deterministic in (spec.seed, domain, first_index + i); samples are
/// independent of each other and of the order in which they are produced.
std::vector<DomainSample> generate_domain(const WorldSpec& spec, Domain domain, int n,
                                          std::uint64_t first_index = 0);
DomainSample generate_sample(const WorldSpec& spec, Domain domain, std::uint64_t index);

/// Index offset separating evaluation samples from training samples.
inline constexpr std::uint64_t kEvalIndexBase = 1ull << 20;

/// Exact posterior {P(background | x), P(text | x)} under the mixture with
/// equal prior weight on every subpopulation.
std::array<double, 2> bayes_posterior(const WorldSpec& spec, Domain domain,
                                      std::span<const double> feature);
/// Same with explicit per-subpopulation prior weights (need not be normalised).
std::array<double, 2> bayes_posterior(const WorldSpec& spec, Domain domain,
                                      std::span<const double> feature,
                                      std::span<const double> priors);

}  // namespace scast
