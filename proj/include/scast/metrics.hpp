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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scast/tensor.hpp"

namespace scast {

struct Histogram {
  int bins = 0;
  std::vector<double> edges;          // bins + 1 values, 0 .. 1
  std::vector<std::uint64_t> counts;  // bins values
  std::uint64_t total = 0;

  explicit Histogram(int bins = 100);
  void add(double v);
  /// Fraction of the mass in the first and last bins.
  double extreme_mass() const;
};

/// Scores of one channel, binned uniformly over [0, 1]; the last bin is
/// right-closed. Pooled over every map.
Histogram score_histogram(std::span<const PredictionMap> maps, int channel, int bins);
Histogram score_histogram(const PredictionMap& map, int channel, int bins);

/// Which ground-truth pixels a diagnostic covers.
enum class Scope { All, Text, Back };
const char* to_string(Scope s) noexcept;

/// Mean per-pixel entropy in nats over scoped pixels. `truth` may be empty,
/// in which case every pixel is in scope (only valid with Scope::All).
double mean_entropy(std::span<const PredictionMap> maps, std::span<const LabelMask> truth, Scope scope);
double mean_entropy(const PredictionMap& map, const LabelMask* truth, Scope scope);

/// Sum over scoped pixels of max_c p(c).
double likelihood_metric(std::span<const PredictionMap> maps, std::span<const LabelMask> truth, Scope scope);
double likelihood_metric(const PredictionMap& map, const LabelMask* truth, Scope scope);

struct ErrorCount {
  std::uint64_t selected = 0;
  std::uint64_t wrong = 0;
  double rate() const noexcept { return selected ? static_cast<double>(wrong) / selected : 0.0; }
};

/// Disagreement of selected pseudo labels with ground truth. With a parent
/// map, subcategory labels are compared through their parent class. Pixels
/// whose truth is IGNORE are skipped.
ErrorCount pseudo_error(std::span<const LabelMask> pseudo, std::span<const LabelMask> truth,
                        std::span<const std::int32_t> parent = {});
double pseudo_error_rate(const LabelMask& pseudo, const LabelMask& truth,
                         std::span<const std::int32_t> parent = {});

struct PRF {
  double precision = 0;
  double recall = 0;
  double f_score = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  static PRF from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);
};

/// Pixel-level P/R/F with text as the positive class. IGNORE truth pixels are
/// skipped; IGNORE predictions count as background.
PRF dense_prf(std::span<const LabelMask> pred, std::span<const LabelMask> truth);
PRF dense_prf(const LabelMask& pred, const LabelMask& truth);

/// 4-connected text components; the result holds the component id per pixel
/// (-1 outside text) and the component count.
struct Components {
  std::vector<std::int32_t> id;
  std::int32_t count = 0;
};
Components text_components(const LabelMask& mask);

/// Region-level P/R/F. Predicted and true components are matched one-to-one,
/// greedily by descending IoU, when IoU >= 0.5. Counts are pooled over maps.
PRF region_prf_iou50(std::span<const LabelMask> pred, std::span<const LabelMask> truth);
PRF region_prf_iou50(const LabelMask& pred, const LabelMask& truth);

/// Adjusted Rand index over pixels labelled in both masks (and inside
/// `scope`, when given, where scope != IGNORE).
double clustering_ari(std::span<const LabelMask> pred, std::span<const LabelMask> truth,
                      std::span<const LabelMask> scope = {});
double clustering_ari(const LabelMask& pred, const LabelMask& truth, const LabelMask* scope = nullptr);

struct MetricRow {
  std::string metric;
  std::string scope;
  double value = 0;
};

/// Shortest round-trip decimal form; identical input gives identical text.
std::string format_double(double v);

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows);

}  // namespace scast
