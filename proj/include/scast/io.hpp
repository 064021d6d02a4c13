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

#include <filesystem>
#include <optional>
#include <span>

#include "json.hpp"
#include "scast/config.hpp"
#include "scast/micronet.hpp"
#include "scast/selftrain.hpp"
#include "scast/subcat.hpp"

namespace scast {

namespace fs = std::filesystem;

/// JSON with keys in insertion order, written with two-space indent and a
/// trailing newline so equal content gives equal bytes.
void write_json(const fs::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json(const fs::path& path);

/// Directory of SCST parameter tensors (stored as F32) plus index.json.
void save_checkpoint(const fs::path& dir, const ModelParams& params, const SubcategoryModel* subcat);

struct Checkpoint {
  ModelParams params;
  std::optional<SubcategoryModel> subcat;
};
Checkpoint load_checkpoint(const fs::path& dir);

/// subcat.json (counts, parents, params) plus centroids.scst in `dir`.
void save_subcat(const fs::path& dir, const SubcategoryModel& model);
SubcategoryModel load_subcat(const fs::path& dir);

/// epoch,loss_bi,loss_sub,lr
void write_loss_trace_csv(const fs::path& path, std::span<const EpochStats> trace);

/// Writes every split as SCST files under `dir` and a manifest.json that
/// echoes the config.
void write_dataset(const fs::path& dir, const RunConfig& cfg, const Dataset& data);
/// Reads a manifest written by write_dataset. The echoed config is returned
/// through `cfg` when given.
Dataset read_dataset(const fs::path& dir, RunConfig* cfg = nullptr);

}  // namespace scast
