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
#include "scast/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "scast/errors.hpp"

namespace scast {

std::string to_string(LossKind kind) { return kind == LossKind::BCE ? "bce" : "dice"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "bce" || name == "BCE") return LossKind::BCE;
  if (name == "dice" || name == "DICE") return LossKind::DICE;
  throw ConfigError("loss", "expected 'bce' or 'dice', got '" + name + "'");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
  };
  require(height >= 1, "height", "must be >= 1");
  require(width >= 1, "width", "must be >= 1");
  require(feat_dim >= 1, "feat_dim", "must be >= 1");
  require(s_text >= 1, "s_text", "must be >= 1");
  require(s_back >= 1, "s_back", "must be >= 1");
  require(noise_sigma > 0, "noise_sigma", "must be > 0");
  require(separation > 0, "separation", "must be > 0");
  require(shift >= 0, "shift", "must be >= 0");
  require(n_train >= 1, "n_train", "must be >= 1");
  require(n_eval >= 1, "n_eval", "must be >= 1");
  require(text_regions_min >= 1, "text_regions_min", "must be >= 1");
  require(text_regions_max >= text_regions_min, "text_regions_max", "must be >= text_regions_min");
  require(text_size_min >= 1, "text_size_min", "must be >= 1");
  require(text_size_max >= text_size_min, "text_size_max", "must be >= text_size_min");
  require(align >= 1, "align", "must be >= 1");
  require(hidden_dim >= 1, "hidden_dim", "must be >= 1");
  require(std::isfinite(hidden_bias_init), "hidden_bias_init", "must be finite");
  require(lr0 > 0, "lr0", "must be > 0");
  require(momentum >= 0 && momentum < 1, "momentum", "must be in [0, 1)");
  require(weight_decay >= 0, "weight_decay", "must be >= 0");
  require(poly_power > 0, "poly_power", "must be > 0");
  require(batch_size >= 2, "batch_size", "must be >= 2");
  require(source_epochs >= 0, "source_epochs", "must be >= 0");
  require(refine_epochs >= 0, "refine_epochs", "must be >= 0");
  require(epochs_per_round >= 0, "epochs_per_round", "must be >= 0");
  require(lambda_bi >= 0, "lambda_bi", "must be >= 0");
  require(lambda_sub >= 0, "lambda_sub", "must be >= 0");
  require(eps > 0, "eps", "must be > 0");
  require(min_pts >= 1, "min_pts", "must be >= 1");
  require(downsample >= 1, "downsample", "must be >= 1");
  require(height % downsample == 0 && width % downsample == 0, "downsample",
          "must divide height and width");
  require(!rho_schedule.empty(), "rho_schedule", "must be non-empty");
  for (std::size_t i = 0; i < rho_schedule.size(); ++i) {
    require(rho_schedule[i] > 0 && rho_schedule[i] <= 100, "rho_schedule",
            "entries must lie in (0, 100]");
    if (i > 0) require(rho_schedule[i] > rho_schedule[i - 1], "rho_schedule",
                       "must be strictly increasing");
  }
  require(rho_reg >= 0 && rho_reg < 100, "rho_reg", "must be in [0, 100)");
  require(hist_bins >= 1, "hist_bins", "must be >= 1");
}

namespace {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <class T>
Setter field(T RunConfig::*member, const char* name) {
  return [member, name](RunConfig& c, const nlohmann::json& v) {
    try {
      c.*member = v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(name, std::string("wrong type: ") + e.what());
    }
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", field(&RunConfig::seed, "seed")},
      {"height", field(&RunConfig::height, "height")},
      {"width", field(&RunConfig::width, "width")},
      {"feat_dim", field(&RunConfig::feat_dim, "feat_dim")},
      {"s_text", field(&RunConfig::s_text, "s_text")},
      {"s_back", field(&RunConfig::s_back, "s_back")},
      {"noise_sigma", field(&RunConfig::noise_sigma, "noise_sigma")},
      {"separation", field(&RunConfig::separation, "separation")},
      {"shift", field(&RunConfig::shift, "shift")},
      {"n_train", field(&RunConfig::n_train, "n_train")},
      {"n_eval", field(&RunConfig::n_eval, "n_eval")},
      {"text_regions_min", field(&RunConfig::text_regions_min, "text_regions_min")},
      {"text_regions_max", field(&RunConfig::text_regions_max, "text_regions_max")},
      {"text_size_min", field(&RunConfig::text_size_min, "text_size_min")},
      {"text_size_max", field(&RunConfig::text_size_max, "text_size_max")},
      {"align", field(&RunConfig::align, "align")},
      {"hidden_dim", field(&RunConfig::hidden_dim, "hidden_dim")},
      {"hidden_bias_init", field(&RunConfig::hidden_bias_init, "hidden_bias_init")},
      {"lr0", field(&RunConfig::lr0, "lr0")},
      {"momentum", field(&RunConfig::momentum, "momentum")},
      {"weight_decay", field(&RunConfig::weight_decay, "weight_decay")},
      {"poly_power", field(&RunConfig::poly_power, "poly_power")},
      {"batch_size", field(&RunConfig::batch_size, "batch_size")},
      {"source_epochs", field(&RunConfig::source_epochs, "source_epochs")},
      {"refine_epochs", field(&RunConfig::refine_epochs, "refine_epochs")},
      {"epochs_per_round", field(&RunConfig::epochs_per_round, "epochs_per_round")},
      {"loss",
       [](RunConfig& c, const nlohmann::json& v) {
         if (!v.is_string()) throw ConfigError("loss", "must be a string");
         c.loss = parse_loss_kind(v.get<std::string>());
       }},
      {"lambda_bi", field(&RunConfig::lambda_bi, "lambda_bi")},
      {"lambda_sub", field(&RunConfig::lambda_sub, "lambda_sub")},
      {"eps", field(&RunConfig::eps, "eps")},
      {"min_pts", field(&RunConfig::min_pts, "min_pts")},
      {"downsample", field(&RunConfig::downsample, "downsample")},
      {"rho_schedule", field(&RunConfig::rho_schedule, "rho_schedule")},
      {"rho_reg", field(&RunConfig::rho_reg, "rho_reg")},
      {"coreg_per_image", field(&RunConfig::coreg_per_image, "coreg_per_image")},
      {"hist_bins", field(&RunConfig::hist_bins, "hist_bins")},
  };
  return table;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, "unknown key");
    it->second(cfg, value);
  }
  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"height", c.height},
      {"width", c.width},
      {"feat_dim", c.feat_dim},
      {"s_text", c.s_text},
      {"s_back", c.s_back},
      {"noise_sigma", c.noise_sigma},
      {"separation", c.separation},
      {"shift", c.shift},
      {"n_train", c.n_train},
      {"n_eval", c.n_eval},
      {"text_regions_min", c.text_regions_min},
      {"text_regions_max", c.text_regions_max},
      {"text_size_min", c.text_size_min},
      {"text_size_max", c.text_size_max},
      {"align", c.align},
      {"hidden_dim", c.hidden_dim},
      {"hidden_bias_init", c.hidden_bias_init},
      {"lr0", c.lr0},
      {"momentum", c.momentum},
      {"weight_decay", c.weight_decay},
      {"poly_power", c.poly_power},
      {"batch_size", c.batch_size},
      {"source_epochs", c.source_epochs},
      {"refine_epochs", c.refine_epochs},
      {"epochs_per_round", c.epochs_per_round},
      {"loss", to_string(c.loss)},
      {"lambda_bi", c.lambda_bi},
      {"lambda_sub", c.lambda_sub},
      {"eps", c.eps},
      {"min_pts", c.min_pts},
      {"downsample", c.downsample},
      {"rho_schedule", c.rho_schedule},
      {"rho_reg", c.rho_reg},
      {"coreg_per_image", c.coreg_per_image},
      {"hist_bins", c.hist_bins},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace scast
