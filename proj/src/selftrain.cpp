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
#include "scast/selftrain.hpp"

#include <fstream>
#include <utility>

#include "scast/errors.hpp"
#include "scast/rng.hpp"

namespace scast {

namespace {

constexpr std::uint64_t kInitStream = 0x494E4954ull;
constexpr std::uint64_t kPhaseAStream = 0x5048415341ull;
constexpr std::uint64_t kPhaseBStream = 0x5048415342ull;
constexpr std::uint64_t kSubHeadStream = 0x53554248ull;
constexpr std::uint64_t kRoundStream = 0x524F554E44ull;

std::vector<std::int32_t> parents_of(const SelfTrainState& s) {
  return s.subcat ? s.subcat->parents() : std::vector<std::int32_t>{};
}

}  // namespace

AblationMode::AblationMode(bool sc_k, bool st_2, bool st_k, bool reg)
    : sc_k_(sc_k), st_2_(st_2), st_k_(st_k), reg_(reg) {
  if (st_k && !sc_k) throw ConfigError("mode", "subcategory self-training requires subcategorisation");
  if (reg && !(st_k && st_2)) throw ConfigError("mode", "co-regularisation requires both self-training branches");
}

AblationMode AblationMode::parse(std::string_view name) {
  if (name == "baseline") return {false, false, false, false};
  if (name == "sck") return {true, false, false, false};
  if (name == "st2") return {false, true, false, false};
  if (name == "st2_sck") return {true, true, false, false};
  if (name == "st2_sck_stk") return {true, true, true, false};
  if (name == "full") return {true, true, true, true};
  throw ConfigError("mode", "unknown mode '" + std::string(name) +
                                "' (expected baseline, sck, st2, st2_sck, st2_sck_stk or full)");
}

std::string AblationMode::name() const {
  if (reg_) return "full";
  if (st_k_) return "st2_sck_stk";
  if (st_2_) return sc_k_ ? "st2_sck" : "st2";
  return sc_k_ ? "sck" : "baseline";
}

Dataset make_dataset(const RunConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.world = make_world(cfg);
  d.source = generate_domain(d.world, Domain::Source, cfg.n_train, 0);
  d.target = generate_domain(d.world, Domain::Target, cfg.n_train, 0);
  d.target_eval = generate_domain(d.world, Domain::Target, cfg.n_eval, kEvalIndexBase);
  return d;
}

Pipeline::Pipeline(RunConfig cfg) : Pipeline(cfg, make_dataset(cfg)) {}

Pipeline::Pipeline(RunConfig cfg, Dataset data) : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  if (data_.source.empty() || data_.target.empty() || data_.target_eval.empty())
    throw ConfigError("n_train", "every split needs at least one sample");
  std::size_t src_pixels = 0;
  for (const auto& s : data_.source) src_pixels += s.grid.pixels();
  const auto plain = steps_per_epoch(src_pixels, cfg_.batch_size, false);
  const auto mixed = steps_per_epoch(src_pixels, cfg_.batch_size, true);
  optim_.lr0 = cfg_.lr0;
  optim_.momentum = cfg_.momentum;
  optim_.weight_decay = cfg_.weight_decay;
  optim_.power = cfg_.poly_power;
  optim_.max_iter = std::max<std::int64_t>(
      1, plain * (cfg_.source_epochs + cfg_.refine_epochs) +
             mixed * cfg_.epochs_per_round * static_cast<std::int64_t>(cfg_.rho_schedule.size()));
}

PixelPool Pipeline::source_pool(const SelfTrainState& s, bool with_sub) const {
  PixelPool pool;
  for (std::size_t i = 0; i < data_.source.size(); ++i) {
    pool.grids.push_back(&data_.source[i].grid);
    pool.y_bi.push_back(&data_.source[i].biclass);
    if (with_sub) pool.y_sub.push_back(&s.source_y_sub.at(i));
  }
  return pool;
}

TrainOptions Pipeline::train_options(int epochs, std::uint64_t seed, bool with_sub) const {
  TrainOptions o;
  o.optim = optim_;
  o.weights = {cfg_.lambda_bi, with_sub ? cfg_.lambda_sub : 0.0};
  o.kind = cfg_.loss;
  o.epochs = epochs;
  o.batch_size = cfg_.batch_size;
  o.seed = seed;
  return o;
}

SelfTrainState Pipeline::source_phase_a() const {
  SelfTrainState s;
  Rng rng(mix_seed(cfg_.seed, kInitStream));
  s.params = ModelParams::init(cfg_.feat_dim, cfg_.hidden_dim, rng, cfg_.hidden_bias_init);
  s.trace = train_epochs(s.params, source_pool(s, false), nullptr,
                         train_options(cfg_.source_epochs, mix_seed(cfg_.seed, kPhaseAStream), false));
  return s;
}

void Pipeline::discover(SelfTrainState& s) const {
  std::vector<Tensor> features;
  std::vector<LabelMask> masks;
  for (const auto& smp : data_.source) {
    features.push_back(forward(s.params, smp.grid).features);
    masks.push_back(smp.biclass);
  }
  ClusterParams cp{cfg_.eps, cfg_.min_pts, cfg_.downsample};
  auto r = discover_subcategories(features, masks, cp);
  s.subcat = std::move(r.model);
  s.source_y_sub = std::move(r.y_sub);
  Rng rng(mix_seed(cfg_.seed, kSubHeadStream));
  s.params.add_sub_head(s.subcat->k(), rng);
}

void Pipeline::source_phase_b(SelfTrainState& s, const AblationMode& mode) const {
  if (mode.sc_k() && !s.subcat) throw StateError("subcategory loss requested before discovery");
  auto trace = train_epochs(s.params, source_pool(s, mode.sc_k()), nullptr,
                            train_options(cfg_.refine_epochs, mix_seed(cfg_.seed, kPhaseBStream), mode.sc_k()));
  const int base = static_cast<int>(s.trace.size());
  for (auto& t : trace) {
    t.epoch += base;
    s.trace.push_back(t);
  }
}

SelfTrainState Pipeline::train_source(const AblationMode& mode) const {
  auto s = source_phase_a();
  if (mode.sc_k()) discover(s);
  source_phase_b(s, mode);
  return s;
}

PseudoLabels Pipeline::predict_pseudo(const SelfTrainState& s, const AblationMode& mode, double rho) const {
  if (mode.st_k() && !s.params.has_sub_head()) throw StateError("subcategory pseudo labels need a subcategory head");
  PseudoLabels out;
  std::vector<PredictionMap> p_bi, p_sub;
  std::vector<LabelMask> truth;
  for (const auto& smp : data_.target) {
    auto f = forward(s.params, smp.grid, mode.st_k());
    p_bi.push_back(std::move(f.p_bi));
    if (mode.st_k()) p_sub.push_back(std::move(*f.p_sub));
    truth.push_back(smp.biclass);
  }
  out.theta_bi = compute_thresholds(p_bi, rho);
  for (const auto& p : p_bi)
    out.y_bi.push_back(mode.st_2() ? assign_pseudo_labels(p, out.theta_bi) : LabelMask(p.height, p.width, 2));
  const int k = s.params.sub_classes();
  if (mode.st_k()) {
    out.theta_sub = compute_thresholds(p_sub, rho);
    for (const auto& p : p_sub) out.y_sub.push_back(assign_pseudo_labels(p, *out.theta_sub));
  } else {
    for (const auto& p : p_bi) out.y_sub.emplace_back(p.height, p.width, std::max(k, 1));
  }
  const auto parents = parents_of(s);
  const auto error_of = [&](const PseudoLabels& pl) {
    return mode.st_2() ? pseudo_error(pl.y_bi, truth) : pseudo_error(pl.y_sub, truth, parents);
  };
  out.error_bi_unfiltered = error_of(out);
  if (mode.reg()) {
    std::vector<Tensor> dist;
    for (std::size_t m = 0; m < p_bi.size(); ++m) dist.push_back(coreg_distance(p_bi[m], p_sub[m], parents));
    auto cr = coreg_filter(out.y_bi, out.y_sub, dist, {cfg_.rho_reg, cfg_.coreg_per_image});
    out.y_bi = std::move(cr.y_bi);
    out.y_sub = std::move(cr.y_sub);
    cr.y_bi.clear();
    cr.y_sub.clear();
    out.coreg = std::move(cr);
  }
  out.error_bi = error_of(out);
  for (const auto& m : out.y_bi)
    for (auto v : m.labels) out.selected_bi += v != kIgnore;
  for (const auto& m : out.y_sub)
    for (auto v : m.labels) out.selected_sub += v != kIgnore;
  return out;
}

void Pipeline::run_round(SelfTrainState& s, const AblationMode& mode) const {
  const auto n = cfg_.rho_schedule.size();
  if (s.round < 0 || static_cast<std::size_t>(s.round) >= n)
    throw StateError("rho schedule exhausted after " + std::to_string(n) + " rounds");
  const double rho = cfg_.rho_schedule[s.round];
  const auto seed = mix_seed(cfg_.seed, kRoundStream, static_cast<std::uint64_t>(s.round));
  const auto opts = train_options(cfg_.epochs_per_round, seed, mode.sc_k());
  const auto src = source_pool(s, mode.sc_k());

  std::vector<EpochStats> trace;
  RoundReport row;
  if (mode.runs_rounds()) {
    s.pseudo = predict_pseudo(s, mode, rho);
    PixelPool tgt;
    for (std::size_t i = 0; i < data_.target.size(); ++i) {
      tgt.grids.push_back(&data_.target[i].grid);
      tgt.y_bi.push_back(&s.pseudo.y_bi[i]);
      if (mode.st_k()) tgt.y_sub.push_back(&s.pseudo.y_sub[i]);
    }
    trace = train_epochs(s.params, src, &tgt, opts);
    row.selected_bi = s.pseudo.selected_bi;
    row.selected_sub = s.pseudo.selected_sub;
    row.dropped = s.pseudo.coreg ? s.pseudo.coreg->dropped : 0;
    row.pseudo_err = s.pseudo.error_bi.rate();
  } else {
    trace = train_epochs(s.params, src, nullptr, opts);
  }
  const int base = static_cast<int>(s.trace.size());
  for (auto& t : trace) {
    t.epoch += base;
    s.trace.push_back(t);
  }
  ++s.round;

  const auto eval = evaluate(s);
  row.round = std::to_string(s.round);
  row.rho = rho;
  row.precision = eval.precision;
  row.recall = eval.recall;
  row.f_score = eval.f_score;
  row.entropy_text = eval.entropy_text;
  row.likelihood_text = eval.likelihood_text;
  row.extreme_mass_text = eval.extreme_mass_text;
  s.log.push_back(row);
}

PredictionMap diagnostic_map(const ForwardResult& f, const SubcategoryModel* subcat) {
  if (!subcat || !f.p_sub) return f.p_bi;
  return *f.p_sub;
}

PredictionMap text_score_map(const PredictionMap& diag, const SubcategoryModel* subcat) {
  if (!subcat) return diag;
  if (subcat->k() != diag.channels)
    throw ShapeError("text_score_map: channels do not match the subcategory model");
  PredictionMap m{diag.height, diag.width, 2, std::vector<float>(diag.pixels() * 2)};
  for (std::size_t i = 0; i < diag.pixels(); ++i) {
    const auto p = diag.at(i);
    float best = 0;
    for (int k = 0; k < subcat->k_text; ++k) best = std::max(best, p[k]);
    m.probs[2 * i] = 1.0f - best;
    m.probs[2 * i + 1] = best;
  }
  return m;
}

LabelMask detect(const PredictionMap& p_bi) {
  LabelMask y(p_bi.height, p_bi.width, 2, 0);
  for (std::size_t i = 0; i < p_bi.pixels(); ++i) {
    const auto p = p_bi.at(i);
    y.labels[i] = p[1] > p[0] ? 1 : 0;
  }
  return y;
}

RoundReport Pipeline::evaluate(const SelfTrainState& s) const {
  std::vector<LabelMask> pred, truth;
  std::vector<PredictionMap> diag;
  const bool sub = s.subcat && s.params.has_sub_head();
  for (const auto& smp : data_.target_eval) {
    const auto f = forward(s.params, smp.grid, sub);
    pred.push_back(detect(f.p_bi));
    truth.push_back(smp.biclass);
    diag.push_back(diagnostic_map(f, sub ? &*s.subcat : nullptr));
  }
  RoundReport r;
  r.round = std::to_string(s.round);
  const auto prf = dense_prf(pred, truth);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f_score = prf.f_score;
  r.entropy_text = mean_entropy(diag, truth, Scope::Text);
  r.likelihood_text = likelihood_metric(diag, truth, Scope::Text);
  Histogram h(cfg_.hist_bins);
  for (std::size_t m = 0; m < diag.size(); ++m) {
    const auto scores = text_score_map(diag[m], sub ? &*s.subcat : nullptr);
    for (std::size_t i = 0; i < scores.pixels(); ++i)
      if (truth[m].labels[i] == 1) h.add(scores.probs[2 * i + 1]);
  }
  r.extreme_mass_text = h.extreme_mass();
  return r;
}

void Pipeline::adapt(SelfTrainState& s, const AblationMode& mode, const RoundHook& on_round) const {
  if (mode.sc_k() && !s.params.has_sub_head()) throw StateError("mode needs a model with a subcategory head");
  if (mode.runs_rounds()) {
    while (static_cast<std::size_t>(s.round) < cfg_.rho_schedule.size()) {
      try {
        run_round(s, mode);
        if (on_round) on_round(s);
      } catch (const Error& e) {
        throw TrainingError("round " + std::to_string(s.round + 1) + ": " + e.what());
      }
    }
  }
  // Final row: detection metrics plus a diagnostic pseudo-label pass at the last rho.
  auto row = evaluate(s);
  row.round = "final";
  row.rho = cfg_.rho_schedule.back();
  const AblationMode probe(mode.sc_k(), true, mode.st_k(), mode.reg());
  const auto pl = predict_pseudo(s, probe, row.rho);
  row.selected_bi = pl.selected_bi;
  row.selected_sub = pl.selected_sub;
  row.dropped = pl.coreg ? pl.coreg->dropped : 0;
  row.pseudo_err = pl.error_bi.rate();
  s.log.push_back(row);
}

SelfTrainState Pipeline::run(const AblationMode& mode) const {
  auto s = train_source(mode);
  adapt(s, mode);
  return s;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<RoundReport>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "round,rho,selected_bi,selected_sub,dropped,pseudo_err,precision,recall,f_score,"
         "entropy_text,likelihood_text,extreme_mass_text\n";
  for (const auto& r : rows)
    out << r.round << ',' << format_double(r.rho) << ',' << r.selected_bi << ',' << r.selected_sub << ','
        << r.dropped << ',' << format_double(r.pseudo_err) << ',' << format_double(r.precision) << ','
        << format_double(r.recall) << ',' << format_double(r.f_score) << ',' << format_double(r.entropy_text)
        << ',' << format_double(r.likelihood_text) << ',' << format_double(r.extreme_mass_text) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace scast
