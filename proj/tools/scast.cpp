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

// scast: one binary, one subcommand per pipeline stage.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 usage or config error,
// 3 I/O or file-format error, 4 pipeline error (training, discovery, state).

#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "scast/config.hpp"
#include "scast/errors.hpp"
#include "scast/io.hpp"
#include "scast/metrics.hpp"
#include "scast/selftrain.hpp"
#include "scast/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace scast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitPipeline = 4;

struct UsageError : Error {
  using Error::Error;
};

struct Args {
  std::string config;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::string mode;
  int threads = 0;
  std::optional<double> rho;
  std::string channel = "text";
  std::string scope;
  std::optional<int> bins;
};

// Output goes to a sibling staging directory first and is renamed into place
// only when the stage succeeds, so a failed run leaves nothing behind.
class Staging {
 public:
  explicit Staging(const fs::path& out) : out_(out) {
    if (out.empty()) throw UsageError("--out is required");
    tmp_ = out;
    tmp_ += ".partial-" + std::to_string(::getpid());
    std::error_code ec;
    fs::remove_all(tmp_, ec);
    if (!fs::create_directories(tmp_, ec) && ec) throw IoError("cannot create " + tmp_.string());
  }
  ~Staging() {
    if (!done_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;

  const fs::path& dir() const noexcept { return tmp_; }

  void commit() {
    std::error_code ec;
    fs::remove_all(out_, ec);
    if (ec) throw IoError("cannot replace " + out_.string() + ": " + ec.message());
    if (out_.has_parent_path()) fs::create_directories(out_.parent_path(), ec);
    fs::rename(tmp_, out_, ec);
    if (ec) throw IoError("cannot move output into " + out_.string() + ": " + ec.message());
    done_ = true;
  }

 private:
  fs::path out_;
  fs::path tmp_;
  bool done_ = false;
};

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

std::string sample_name(std::size_t i, const char* what) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu_%s.scst", i, what);
  return buf;
}

void emit(const ordered_json& summary) { std::cout << summary.dump() << std::endl; }

RunConfig base_config(const Args& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

// Dataset and config for stages that consume data: a gen directory when
// --data is given (its echoed config, unless --config overrides), otherwise
// generated in memory from the config.
std::pair<RunConfig, Dataset> load_inputs(const Args& a) {
  if (a.data.empty()) {
    auto cfg = base_config(a);
    return {cfg, make_dataset(cfg)};
  }
  RunConfig echoed;
  auto data = read_dataset(a.data, &echoed);
  RunConfig cfg = a.config.empty() ? echoed : load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return {cfg, std::move(data)};
}

AblationMode mode_or(const Args& a, const char* fallback) {
  try {
    return AblationMode::parse(a.mode.empty() ? fallback : a.mode);
  } catch (const ConfigError&) {
    throw UsageError("unknown --mode '" + a.mode + "'");
  }
}

SelfTrainState state_from(const Checkpoint& ck) {
  SelfTrainState s;
  s.params = ck.params;
  s.subcat = ck.subcat;
  return s;
}

Checkpoint need_checkpoint(const Args& a) {
  if (a.checkpoint.empty()) throw UsageError("--checkpoint is required");
  return load_checkpoint(a.checkpoint);
}

void write_masks(const fs::path& dir, const std::vector<LabelMask>& masks, const char* what) {
  make_dir(dir);
  for (std::size_t i = 0; i < masks.size(); ++i) write_tensor(masks[i].to_tensor(), dir / sample_name(i, what));
}

ordered_json report_json(const RoundReport& r) {
  return {{"round", r.round},         {"rho", r.rho},
          {"selected_bi", r.selected_bi}, {"selected_sub", r.selected_sub},
          {"dropped", r.dropped},     {"pseudo_err", r.pseudo_err},
          {"precision", r.precision}, {"recall", r.recall},
          {"f_score", r.f_score},     {"entropy_text", r.entropy_text},
          {"likelihood_text", r.likelihood_text}, {"extreme_mass_text", r.extreme_mass_text}};
}

// ---- subcommands ---------------------------------------------------------

int cmd_gen(const Args& a) {
  if (a.config.empty()) throw UsageError("--config is required");
  if (a.out.empty()) throw UsageError("--out is required");
  const auto cfg = base_config(a);
  const auto data = make_dataset(cfg);
  Staging st(a.out);
  write_dataset(st.dir(), cfg, data);
  st.commit();
  emit({{"command", "gen"}, {"out", a.out}, {"seed", cfg.seed},
        {"source", data.source.size()}, {"target", data.target.size()},
        {"target_eval", data.target_eval.size()}});
  return kExitOk;
}

int cmd_train_src(const Args& a) {
  Staging st(a.out);
  auto [cfg, data] = load_inputs(a);
  const auto mode = mode_or(a, "baseline");
  Pipeline p(cfg, std::move(data));
  auto s = p.source_phase_a();
  save_checkpoint(st.dir() / "phase_a", s.params, nullptr);
  if (mode.sc_k()) {
    p.discover(s);
    write_masks(st.dir() / "source_sub", s.source_y_sub, "subcat");
  }
  p.source_phase_b(s, mode);
  save_checkpoint(st.dir() / "checkpoint", s.params, s.subcat ? &*s.subcat : nullptr);
  write_loss_trace_csv(st.dir() / "loss_trace.csv", s.trace);
  write_json(st.dir() / "config.json", config_to_json(cfg));
  st.commit();
  ordered_json j{{"command", "train-src"}, {"out", a.out}, {"mode", mode.name()}};
  j["epochs"] = s.trace.size();
  j["loss_bi"] = s.trace.empty() ? 0.0 : s.trace.back().loss_bi;
  j["loss_sub"] = s.trace.empty() ? 0.0 : s.trace.back().loss_sub;
  if (s.subcat) j["k"] = {{"text", s.subcat->k_text}, {"back", s.subcat->k_back}};
  emit(j);
  return kExitOk;
}

int cmd_discover(const Args& a) {
  Staging st(a.out);
  auto [cfg, data] = load_inputs(a);
  auto s = state_from(need_checkpoint(a));
  Pipeline p(cfg, std::move(data));
  if (s.params.has_sub_head()) throw StateError("checkpoint already has a subcategory head");
  p.discover(s);
  save_subcat(st.dir() / "subcat", *s.subcat);
  save_checkpoint(st.dir() / "checkpoint", s.params, &*s.subcat);
  write_masks(st.dir() / "source_sub", s.source_y_sub, "subcat");
  std::vector<LabelMask> truth;
  for (const auto& smp : p.data().source) truth.push_back(smp.true_subpop);
  const double ari = clustering_ari(s.source_y_sub, truth);
  st.commit();
  emit({{"command", "discover"}, {"out", a.out}, {"k_text", s.subcat->k_text},
        {"k_back", s.subcat->k_back}, {"ari", ari}});
  return kExitOk;
}

int cmd_pseudo(const Args& a) {
  if (!a.rho) throw UsageError("--rho is required");
  if (!(*a.rho > 0 && *a.rho <= 100)) throw UsageError("--rho must lie in (0, 100]");
  Staging st(a.out);
  auto [cfg, data] = load_inputs(a);
  const auto s = state_from(need_checkpoint(a));
  const auto mode = mode_or(a, s.params.has_sub_head() ? "full" : "st2");
  if (!mode.runs_rounds()) throw UsageError("--mode must enable pseudo labelling");
  Pipeline p(cfg, std::move(data));
  const auto pl = p.predict_pseudo(s, mode, *a.rho);
  write_masks(st.dir(), pl.y_bi, "ybi");
  if (mode.st_k()) write_masks(st.dir(), pl.y_sub, "ysub");
  if (s.params.has_sub_head() && s.subcat) {
    const auto parents = s.subcat->parents();
    for (std::size_t i = 0; i < p.data().target.size(); ++i) {
      const auto f = forward(s.params, p.data().target[i].grid, true);
      write_tensor(coreg_distance(f.p_bi, *f.p_sub, parents), st.dir() / sample_name(i, "dist"));
    }
  }
  ordered_json j{{"command", "pseudo"}, {"out", a.out}, {"mode", mode.name()}, {"rho", *a.rho},
                 {"theta_bi", pl.theta_bi.theta}};
  if (pl.theta_sub) j["theta_sub"] = pl.theta_sub->theta;
  if (pl.coreg) j["theta_reg"] = pl.coreg->theta_reg;
  j["selected_bi"] = pl.selected_bi;
  j["selected_sub"] = pl.selected_sub;
  j["dropped"] = pl.coreg ? pl.coreg->dropped : 0;
  j["err"] = pl.error_bi.rate();
  j["err_unfiltered"] = pl.error_bi_unfiltered.rate();
  write_json(st.dir() / "report.json", j);
  st.commit();
  emit(j);
  return kExitOk;
}

int cmd_selftrain(const Args& a) {
  Staging st(a.out);
  auto [cfg, data] = load_inputs(a);
  const auto mode = mode_or(a, "full");
  Pipeline p(cfg, std::move(data));
  spdlog::info("selftrain mode={} seed={}", mode.name(), cfg.seed);
  auto s = p.train_source(mode);
  save_checkpoint(st.dir() / "checkpoints" / "source", s.params, s.subcat ? &*s.subcat : nullptr);
  p.adapt(s, mode, [&](const SelfTrainState& r) {
    const auto tag = "round_" + std::to_string(r.round);
    save_checkpoint(st.dir() / "checkpoints" / tag, r.params, r.subcat ? &*r.subcat : nullptr);
    write_masks(st.dir() / "masks" / tag, r.pseudo.y_bi, "ybi");
    if (mode.st_k()) write_masks(st.dir() / "masks" / tag, r.pseudo.y_sub, "ysub");
    const auto& row = r.log.back();
    spdlog::info("round {} rho={} F={:.4f} err={:.4f}", row.round, row.rho, row.f_score, row.pseudo_err);
  });
  save_checkpoint(st.dir() / "checkpoint", s.params, s.subcat ? &*s.subcat : nullptr);
  write_report_csv(st.dir() / "report.csv", s.log);
  write_loss_trace_csv(st.dir() / "loss_trace.csv", s.trace);
  write_json(st.dir() / "config.json", config_to_json(cfg));
  st.commit();
  auto j = report_json(s.log.back());
  j = ordered_json{{"command", "selftrain"}, {"out", a.out}, {"mode", mode.name()},
                   {"rounds", s.round}, {"final", j}};
  emit(j);
  return kExitOk;
}

int cmd_eval(const Args& a) {
  Staging st(a.out);
  auto [cfg, data] = load_inputs(a);
  const auto s = state_from(need_checkpoint(a));
  const bool sub = s.params.has_sub_head() && s.subcat.has_value();
  std::vector<LabelMask> pred, truth;
  std::vector<PredictionMap> diag;
  for (const auto& smp : data.target_eval) {
    const auto f = forward(s.params, smp.grid, sub);
    pred.push_back(detect(f.p_bi));
    truth.push_back(smp.biclass);
    diag.push_back(diagnostic_map(f, sub ? &*s.subcat : nullptr));
  }
  write_masks(st.dir() / "pred", pred, "pred");
  const auto dense = dense_prf(pred, truth);
  const auto region = region_prf_iou50(pred, truth);
  std::vector<MetricRow> rows{
      {"dense_precision", "text", dense.precision}, {"dense_recall", "text", dense.recall},
      {"dense_f_score", "text", dense.f_score},     {"region_precision", "text", region.precision},
      {"region_recall", "text", region.recall},     {"region_f_score", "text", region.f_score}};
  for (auto sc : {Scope::All, Scope::Text, Scope::Back}) {
    rows.push_back({"entropy", to_string(sc), mean_entropy(diag, truth, sc)});
    rows.push_back({"likelihood", to_string(sc), likelihood_metric(diag, truth, sc)});
  }
  write_metrics_csv(st.dir() / "metrics.csv", rows);
  st.commit();
  emit({{"command", "eval"}, {"out", a.out}, {"precision", dense.precision}, {"recall", dense.recall},
        {"f_score", dense.f_score}, {"region_f_score", region.f_score},
        {"entropy_text", rows[8].value}, {"likelihood_text", rows[9].value}});
  return kExitOk;
}

// Score of a parent class: the bi-class channel, or the largest probability
// among that parent's subcategories for a K-way map.
double parent_score(std::span<const float> p, const SubcategoryModel* sub, int parent) {
  if (!sub) return p[parent];
  double best = 0;
  for (int k = 0; k < sub->k(); ++k)
    if (sub->parent(k) == parent) best = std::max(best, static_cast<double>(p[k]));
  return best;
}

int cmd_hist(const Args& a) {
  Staging st(a.out);
  auto [cfg, data] = load_inputs(a);
  const auto s = state_from(need_checkpoint(a));
  const bool has_sub = s.params.has_sub_head() && s.subcat.has_value();
  const SubcategoryModel* sub = has_sub ? &*s.subcat : nullptr;

  int parent = -1, raw = -1;
  if (a.channel == "text") parent = kParentText;
  else if (a.channel == "back") parent = kParentBack;
  else {
    try {
      std::size_t used = 0;
      raw = std::stoi(a.channel, &used);
      if (used != a.channel.size() || raw < 0) throw std::invalid_argument("channel");
    } catch (const std::exception&) {
      throw UsageError("--channel must be text, back or a channel index");
    }
  }
  std::string scope = a.scope;
  if (scope.empty()) scope = parent == kParentText ? "text" : parent == kParentBack ? "back" : "all";
  if (scope != "all" && scope != "text" && scope != "back") throw UsageError("--scope must be all, text or back");
  const int want = scope == "text" ? 1 : scope == "back" ? 0 : -1;

  Histogram h(a.bins.value_or(cfg.hist_bins));
  for (const auto& smp : data.target_eval) {
    const auto f = forward(s.params, smp.grid, has_sub);
    const auto m = diagnostic_map(f, sub);
    if (raw >= m.channels) throw UsageError("--channel index out of range for this checkpoint");
    for (std::size_t i = 0; i < m.pixels(); ++i) {
      if (want >= 0 && smp.biclass.labels[i] != want) continue;
      h.add(raw >= 0 ? m.at(i)[raw] : parent_score(m.at(i), sub, parent));
    }
  }
  write_histogram_csv(st.dir() / "histogram.csv", h);
  st.commit();
  emit({{"command", "hist"}, {"out", a.out}, {"channel", a.channel}, {"scope", scope},
        {"bins", h.bins}, {"pixels", h.total}, {"extreme_mass", h.extreme_mass()}});
  return kExitOk;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("scast");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SCAST_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else throw UsageError("SCAST_LOG must be error, info or debug");
}

int run(int argc, char** argv) {
  CLI::App app{"scast: subcategory-aware self-training on synthetic text/background worlds"};
  app.require_subcommand(1);
  Args a;

  auto common = [&a](CLI::App* c) {
    c->add_option("--config", a.config, "run config (JSON)");
    c->add_option("--out", a.out, "output directory")->required();
    c->add_option("--seed", a.seed, "override the config seed");
    c->add_option("--threads", a.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  };
  auto data_opt = [&a](CLI::App* c) { c->add_option("--data", a.data, "dataset directory written by gen"); };
  auto ckpt_opt = [&a](CLI::App* c) { c->add_option("--checkpoint", a.checkpoint, "checkpoint directory"); };
  auto mode_opt = [&a](CLI::App* c) {
    c->add_option("--mode", a.mode, "baseline|sck|st2|st2_sck|st2_sck_stk|full");
  };

  auto* gen = app.add_subcommand("gen", "generate source/target samples and manifest");
  common(gen);
  auto* train = app.add_subcommand("train-src", "source training (plus discovery for modes with SC_K)");
  common(train), data_opt(train), mode_opt(train);
  auto* disc = app.add_subcommand("discover", "subcategory discovery from a checkpoint");
  common(disc), data_opt(disc), ckpt_opt(disc);
  auto* pseudo = app.add_subcommand("pseudo", "pseudo labels for the target train set");
  common(pseudo), data_opt(pseudo), ckpt_opt(pseudo), mode_opt(pseudo);
  pseudo->add_option("--rho", a.rho, "selection portion in (0, 100]");
  auto* self = app.add_subcommand("selftrain", "source training, discovery and every round");
  common(self), data_opt(self), mode_opt(self);
  auto* eval = app.add_subcommand("eval", "detection metrics and diagnostics on target eval");
  common(eval), data_opt(eval), ckpt_opt(eval);
  auto* hist = app.add_subcommand("hist", "prediction-score histogram on target eval");
  common(hist), data_opt(hist), ckpt_opt(hist);
  hist->add_option("--channel", a.channel, "text, back or a raw channel index");
  hist->add_option("--scope", a.scope, "all|text|back (default: the channel's class)");
  hist->add_option("--bins", a.bins, "bin count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  setup_logging();
  if (a.threads > 0) omp_set_num_threads(a.threads);

  if (gen->parsed()) return cmd_gen(a);
  if (train->parsed()) return cmd_train_src(a);
  if (disc->parsed()) return cmd_discover(a);
  if (pseudo->parsed()) return cmd_pseudo(a);
  if (self->parsed()) return cmd_selftrain(a);
  if (eval->parsed()) return cmd_eval(a);
  return cmd_hist(a);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "scast: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "scast: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "scast: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "scast: bad input file: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "scast: " << e.what() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "scast: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
