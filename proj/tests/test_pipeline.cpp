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
#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "scast/errors.hpp"
#include "scast/io.hpp"
#include "scast/selftrain.hpp"
#include "test_util.hpp"

using namespace scast;

namespace {

// Desk-within-a-desk: small enough that a whole run takes well under a second.
RunConfig tiny() {
  RunConfig c;
  c.height = c.width = 16;
  c.n_train = 4;
  c.n_eval = 2;
  c.text_size_min = 4;
  c.text_size_max = 8;
  c.text_regions_min = 1;
  c.text_regions_max = 2;
  c.hidden_dim = 8;
  c.batch_size = 64;
  c.source_epochs = 3;
  c.refine_epochs = 2;
  c.epochs_per_round = 1;
  c.rho_schedule = {50, 100};
  c.eps = 0.05;
  c.min_pts = 2;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("ablation modes") {
  for (const char* name : kModeNames) CHECK(AblationMode::parse(name).name() == name);
  CHECK_THROWS_AS(AblationMode(false, true, true, false), ConfigError);  // st_k without sc_k
  CHECK_THROWS_AS(AblationMode(true, false, true, true), ConfigError);   // reg without st_2
  CHECK_THROWS_AS(AblationMode(true, true, false, true), ConfigError);   // reg without st_k
  CHECK_THROWS_AS(AblationMode::parse("everything"), ConfigError);
  const auto full = AblationMode::parse("full");
  CHECK((full.sc_k() && full.st_2() && full.st_k() && full.reg()));
  CHECK_FALSE(AblationMode::parse("baseline").runs_rounds());
  CHECK_FALSE(AblationMode::parse("sck").runs_rounds());
}

TEST_CASE("a full run logs one row per round plus the final row") {
  const Pipeline p(tiny());
  const auto s = p.run(AblationMode::parse("full"));
  REQUIRE(s.log.size() == 3);
  CHECK(s.log[0].round == "1");
  CHECK(s.log[1].round == "2");
  CHECK(s.log[2].round == "final");
  CHECK(s.log[0].rho == 50);
  CHECK(s.log[1].rho == 100);
  for (const auto& r : s.log) {
    CHECK(std::isfinite(r.f_score));
    CHECK(std::isfinite(r.entropy_text));
    CHECK(std::isfinite(r.likelihood_text));
    CHECK(r.pseudo_err >= 0);
    CHECK(r.pseudo_err <= 1);
    CHECK(r.selected_bi > 0);
  }
  CHECK(s.round == 2);
  CHECK_THROWS_AS(p.run_round(const_cast<SelfTrainState&>(s), AblationMode::parse("full")), StateError);
}

TEST_CASE("runs are deterministic") {
  const Pipeline p(tiny());
  const auto a = p.run(AblationMode::parse("full"));
  const auto b = p.run(AblationMode::parse("full"));
  CHECK(a.params == b.params);
  TempDir tmp;
  write_report_csv(tmp.path() / "a.csv", a.log);
  write_report_csv(tmp.path() / "b.csv", b.log);
  CHECK(slurp(tmp.path() / "a.csv") == slurp(tmp.path() / "b.csv"));
}

TEST_CASE("pseudo-label step leaves params alone; retraining leaves the masks alone") {
  const Pipeline p(tiny());
  const auto mode = AblationMode::parse("full");
  auto s = p.train_source(mode);
  const auto before = s.params;
  const auto pl = p.predict_pseudo(s, mode, 50);
  CHECK(s.params == before);
  p.run_round(s, mode);
  CHECK(s.pseudo.y_bi.size() == pl.y_bi.size());
  for (std::size_t i = 0; i < pl.y_bi.size(); ++i) {
    CHECK(s.pseudo.y_bi[i].labels == pl.y_bi[i].labels);
    CHECK(s.pseudo.y_sub[i].labels == pl.y_sub[i].labels);
  }
  CHECK_FALSE(s.params == before);
}

TEST_CASE("with retraining disabled the selected set grows along the schedule") {
  auto cfg = tiny();
  cfg.epochs_per_round = 0;
  cfg.rho_schedule = {20, 40, 60, 80, 100};
  const Pipeline p(cfg);
  const auto mode = AblationMode::parse("st2_sck_stk");
  auto s = p.train_source(mode);
  std::size_t prev_bi = 0, prev_sub = 0;
  for (int r = 0; r < 5; ++r) {
    p.run_round(s, mode);
    CHECK(s.log.back().selected_bi >= prev_bi);
    CHECK(s.log.back().selected_sub >= prev_sub);
    prev_bi = s.log.back().selected_bi;
    prev_sub = s.log.back().selected_sub;
  }
}

TEST_CASE("an all-off round only continues source training") {
  const Pipeline p(tiny());
  const auto mode = AblationMode::parse("baseline");
  auto s = p.train_source(mode);
  p.run_round(s, mode);
  CHECK(s.log.back().selected_bi == 0);
  CHECK(s.pseudo.y_bi.empty());
  CHECK_FALSE(s.params.has_sub_head());
}

TEST_CASE("baseline is the source stage of the bi-class modes") {
  const Pipeline p(tiny());
  const auto base = p.run(AblationMode::parse("baseline"));
  const auto st2_src = p.train_source(AblationMode::parse("st2"));
  CHECK(base.params == st2_src.params);
  REQUIRE(base.log.size() == 1);
  CHECK(base.log[0].round == "final");
}

TEST_CASE("checkpoint, subcategory model and dataset round trips") {
  const auto cfg = tiny();
  const Pipeline p(cfg);
  const auto s = p.train_source(AblationMode::parse("sck"));
  TempDir tmp;
  save_checkpoint(tmp.path() / "ck", s.params, &*s.subcat);
  const auto ck = load_checkpoint(tmp.path() / "ck");
  REQUIRE(ck.params.size() == s.params.size());
  CHECK(ck.params.iteration == s.params.iteration);
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    REQUIRE(ck.params.values()[i] == static_cast<double>(static_cast<float>(s.params.values()[i])));
    REQUIRE(ck.params.momentum()[i] == static_cast<double>(static_cast<float>(s.params.momentum()[i])));
  }
  REQUIRE(ck.subcat.has_value());
  CHECK(ck.subcat->k_text == s.subcat->k_text);
  CHECK(ck.subcat->k_back == s.subcat->k_back);
  for (std::size_t i = 0; i < s.subcat->centroids.size(); ++i)
    CHECK(ck.subcat->centroids[i] == doctest::Approx(s.subcat->centroids[i]).epsilon(1e-6));

  save_checkpoint(tmp.path() / "ck2", ck.params, &*ck.subcat);
  for (const auto& e : std::filesystem::directory_iterator(tmp.path() / "ck"))
    CHECK(slurp(e.path()) == slurp(tmp.path() / "ck2" / e.path().filename()));

  write_dataset(tmp.path() / "data", cfg, p.data());
  RunConfig echoed;
  const auto d = read_dataset(tmp.path() / "data", &echoed);
  CHECK(config_to_json(echoed) == config_to_json(cfg));
  REQUIRE(d.source.size() == p.data().source.size());
  REQUIRE(d.target_eval.size() == p.data().target_eval.size());
  CHECK(d.target[1].grid.features == p.data().target[1].grid.features);
  CHECK(d.source[0].true_subpop.labels == p.data().source[0].true_subpop.labels);
  const auto manifest = read_json(tmp.path() / "data" / "manifest.json");
  for (const auto& smp : manifest["samples"])
    for (const char* key : {"features", "biclass", "subpop"})
      CHECK_NOTHROW(read_tensor(tmp.path() / "data" / smp[key].get<std::string>()));

  std::filesystem::remove(tmp.path() / "ck" / "w1.scst");
  CHECK_THROWS_AS(load_checkpoint(tmp.path() / "ck"), IoError);
}
