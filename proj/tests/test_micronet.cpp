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
#include <omp.h>

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "scast/errors.hpp"
#include "scast/kernels.hpp"
#include "scast/metrics.hpp"
#include "scast/micronet.hpp"
#include "scast/rng.hpp"

using namespace scast;

namespace {

PredictionMap map_of(int h, int w, int c, std::vector<float> probs) { return {h, w, c, std::move(probs)}; }

PixelGrid random_grid(Rng& rng, int h, int w, int d) {
  PixelGrid g{h, w, d, std::vector<float>(static_cast<std::size_t>(h) * w * d)};
  for (auto& x : g.features) x = static_cast<float>(rng.normal());
  return g;
}

std::vector<kernels::PixelRef> refs_of(const oracle::GradInstance& g) {
  std::vector<kernels::PixelRef> r;
  for (std::size_t i = 0; i < g.grid.pixels(); ++i) r.push_back({g.grid.pixel(i), g.y_bi.labels[i], g.y_sub.labels[i]});
  return r;
}

}  // namespace

TEST_CASE("forward examples") {
  ModelParams m(3, 4);
  PixelGrid g{2, 2, 3, std::vector<float>(12, 1.5f)};
  auto f = forward(m, g);
  for (float p : f.p_bi.probs) CHECK(p == doctest::Approx(0.5));

  m.b_bi()[0] = std::log(3.0);
  f = forward(m, g);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f.p_bi.at(i)[0] == doctest::Approx(0.75));
    CHECK(f.p_bi.at(i)[1] == doctest::Approx(0.25));
  }

  Rng rng(3);
  auto r = ModelParams::init(3, 4, rng);
  PixelGrid zero{2, 2, 3, std::vector<float>(12, 0.0f)};
  const auto fz = forward(r, zero);
  for (float v : fz.features.f32()) CHECK(v == 0.0f);

  PixelGrid wrong{2, 2, 5, std::vector<float>(20, 0.0f)};
  CHECK_THROWS_AS(forward(r, wrong), ShapeError);
  CHECK_THROWS_AS(forward(r, zero, true), ShapeError);
}

TEST_CASE("softmax outputs sum to one") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    auto m = ModelParams::init(4, 6, rng, rng.uniform(-2, 2));
    m.add_sub_head(5, rng);
    for (auto& v : m.values()) v *= 1 + 20 * rng.uniform();
    const auto g = random_grid(rng, 3, 5, 4);
    const auto f = forward(m, g, true);
    for (const auto* pm : {&f.p_bi, &*f.p_sub})
      for (std::size_t i = 0; i < pm->pixels(); ++i) {
        double s = 0;
        for (float p : pm->at(i)) s += p;
        REQUIRE(s == doctest::Approx(1.0).epsilon(1e-5));
      }
  }
}

TEST_CASE("loss examples") {
  LabelMask y(2, 2, 2, 0);
  y.labels = {1, 1, 0, 0};
  CHECK(loss_bi(map_of(2, 2, 2, std::vector<float>(8, 0.5f)), y, LossKind::DICE) == doctest::Approx(0.5));
  CHECK(loss_bi(map_of(2, 2, 2, {0, 1, 0, 1, 1, 0, 1, 0}), y, LossKind::DICE) == doctest::Approx(0.0));

  LabelMask one(1, 1, 2, 1);
  CHECK(loss_bi(map_of(1, 1, 2, {0.5f, 0.5f}), one, LossKind::BCE) == doctest::Approx(std::log(2.0)));

  LabelMask ys(1, 1, 3, 1);
  CHECK(loss_sub(map_of(1, 1, 3, {0.2f, 0.5f, 0.3f}), ys) == doctest::Approx(-std::log(0.5)));
  LabelMask ys0(1, 1, 3, 0);
  CHECK(loss_sub(map_of(1, 1, 3, {1, 0, 0}), ys0) <= 1.01e-7);

  LabelMask y4(1, 3, 4, kIgnore);
  y4.labels[1] = 2;
  CHECK(loss_sub(map_of(1, 3, 4, std::vector<float>(12, 0.25f)), y4) == doctest::Approx(std::log(4.0)));

  LabelMask all_ignore(1, 2, 2);
  CHECK_THROWS_AS(loss_bi(map_of(1, 2, 2, {0.5f, 0.5f, 0.5f, 0.5f}), all_ignore, LossKind::BCE), LossError);
  LabelMask too_big(1, 1, 3, 3);
  CHECK_THROWS_AS(loss_sub(map_of(1, 1, 3, {0.2f, 0.5f, 0.3f}), too_big), LabelError);
}

TEST_CASE("target loss is the weighted sum of its parts") {
  const auto p_bi = map_of(1, 2, 2, {0.3f, 0.7f, 0.6f, 0.4f});
  const auto p_sub = map_of(1, 2, 3, {0.2f, 0.5f, 0.3f, 0.1f, 0.1f, 0.8f});
  LabelMask y_bi(1, 2, 2, 1), y_sub(1, 2, 3, 2);
  const double lb = loss_bi(p_bi, y_bi, LossKind::BCE), ls = loss_sub(p_sub, y_sub);
  CHECK(loss_target(p_bi, p_sub, y_bi, y_sub, {1, 0}, LossKind::BCE) == doctest::Approx(lb));
  CHECK(loss_target(p_bi, p_sub, y_bi, y_sub, {1, 1}, LossKind::BCE) == doctest::Approx(lb + ls));
  CHECK(loss_target(p_bi, p_sub, y_bi, y_sub, {2, 0.5}, LossKind::BCE) == doctest::Approx(2 * lb + 0.5 * ls));
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(404);
  for (int t = 0; t < 10; ++t) {
    const auto inst = oracle::grad_instance(rng);
    CAPTURE(t);
    CHECK(oracle::max_grad_rel_error(inst, {1, 0}, LossKind::BCE) < 1e-4);
    CHECK(oracle::max_grad_rel_error(inst, {1, 0}, LossKind::DICE) < 1e-4);
    CHECK(oracle::max_grad_rel_error(inst, {0, 1}, LossKind::BCE) < 1e-4);
    CHECK(oracle::max_grad_rel_error(inst, {1, 0.7}, LossKind::BCE) < 1e-4);
  }
}

TEST_CASE("gradient vanishes at a balanced stationary point") {
  // Two identical pixels with opposite labels: equal logits minimise the loss.
  Rng rng(9);
  auto m = ModelParams::init(2, 3, rng, 1.0);
  for (auto& v : m.w_bi()) v = 0;
  m.b_bi()[0] = m.b_bi()[1] = 0.3;
  PixelGrid g{1, 2, 2, {0.4f, -1.2f, 0.4f, -1.2f}};
  LabelMask y(1, 2, 2);
  y.labels = {0, 1};
  for (auto kind : {LossKind::BCE}) {
    const auto grad = backward(m, g, {&y, nullptr}, {1, 0}, kind);
    for (double v : grad) CHECK(std::abs(v) < 1e-6);
  }
}

TEST_CASE("gradient is linear in the loss weights") {
  Rng rng(12);
  const auto inst = oracle::grad_instance(rng);
  const GridLabels labels{&inst.y_bi, &inst.y_sub};
  const auto g1 = backward(inst.params, inst.grid, labels, {1, 0}, LossKind::BCE);
  const auto g2 = backward(inst.params, inst.grid, labels, {2, 0}, LossKind::BCE);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2 * g1[i]));
}

TEST_CASE("without the subcategory term the objective is the bi-class baseline") {
  Rng rng(13);
  const auto inst = oracle::grad_instance(rng);
  ModelParams bare(inst.params.in_dim(), inst.params.hidden_dim());
  std::copy_n(inst.params.values().begin(), bare.size(), bare.values().begin());
  const auto with = backward(inst.params, inst.grid, {&inst.y_bi, &inst.y_sub}, {1, 0}, LossKind::BCE);
  const auto without = backward(bare, inst.grid, {&inst.y_bi, nullptr}, {1, 0}, LossKind::BCE);
  for (std::size_t i = 0; i < without.size(); ++i) CHECK(with[i] == without[i]);
  for (std::size_t i = without.size(); i < with.size(); ++i) CHECK(with[i] == 0.0);
  CHECK(objective(inst.params, inst.grid, {&inst.y_bi, &inst.y_sub}, {1, 0}, LossKind::BCE).total ==
        objective(bare, inst.grid, {&inst.y_bi, nullptr}, {1, 0}, LossKind::BCE).total);
}

TEST_CASE("poly learning rate and sgd step") {
  OptimConfig c;
  c.max_iter = 100;
  CHECK(poly_lr(c, 0) == doctest::Approx(1e-3));
  CHECK(poly_lr(c, 50) == doctest::Approx(1e-3 * std::pow(0.5, 0.9)));
  CHECK(poly_lr(c, 50) / c.lr0 == doctest::Approx(0.536).epsilon(1e-3));

  ModelParams m(1, 1);
  for (auto& v : m.values()) v = 1.0;
  std::vector<double> g(m.size(), 2.0);
  OptimConfig plain{0.1, 0.0, 0.0, 0.9, 10};
  sgd_step(m, g, plain);
  for (double v : m.values()) CHECK(v == doctest::Approx(0.8));
  CHECK(m.iteration == 1);

  ModelParams w(1, 1);
  for (auto& v : w.values()) v = 1.0;
  OptimConfig full{0.1, 0.9, 0.5, 0.9, 10};
  sgd_step(w, g, full);  // v = 2 + 0.5, theta = 1 - 0.25
  sgd_step(w, g, full);  // v = 0.9 * 2.5 + 2 + 0.5 * 0.75
  const double lr1 = 0.1 * std::pow(0.9, 0.9);
  for (double v : w.values()) CHECK(v == doctest::Approx(0.75 - lr1 * (2.25 + 2 + 0.375)));

  OptimConfig done{0.1, 0.9, 0, 0.9, 1};
  ModelParams z(1, 1);
  sgd_step(z, g, done);
  CHECK_THROWS_AS(sgd_step(z, g, done), StateError);
}

TEST_CASE("serial and OpenMP kernels agree") {
  Rng rng(21);
  for (int t = 0; t < 5; ++t) {
    const auto inst = oracle::grad_instance(rng, 16, 16, 4, 12, 5, 0.0);
    const auto refs = refs_of(inst);
    for (auto kind : {LossKind::BCE, LossKind::DICE}) {
      std::vector<double> gs(inst.params.size()), go(inst.params.size());
      const auto os = kernels::objective_serial(inst.params, refs, {1, 0.5}, kind, gs);
      const auto oo = kernels::objective_omp(inst.params, refs, {1, 0.5}, kind, go);
      CHECK(oo.bi == doctest::Approx(os.bi).epsilon(1e-12));
      CHECK(oo.sub == doctest::Approx(os.sub).epsilon(1e-12));
      CHECK(oo.n_bi == os.n_bi);
      for (std::size_t i = 0; i < gs.size(); ++i) REQUIRE(go[i] == doctest::Approx(gs[i]).epsilon(1e-10).scale(1e-12));
    }
    const auto n = inst.grid.pixels();
    const int dh = inst.params.hidden_dim(), k = inst.params.sub_classes();
    std::vector<float> hs(n * dh), ho(n * dh), bs(n * 2), bo(n * 2), ss(n * k), so(n * k);
    kernels::forward_serial(inst.params, inst.grid.features.data(), n, hs.data(), bs.data(), ss.data());
    kernels::forward_omp(inst.params, inst.grid.features.data(), n, ho.data(), bo.data(), so.data());
    CHECK(hs == ho);
    CHECK(bs == bo);
    CHECK(ss == so);
  }
  std::vector<double> pts(300 * 3);
  for (auto& v : pts) v = rng.uniform();
  std::vector<std::int32_t> cs(300), co(300);
  kernels::neighbor_counts_serial(pts, 3, 0.2, cs);
  kernels::neighbor_counts_omp(pts, 3, 0.2, co);
  CHECK(cs == co);
}

TEST_CASE("OpenMP objective does not depend on the thread count") {
  Rng rng(22);
  const auto inst = oracle::grad_instance(rng, 32, 32, 4, 12, 5, 0.0);
  const auto refs = refs_of(inst);
  std::vector<double> g1(inst.params.size()), g3(inst.params.size());
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto o1 = kernels::objective_omp(inst.params, refs, {1, 1}, LossKind::BCE, g1);
  omp_set_num_threads(3);
  const auto o3 = kernels::objective_omp(inst.params, refs, {1, 1}, LossKind::BCE, g3);
  omp_set_num_threads(saved);
  CHECK(o1.bi == o3.bi);
  CHECK(o1.sub == o3.sub);
  CHECK(g1 == g3);
}

TEST_CASE("training: zero epochs is the identity, runs are deterministic") {
  Rng rng(31);
  const auto g = random_grid(rng, 8, 8, 3);
  LabelMask y(8, 8, 2, 0);
  for (std::size_t i = 0; i < y.pixels(); ++i) y.labels[i] = g.features[i * 3] > 0;
  PixelPool pool{{&g}, {&y}, {}};
  auto m0 = ModelParams::init(3, 6, rng);
  TrainOptions opt;
  opt.optim.max_iter = 1000;
  opt.batch_size = 16;
  opt.seed = 4;
  auto m = m0;
  opt.epochs = 0;
  CHECK(train_epochs(m, pool, nullptr, opt).empty());
  CHECK(m == m0);

  opt.epochs = 3;
  auto a = m0, b = m0;
  const auto ta = train_epochs(a, pool, nullptr, opt);
  const auto tb = train_epochs(b, pool, nullptr, opt);
  CHECK(a == b);
  REQUIRE(ta.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) CHECK(ta[e].loss_bi == tb[e].loss_bi);
}

TEST_CASE("training separates a linearly separable toy set") {
  Rng rng(41);
  std::vector<PixelGrid> grids;
  std::vector<LabelMask> masks;
  for (int s = 0; s < 4; ++s) {
    PixelGrid g{16, 16, 2, std::vector<float>(16 * 16 * 2)};
    LabelMask y(16, 16, 2, 0);
    for (std::size_t i = 0; i < g.pixels(); ++i) {
      const int cls = static_cast<int>(rng.below(2));
      y.labels[i] = cls;
      g.features[2 * i] = static_cast<float>((cls ? 2.0 : -2.0) + 0.5 * rng.normal());
      g.features[2 * i + 1] = static_cast<float>(rng.normal());
    }
    grids.push_back(std::move(g));
    masks.push_back(std::move(y));
  }
  PixelPool pool;
  for (int s = 0; s < 4; ++s) pool.grids.push_back(&grids[s]), pool.y_bi.push_back(&masks[s]);
  auto m = ModelParams::init(2, 8, rng, 1.0);
  TrainOptions opt;
  opt.optim.lr0 = 1e-2;
  opt.optim.max_iter = 10 * steps_per_epoch(pool.pixels(), 64, false);
  opt.epochs = 10;
  opt.batch_size = 64;
  opt.weights = {1, 0};
  train_epochs(m, pool, nullptr, opt);
  std::vector<LabelMask> pred;
  for (const auto& g : grids) {
    const auto p = forward(m, g).p_bi;
    LabelMask d(16, 16, 2, 0);
    for (std::size_t i = 0; i < d.pixels(); ++i) d.labels[i] = p.at(i)[1] > p.at(i)[0];
    pred.push_back(d);
  }
  CHECK(dense_prf(pred, masks).f_score > 0.99);
}

TEST_CASE("full-batch descent on the convex head-only problem never raises the loss") {
  // Hidden layer frozen, so the bi-class head is logistic regression on
  // fixed features.
  Rng rng(51);
  const auto g = random_grid(rng, 6, 6, 3);
  LabelMask y(6, 6, 2, 0);
  for (std::size_t i = 0; i < y.pixels(); ++i) y.labels[i] = g.features[i * 3] + 0.3 * rng.normal() > 0;
  auto m = ModelParams::init(3, 5, rng, 0.5);
  OptimConfig c{0.05, 0.0, 0.0, 0.9, 1000000};
  double prev = objective(m, g, {&y, nullptr}, {1, 0}, LossKind::BCE).total;
  for (int it = 0; it < 200; ++it) {
    auto grad = backward(m, g, {&y, nullptr}, {1, 0}, LossKind::BCE);
    for (std::size_t i = 0; i < m.off_wbi(); ++i) grad[i] = 0;
    sgd_step(m, grad, c);
    const double now = objective(m, g, {&y, nullptr}, {1, 0}, LossKind::BCE).total;
    REQUIRE(now <= prev + 1e-15);
    prev = now;
  }
}
