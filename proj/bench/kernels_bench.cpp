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
// Serial reference vs OpenMP kernels on desk-scale inputs. Run with
// OMP_NUM_THREADS set to compare thread counts; the serial numbers are the
// baseline either way.

#include <benchmark/benchmark.h>

#include <vector>

#include "scast/kernels.hpp"
#include "scast/micronet.hpp"
#include "scast/rng.hpp"

using namespace scast;

namespace {

constexpr int kIn = 8, kHidden = 16, kSub = 6;

struct Fixture {
  ModelParams params;
  std::vector<float> x;
  std::vector<kernels::PixelRef> batch;

  explicit Fixture(std::size_t n) {
    Rng rng(42);
    params = ModelParams::init(kIn, kHidden, rng, 1.0);
    params.add_sub_head(kSub, rng);
    x.resize(n * kIn);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < n; ++i)
      batch.push_back({x.data() + i * kIn, static_cast<std::int32_t>(rng.below(2)),
                       static_cast<std::int32_t>(rng.below(kSub))});
  }
};

template <auto Fn>
void objective(benchmark::State& st) {
  Fixture f(static_cast<std::size_t>(st.range(0)));
  std::vector<double> grad(f.params.size());
  for (auto _ : st) {
    auto o = Fn(f.params, f.batch, LossWeights{1, 1}, LossKind::BCE, grad);
    benchmark::DoNotOptimize(o);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void forward(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Fixture f(n);
  std::vector<float> hidden(n * kHidden), p_bi(n * 2), p_sub(n * kSub);
  for (auto _ : st) {
    Fn(f.params, f.x.data(), n, hidden.data(), p_bi.data(), p_sub.data());
    benchmark::ClobberMemory();
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void neighbors(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(7);
  std::vector<double> pts(n * kHidden);
  for (auto& v : pts) v = rng.normal();
  std::vector<std::int32_t> counts(n);
  for (auto _ : st) {
    Fn(pts, kHidden, 2.0, counts);
    benchmark::ClobberMemory();
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

// 256 is one SGD batch; 4096 is one 64x64 map.
BENCHMARK(objective<kernels::objective_serial>)->Name("objective/serial")->Arg(256)->Arg(4096);
BENCHMARK(objective<kernels::objective_omp>)->Name("objective/omp")->Arg(256)->Arg(4096);
BENCHMARK(forward<kernels::forward_serial>)->Name("forward/serial")->Arg(4096)->Arg(65536);
BENCHMARK(forward<kernels::forward_omp>)->Name("forward/omp")->Arg(4096)->Arg(65536);
// Discovery clusters 32 downsampled 16x16 maps, 8192 points.
BENCHMARK(neighbors<kernels::neighbor_counts_serial>)->Name("neighbor_counts/serial")->Arg(2048)->Arg(8192);
BENCHMARK(neighbors<kernels::neighbor_counts_omp>)->Name("neighbor_counts/omp")->Arg(2048)->Arg(8192);

BENCHMARK_MAIN();
