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
#include "scast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scast/errors.hpp"
#include "scast/rng.hpp"

namespace scast {

const char* to_string(Domain d) noexcept { return d == Domain::Source ? "source" : "target"; }

namespace {

constexpr std::uint64_t kWorldStream = 0x574F524C44ull;
constexpr std::uint64_t kSourceStream = 0x534F555243ull;
constexpr std::uint64_t kTargetStream = 0x5441524754ull;

double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::vector<double> WorldSpec::mean(int subpop, Domain d) const {
  std::vector<double> m = means.at(static_cast<std::size_t>(subpop));
  if (d == Domain::Target)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += shift[i];
  return m;
}

void WorldSpec::validate() const {
  if (s_text < 1 || s_back < 1) throw GenerationError("need at least one text and one background subpopulation");
  if (noise_sigma <= 0) throw GenerationError("noise_sigma must be > 0");
  if (means.size() != static_cast<std::size_t>(subpops()))
    throw GenerationError("means count must equal s_text + s_back");
  if (shift.size() != static_cast<std::size_t>(feat_dim)) throw GenerationError("shift must have feat_dim entries");
  for (const auto& m : means)
    if (m.size() != static_cast<std::size_t>(feat_dim)) throw GenerationError("mean has wrong dimension");
  for (std::size_t a = 0; a < means.size(); ++a)
    for (std::size_t b = a + 1; b < means.size(); ++b)
      if (dist2(means[a], means[b]) == 0.0) throw GenerationError("subpopulation means must be distinct");
  if (height < 1 || width < 1 || align < 1) throw GenerationError("bad grid geometry");
}

WorldSpec make_world(const RunConfig& cfg) {
  WorldSpec w;
  w.height = cfg.height;
  w.width = cfg.width;
  w.feat_dim = cfg.feat_dim;
  w.s_text = cfg.s_text;
  w.s_back = cfg.s_back;
  w.noise_sigma = cfg.noise_sigma;
  w.text_regions_min = cfg.text_regions_min;
  w.text_regions_max = cfg.text_regions_max;
  w.text_size_min = cfg.text_size_min;
  w.text_size_max = cfg.text_size_max;
  w.align = cfg.align;
  w.seed = cfg.seed;

  Rng rng(mix_seed(cfg.seed, kWorldStream));
  const int n = w.subpops();
  const int dim = cfg.feat_dim;
  if (n <= dim) {
    // Scaled basis vectors: a regular simplex with edge length `separation`.
    const double scale = cfg.separation / std::sqrt(2.0);
    for (int s = 0; s < n; ++s) {
      std::vector<double> m(dim, 0.0);
      m[s] = scale;
      w.means.push_back(std::move(m));
    }
  } else {
    const double box = cfg.separation * std::cbrt(static_cast<double>(n));
    for (int attempt = 0; attempt < 100000 && static_cast<int>(w.means.size()) < n; ++attempt) {
      std::vector<double> m(dim);
      for (auto& v : m) v = rng.uniform(-box, box);
      bool ok = true;
      for (const auto& other : w.means)
        if (dist2(m, other) < cfg.separation * cfg.separation) ok = false;
      if (ok) w.means.push_back(std::move(m));
    }
    if (static_cast<int>(w.means.size()) < n)
      throw GenerationError("cannot place " + std::to_string(n) + " means at separation " +
                            std::to_string(cfg.separation));
  }

  const int ti = static_cast<int>(rng.below(static_cast<std::uint64_t>(w.s_text)));
  const int bi = w.s_text + static_cast<int>(rng.below(static_cast<std::uint64_t>(w.s_back)));
  w.shift.assign(dim, 0.0);
  double norm = std::sqrt(dist2(w.means[bi], w.means[ti]));
  for (int i = 0; i < dim; ++i) w.shift[i] = cfg.shift * (w.means[bi][i] - w.means[ti][i]) / norm;
  w.validate();
  return w;
}

namespace {

struct Rect {
  int r0, c0, h, w;
  bool overlaps_with_gap(const Rect& o, int gap) const {
    return r0 < o.r0 + o.h + gap && o.r0 < r0 + h + gap && c0 < o.c0 + o.w + gap &&
           o.c0 < c0 + w + gap;
  }
};

int aligned_pick(Rng& rng, int lo, int hi, int align) {
  // Uniform multiple of `align` in [lo, hi]; callers guarantee one exists.
  const int first = (lo + align - 1) / align;
  const int last = hi / align;
  return align * (first + static_cast<int>(rng.below(static_cast<std::uint64_t>(last - first + 1))));
}

}  // namespace

DomainSample generate_sample(const WorldSpec& spec, Domain domain, std::uint64_t index) {
  const int H = spec.height, W = spec.width, A = spec.align;
  const int size_lo = std::max(spec.text_size_min, A);
  const int size_hi = std::min({spec.text_size_max, H, W});
  if ((size_lo + A - 1) / A > size_hi / A)
    throw GenerationError("no aligned text size fits in [" + std::to_string(spec.text_size_min) +
                          ", " + std::to_string(spec.text_size_max) + "] within the grid");

  Rng rng(mix_seed(spec.seed, domain == Domain::Source ? kSourceStream : kTargetStream, index));
  std::vector<std::int32_t> subpop(static_cast<std::size_t>(H) * W);

  // Background: S_back contiguous stripes, boundaries on the alignment grid.
  const bool vertical = rng.below(2) == 0;
  const int extent = vertical ? W : H;
  const int slots = extent / A;
  if (slots < spec.s_back)
    throw GenerationError("grid too small for " + std::to_string(spec.s_back) + " background regions");
  std::vector<int> cut_slots(static_cast<std::size_t>(slots - 1));
  for (int i = 0; i < slots - 1; ++i) cut_slots[i] = i + 1;
  rng.shuffle(std::span<int>(cut_slots));
  std::vector<int> cuts(cut_slots.begin(), cut_slots.begin() + (spec.s_back - 1));
  std::sort(cuts.begin(), cuts.end());
  std::vector<int> order(static_cast<std::size_t>(spec.s_back));
  for (int i = 0; i < spec.s_back; ++i) order[i] = spec.s_text + i;
  rng.shuffle(std::span<int>(order));
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const int coord = (vertical ? c : r) / A;
      const int stripe = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), coord) - cuts.begin());
      subpop[static_cast<std::size_t>(r) * W + c] = order[stripe];
    }

  // Text: non-touching aligned rectangles, total fraction within [5%, 30%].
  std::vector<std::pair<Rect, int>> placed;
  bool ok = false;
  for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
    placed.clear();
    const int want = spec.text_regions_min +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.text_regions_max - spec.text_regions_min + 1)));
    for (int k = 0; k < want; ++k) {
      for (int tries = 0; tries < 50; ++tries) {
        Rect rect{0, 0, aligned_pick(rng, size_lo, size_hi, A), aligned_pick(rng, size_lo, size_hi, A)};
        rect.r0 = aligned_pick(rng, 0, H - rect.h, A);
        rect.c0 = aligned_pick(rng, 0, W - rect.w, A);
        bool clash = false;
        for (const auto& [other, _] : placed)
          if (rect.overlaps_with_gap(other, A)) clash = true;
        if (clash) continue;
        placed.emplace_back(rect, static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.s_text))));
        break;
      }
    }
    std::size_t area = 0;
    for (const auto& [rect, _] : placed) area += static_cast<std::size_t>(rect.h) * rect.w;
    const double frac = static_cast<double>(area) / (static_cast<double>(H) * W);
    ok = !placed.empty() && frac >= 0.05 && frac <= 0.30;
  }
  if (!ok) throw GenerationError("cannot place text regions covering 5-30% of the grid");
  for (const auto& [rect, sp] : placed)
    for (int r = rect.r0; r < rect.r0 + rect.h; ++r)
      for (int c = rect.c0; c < rect.c0 + rect.w; ++c) subpop[static_cast<std::size_t>(r) * W + c] = sp;

  DomainSample out;
  out.grid.height = H;
  out.grid.width = W;
  out.grid.feat_dim = spec.feat_dim;
  out.grid.features.resize(static_cast<std::size_t>(H) * W * spec.feat_dim);
  out.biclass = LabelMask(H, W, 2, 0);
  out.true_subpop = LabelMask(H, W, spec.subpops(), 0);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(spec.subpops()));
  for (int s = 0; s < spec.subpops(); ++s) means[s] = spec.mean(s, domain);
  for (std::size_t p = 0; p < subpop.size(); ++p) {
    const int s = subpop[p];
    out.true_subpop.labels[p] = s;
    out.biclass.labels[p] = spec.is_text(s) ? 1 : 0;
    float* f = out.grid.features.data() + p * spec.feat_dim;
    for (int d = 0; d < spec.feat_dim; ++d)
      f[d] = static_cast<float>(means[s][d] + spec.noise_sigma * rng.normal());
  }
  return out;
}

std::vector<DomainSample> generate_domain(const WorldSpec& spec, Domain domain, int n,
                                          std::uint64_t first_index) {
  spec.validate();
  std::vector<DomainSample> out(static_cast<std::size_t>(std::max(n, 0)));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) out[i] = generate_sample(spec, domain, first_index + static_cast<std::uint64_t>(i));
  return out;
}

std::array<double, 2> bayes_posterior(const WorldSpec& spec, Domain domain,
                                      std::span<const double> feature) {
  std::vector<double> priors(static_cast<std::size_t>(spec.subpops()), 1.0);
  return bayes_posterior(spec, domain, feature, priors);
}

std::array<double, 2> bayes_posterior(const WorldSpec& spec, Domain domain,
                                      std::span<const double> feature,
                                      std::span<const double> priors) {
  const double inv2s2 = 1.0 / (2.0 * spec.noise_sigma * spec.noise_sigma);
  std::vector<double> logp(static_cast<std::size_t>(spec.subpops()));
  double top = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < spec.subpops(); ++s) {
    const auto m = spec.mean(s, domain);
    logp[s] = priors[s] > 0 ? std::log(priors[s]) - dist2(feature, m) * inv2s2
                            : -std::numeric_limits<double>::infinity();
    top = std::max(top, logp[s]);
  }
  double text = 0, back = 0;
  for (int s = 0; s < spec.subpops(); ++s) (spec.is_text(s) ? text : back) += std::exp(logp[s] - top);
  const double z = text + back;
  return {back / z, text / z};
}

}  // namespace scast
