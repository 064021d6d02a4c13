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
#include "scast/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <utility>

#include "scast/errors.hpp"
#include "scast/micronet.hpp"

namespace scast {

Histogram::Histogram(int b) : bins(b) {
  if (b < 1) throw ShapeError("histogram needs at least one bin");
  edges.resize(static_cast<std::size_t>(b) + 1);
  for (int i = 0; i <= b; ++i) edges[i] = static_cast<double>(i) / b;
  counts.assign(static_cast<std::size_t>(b), 0);
}

void Histogram::add(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto i = static_cast<int>(v * bins);
  if (i >= bins) i = bins - 1;
  ++counts[i];
  ++total;
}

double Histogram::extreme_mass() const {
  if (total == 0) return 0.0;
  const auto ends = bins == 1 ? counts[0] : counts.front() + counts.back();
  return static_cast<double>(ends) / static_cast<double>(total);
}

Histogram score_histogram(std::span<const PredictionMap> maps, int channel, int bins) {
  Histogram h(bins);
  for (const auto& m : maps) {
    if (channel < 0 || channel >= m.channels)
      throw ShapeError("channel " + std::to_string(channel) + " outside [0, " + std::to_string(m.channels) + ")");
    for (std::size_t i = 0; i < m.pixels(); ++i) h.add(m.at(i)[channel]);
  }
  return h;
}

Histogram score_histogram(const PredictionMap& map, int channel, int bins) {
  return score_histogram(std::span<const PredictionMap>(&map, 1), channel, bins);
}

const char* to_string(Scope s) noexcept {
  switch (s) {
    case Scope::All: return "all";
    case Scope::Text: return "text";
    case Scope::Back: return "back";
  }
  return "?";
}

namespace {

bool in_scope(std::int32_t truth, Scope s) {
  switch (s) {
    case Scope::All: return truth != kIgnore;
    case Scope::Text: return truth == 1;
    case Scope::Back: return truth == 0;
  }
  return false;
}

// Sums f(pixel) over scoped pixels; returns {sum, count}.
template <class F>
std::pair<double, std::uint64_t> scoped_sum(std::span<const PredictionMap> maps,
                                            std::span<const LabelMask> truth, Scope scope, F f) {
  if (!truth.empty() && truth.size() != maps.size()) throw ShapeError("truth masks do not match prediction maps");
  if (truth.empty() && scope != Scope::All) throw ShapeError("class scope needs truth masks");
  double sum = 0;
  std::uint64_t n = 0;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const auto& p = maps[m];
    if (!truth.empty() && truth[m].pixels() != p.pixels()) throw ShapeError("truth mask is not aligned");
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      if (!truth.empty() && !in_scope(truth[m].labels[i], scope)) continue;
      sum += f(p.at(i));
      ++n;
    }
  }
  if (n == 0) throw ShapeError(std::string("no pixels in scope '") + to_string(scope) + "'");
  return {sum, n};
}

std::span<const LabelMask> one(const LabelMask* m) {
  return m ? std::span<const LabelMask>(m, 1) : std::span<const LabelMask>();
}

}  // namespace

double mean_entropy(std::span<const PredictionMap> maps, std::span<const LabelMask> truth, Scope scope) {
  auto [sum, n] = scoped_sum(maps, truth, scope, [](std::span<const float> p) {
    double h = 0;
    for (float v : p) h -= v * std::log(std::max<double>(v, kProbClamp));
    return h;
  });
  return sum / static_cast<double>(n);
}

double mean_entropy(const PredictionMap& map, const LabelMask* truth, Scope scope) {
  return mean_entropy(std::span<const PredictionMap>(&map, 1), one(truth), scope);
}

double likelihood_metric(std::span<const PredictionMap> maps, std::span<const LabelMask> truth, Scope scope) {
  return scoped_sum(maps, truth, scope, [](std::span<const float> p) {
           return static_cast<double>(*std::max_element(p.begin(), p.end()));
         }).first;
}

double likelihood_metric(const PredictionMap& map, const LabelMask* truth, Scope scope) {
  return likelihood_metric(std::span<const PredictionMap>(&map, 1), one(truth), scope);
}

ErrorCount pseudo_error(std::span<const LabelMask> pseudo, std::span<const LabelMask> truth,
                        std::span<const std::int32_t> parent) {
  if (pseudo.size() != truth.size()) throw ShapeError("pseudo and truth mask counts differ");
  ErrorCount e;
  for (std::size_t m = 0; m < pseudo.size(); ++m) {
    if (pseudo[m].pixels() != truth[m].pixels()) throw ShapeError("pseudo mask is not aligned with truth");
    for (std::size_t i = 0; i < pseudo[m].pixels(); ++i) {
      std::int32_t y = pseudo[m].labels[i];
      const std::int32_t t = truth[m].labels[i];
      if (y == kIgnore || t == kIgnore) continue;
      if (!parent.empty()) {
        if (y < 0 || static_cast<std::size_t>(y) >= parent.size()) throw LabelError("subcategory label without parent");
        y = parent[y];
      }
      ++e.selected;
      if (y != t) ++e.wrong;
    }
  }
  return e;
}

double pseudo_error_rate(const LabelMask& pseudo, const LabelMask& truth, std::span<const std::int32_t> parent) {
  return pseudo_error(std::span<const LabelMask>(&pseudo, 1), std::span<const LabelMask>(&truth, 1), parent).rate();
}

PRF PRF::from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f_score = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

PRF dense_prf(std::span<const LabelMask> pred, std::span<const LabelMask> truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth mask counts differ");
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t m = 0; m < pred.size(); ++m) {
    if (pred[m].pixels() != truth[m].pixels()) throw ShapeError("prediction mask is not aligned with truth");
    for (std::size_t i = 0; i < pred[m].pixels(); ++i) {
      const auto t = truth[m].labels[i];
      if (t == kIgnore) continue;
      const bool p = pred[m].labels[i] == 1;
      if (p && t == 1) ++tp;
      else if (p) ++fp;
      else if (t == 1) ++fn;
    }
  }
  return PRF::from_counts(tp, fp, fn);
}

PRF dense_prf(const LabelMask& pred, const LabelMask& truth) {
  return dense_prf(std::span<const LabelMask>(&pred, 1), std::span<const LabelMask>(&truth, 1));
}

Components text_components(const LabelMask& mask) {
  const int H = mask.height, W = mask.width;
  Components c;
  c.id.assign(mask.pixels(), -1);
  std::deque<std::size_t> q;
  for (std::size_t s = 0; s < mask.pixels(); ++s) {
    if (mask.labels[s] != 1 || c.id[s] >= 0) continue;
    c.id[s] = c.count;
    q.push_back(s);
    while (!q.empty()) {
      const auto i = q.front();
      q.pop_front();
      const int r = static_cast<int>(i / W), col = static_cast<int>(i % W);
      const int nr[4] = {r - 1, r + 1, r, r};
      const int nc[4] = {col, col, col - 1, col + 1};
      for (int k = 0; k < 4; ++k) {
        if (nr[k] < 0 || nr[k] >= H || nc[k] < 0 || nc[k] >= W) continue;
        const auto j = static_cast<std::size_t>(nr[k]) * W + nc[k];
        if (mask.labels[j] == 1 && c.id[j] < 0) {
          c.id[j] = c.count;
          q.push_back(j);
        }
      }
    }
    ++c.count;
  }
  return c;
}

PRF region_prf_iou50(std::span<const LabelMask> pred, std::span<const LabelMask> truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth mask counts differ");
  std::uint64_t tp = 0, n_pred = 0, n_true = 0;
  for (std::size_t m = 0; m < pred.size(); ++m) {
    if (pred[m].height != truth[m].height || pred[m].width != truth[m].width)
      throw ShapeError("prediction mask is not aligned with truth");
    const auto cp = text_components(pred[m]);
    const auto ct = text_components(truth[m]);
    n_pred += cp.count;
    n_true += ct.count;
    std::vector<std::uint64_t> area_p(cp.count, 0), area_t(ct.count, 0);
    std::map<std::pair<std::int32_t, std::int32_t>, std::uint64_t> inter;
    for (std::size_t i = 0; i < cp.id.size(); ++i) {
      if (cp.id[i] >= 0) ++area_p[cp.id[i]];
      if (ct.id[i] >= 0) ++area_t[ct.id[i]];
      if (cp.id[i] >= 0 && ct.id[i] >= 0) ++inter[{cp.id[i], ct.id[i]}];
    }
    struct Pair {
      std::uint64_t inter, uni;
      std::int32_t p, t;
    };
    std::vector<Pair> cands;
    for (const auto& [key, in] : inter) {
      const auto uni = area_p[key.first] + area_t[key.second] - in;
      if (2 * in >= uni) cands.push_back({in, uni, key.first, key.second});
    }
    // Descending IoU compared exactly as fractions.
    std::sort(cands.begin(), cands.end(), [](const Pair& a, const Pair& b) {
      const auto l = static_cast<unsigned __int128>(a.inter) * b.uni;
      const auto r = static_cast<unsigned __int128>(b.inter) * a.uni;
      if (l != r) return l > r;
      if (a.p != b.p) return a.p < b.p;
      return a.t < b.t;
    });
    std::vector<char> used_p(cp.count, 0), used_t(ct.count, 0);
    for (const auto& c : cands) {
      if (used_p[c.p] || used_t[c.t]) continue;
      used_p[c.p] = used_t[c.t] = 1;
      ++tp;
    }
  }
  return PRF::from_counts(tp, n_pred - tp, n_true - tp);
}

PRF region_prf_iou50(const LabelMask& pred, const LabelMask& truth) {
  return region_prf_iou50(std::span<const LabelMask>(&pred, 1), std::span<const LabelMask>(&truth, 1));
}

double clustering_ari(std::span<const LabelMask> pred, std::span<const LabelMask> truth,
                      std::span<const LabelMask> scope) {
  if (pred.size() != truth.size() || (!scope.empty() && scope.size() != pred.size()))
    throw ShapeError("mask counts differ");
  std::map<std::pair<std::int32_t, std::int32_t>, double> table;
  std::map<std::int32_t, double> rows, cols;
  double n = 0;
  for (std::size_t m = 0; m < pred.size(); ++m) {
    if (pred[m].pixels() != truth[m].pixels() || (!scope.empty() && scope[m].pixels() != pred[m].pixels()))
      throw ShapeError("masks are not aligned");
    for (std::size_t i = 0; i < pred[m].pixels(); ++i) {
      const auto a = pred[m].labels[i], b = truth[m].labels[i];
      if (a == kIgnore || b == kIgnore) continue;
      if (!scope.empty() && scope[m].labels[i] == kIgnore) continue;
      table[{a, b}] += 1;
      rows[a] += 1;
      cols[b] += 1;
      n += 1;
    }
  }
  if (n < 2) throw ShapeError("adjusted Rand index needs at least two scoped pixels");
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : table) index += c2(v);
  for (const auto& [k, v] : rows) sa += c2(v);
  for (const auto& [k, v] : cols) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

double clustering_ari(const LabelMask& pred, const LabelMask& truth, const LabelMask* scope) {
  return clustering_ari(std::span<const LabelMask>(&pred, 1), std::span<const LabelMask>(&truth, 1), one(scope));
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (int i = 0; i < h.bins; ++i)
    out << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  auto out = open_out(path);
  out << "metric,scope,value\n";
  for (const auto& r : rows) out << r.metric << ',' << r.scope << ',' << format_double(r.value) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace scast
