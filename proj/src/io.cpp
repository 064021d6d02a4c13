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
#include "scast/io.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "scast/errors.hpp"
#include "scast/metrics.hpp"

namespace scast {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kCheckpointVersion = 1;
constexpr int kManifestVersion = 1;

Tensor to_f32(std::span<const double> v, std::vector<std::uint32_t> dims) {
  return Tensor::from_f32(std::move(dims), std::vector<float>(v.begin(), v.end()));
}

void load_block(const fs::path& path, std::span<double> dst, const std::vector<std::uint32_t>& dims) {
  const auto t = read_tensor(path);
  if (t.dims() != dims) throw ShapeError(path.string() + ": unexpected tensor shape");
  const auto src = t.f32();
  std::copy(src.begin(), src.end(), dst.begin());
}

struct Block {
  const char* name;
  std::size_t begin, end;
  std::vector<std::uint32_t> dims;
};

std::vector<Block> blocks(const ModelParams& p) {
  const auto in = static_cast<std::uint32_t>(p.in_dim()), h = static_cast<std::uint32_t>(p.hidden_dim()),
             k = static_cast<std::uint32_t>(p.sub_classes());
  std::vector<Block> b{{"w1", p.off_w1(), p.off_b1(), {in, h}},
                       {"b1", p.off_b1(), p.off_wbi(), {h}},
                       {"w_bi", p.off_wbi(), p.off_bbi(), {h, 2}},
                       {"b_bi", p.off_bbi(), p.off_wsub(), {2}}};
  if (k) {
    b.push_back({"w_sub", p.off_wsub(), p.off_bsub(), {h, k}});
    b.push_back({"b_sub", p.off_bsub(), p.size(), {k}});
  }
  return b;
}

template <class J>
auto field(const J& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) throw IoError(where.string() + ": missing key '" + key + "'");
  return j.at(key);
}

}  // namespace

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const fs::path& dir, const ModelParams& params, const SubcategoryModel* subcat) {
  fs::create_directories(dir);
  ordered_json idx;
  idx["format"] = "scast-checkpoint";
  idx["version"] = kCheckpointVersion;
  idx["in_dim"] = params.in_dim();
  idx["hidden_dim"] = params.hidden_dim();
  idx["sub_classes"] = params.sub_classes();
  idx["iteration"] = params.iteration;
  auto files = ordered_json::array();
  for (const auto& b : blocks(params)) {
    const std::string name = b.name;
    write_tensor(to_f32(params.values().subspan(b.begin, b.end - b.begin), b.dims), dir / (name + ".scst"));
    write_tensor(to_f32(params.momentum().subspan(b.begin, b.end - b.begin), b.dims), dir / ("m_" + name + ".scst"));
    files.push_back(name);
  }
  idx["tensors"] = files;
  idx["subcat"] = subcat != nullptr;
  write_json(dir / "index.json", idx);
  if (subcat) save_subcat(dir, *subcat);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto idx_path = dir / "index.json";
  const auto idx = read_json(idx_path);
  if (field(idx, "format", idx_path) != "scast-checkpoint") throw IoError(idx_path.string() + ": not a checkpoint index");
  if (field(idx, "version", idx_path) != kCheckpointVersion) throw IoError(idx_path.string() + ": unsupported version");
  Checkpoint c;
  c.params = ModelParams(field(idx, "in_dim", idx_path).get<int>(), field(idx, "hidden_dim", idx_path).get<int>());
  const int k = field(idx, "sub_classes", idx_path).get<int>();
  if (k) c.params.allocate_sub_head(k);
  c.params.iteration = field(idx, "iteration", idx_path).get<std::int64_t>();
  for (const auto& b : blocks(c.params)) {
    const std::string name = b.name;
    load_block(dir / (name + ".scst"), c.params.values().subspan(b.begin, b.end - b.begin), b.dims);
    load_block(dir / ("m_" + name + ".scst"), c.params.momentum().subspan(b.begin, b.end - b.begin), b.dims);
  }
  if (field(idx, "subcat", idx_path).get<bool>()) {
    c.subcat = load_subcat(dir);
    if (c.subcat->k() != k) throw IoError(dir.string() + ": subcategory count does not match the head");
  }
  return c;
}

void save_subcat(const fs::path& dir, const SubcategoryModel& model) {
  fs::create_directories(dir);
  ordered_json j;
  j["k"] = model.k();
  j["k_text"] = model.k_text;
  j["k_back"] = model.k_back;
  j["dim"] = model.dim;
  j["parents"] = model.parents();
  j["eps"] = model.params.eps;
  j["min_pts"] = model.params.min_pts;
  j["downsample"] = model.params.downsample;
  j["centroids"] = "centroids.scst";
  write_json(dir / "subcat.json", j);
  write_tensor(to_f32(model.centroids, {static_cast<std::uint32_t>(model.k()), static_cast<std::uint32_t>(model.dim)}),
               dir / "centroids.scst");
}

SubcategoryModel load_subcat(const fs::path& dir) {
  const auto path = dir / "subcat.json";
  const auto j = read_json(path);
  SubcategoryModel m;
  m.k_text = field(j, "k_text", path).get<int>();
  m.k_back = field(j, "k_back", path).get<int>();
  m.dim = field(j, "dim", path).get<int>();
  m.params.eps = field(j, "eps", path).get<double>();
  m.params.min_pts = field(j, "min_pts", path).get<int>();
  m.params.downsample = field(j, "downsample", path).get<int>();
  m.centroids.assign(static_cast<std::size_t>(m.k()) * m.dim, 0.0);
  load_block(dir / "centroids.scst", m.centroids,
             {static_cast<std::uint32_t>(m.k()), static_cast<std::uint32_t>(m.dim)});
  // F32 storage perturbs the unit norm; renormalise before validating.
  for (int s = 0; s < m.k(); ++s) {
    double n2 = 0;
    for (int d = 0; d < m.dim; ++d) n2 += m.centroids[s * m.dim + d] * m.centroids[s * m.dim + d];
    const double n = std::sqrt(n2);
    if (n > 0)
      for (int d = 0; d < m.dim; ++d) m.centroids[s * m.dim + d] /= n;
  }
  m.validate();
  return m;
}

void write_loss_trace_csv(const fs::path& path, std::span<const EpochStats> trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,loss_bi,loss_sub,lr\n";
  for (const auto& t : trace)
    out << t.epoch << ',' << format_double(t.loss_bi) << ',' << format_double(t.loss_sub) << ','
        << format_double(t.lr) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

struct Split {
  const char* name;
  const char* domain;
  const char* split;
  const std::vector<DomainSample>* samples;
};

std::string sample_id(const char* split, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return std::string(split) + "/" + buf;
}

}  // namespace

void write_dataset(const fs::path& dir, const RunConfig& cfg, const Dataset& data) {
  const Split splits[] = {{"source", "source", "train", &data.source},
                          {"target", "target", "train", &data.target},
                          {"target_eval", "target", "eval", &data.target_eval}};
  ordered_json m;
  m["format"] = "scast-manifest";
  m["version"] = kManifestVersion;
  m["config"] = ordered_json::parse(config_to_json(cfg).dump());
  auto records = ordered_json::array();
  for (const auto& sp : splits) {
    fs::create_directories(dir / sp.name);
    for (std::size_t i = 0; i < sp.samples->size(); ++i) {
      const auto& s = (*sp.samples)[i];
      const auto id = sample_id(sp.name, i);
      const std::string f = id + "_features.scst", b = id + "_biclass.scst", t = id + "_subpop.scst";
      write_tensor(s.grid.to_tensor(), dir / f);
      write_tensor(s.biclass.to_tensor(), dir / b);
      write_tensor(s.true_subpop.to_tensor(), dir / t);
      ordered_json r;
      r["id"] = id;
      r["domain"] = sp.domain;
      r["split"] = sp.split;
      r["features"] = f;
      r["biclass"] = b;
      r["subpop"] = t;
      records.push_back(r);
    }
  }
  m["samples"] = records;
  write_json(dir / "manifest.json", m);
}

Dataset read_dataset(const fs::path& dir, RunConfig* cfg_out) {
  const auto path = dir / "manifest.json";
  const auto m = read_json(path);
  if (field(m, "format", path) != "scast-manifest") throw IoError(path.string() + ": not a dataset manifest");
  if (field(m, "version", path) != kManifestVersion) throw IoError(path.string() + ": unsupported version");
  const auto cfg = config_from_json(field(m, "config", path));
  Dataset d;
  d.world = make_world(cfg);
  for (const auto& r : field(m, "samples", path)) {
    DomainSample s;
    s.grid = PixelGrid::from_tensor(read_tensor(dir / field(r, "features", path).get<std::string>()));
    s.biclass = LabelMask::from_tensor(read_tensor(dir / field(r, "biclass", path).get<std::string>()), 2);
    s.true_subpop = LabelMask::from_tensor(read_tensor(dir / field(r, "subpop", path).get<std::string>()),
                                           cfg.s_text + cfg.s_back);
    const auto domain = field(r, "domain", path).get<std::string>();
    const auto split = field(r, "split", path).get<std::string>();
    if (domain == "source") d.source.push_back(std::move(s));
    else if (split == "train") d.target.push_back(std::move(s));
    else d.target_eval.push_back(std::move(s));
  }
  if (cfg_out) *cfg_out = cfg;
  return d;
}

}  // namespace scast
