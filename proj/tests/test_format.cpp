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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scast/config.hpp"
#include "scast/errors.hpp"
#include "scast/io.hpp"
#include "scast/rng.hpp"
#include "scast/tensor.hpp"
#include "test_util.hpp"

using namespace scast;

namespace {

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Tensor random_tensor(Rng& rng) {
  const auto ndim = 1 + rng.below(4);
  std::vector<std::uint32_t> dims;
  std::size_t n = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims.push_back(static_cast<std::uint32_t>(1 + rng.below(6)));
    n *= dims.back();
  }
  switch (rng.below(3)) {
    case 0: {
      std::vector<float> v(n);
      for (auto& x : v) x = static_cast<float>(rng.normal() * 1e3);
      return Tensor::from_f32(dims, v);
    }
    case 1: {
      std::vector<std::uint8_t> v(n);
      for (auto& x : v) x = static_cast<std::uint8_t>(rng.below(256));
      return Tensor::from_u8(dims, v);
    }
    default: {
      std::vector<std::int32_t> v(n);
      for (auto& x : v) x = static_cast<std::int32_t>(rng.next_u64());
      return Tensor::from_i32(dims, v);
    }
  }
}

}  // namespace

TEST_CASE("scst fixtures decode to known tensors and re-encode byte for byte") {
  const auto dir = fixture_dir();
  const auto scalar = read_tensor(dir / "f32_scalar.scst");
  CHECK(scalar == Tensor::from_f32({1}, {0.0f}));
  CHECK(file_bytes(dir / "f32_scalar.scst").size() == 16);

  const auto i32 = read_tensor(dir / "i32_2x3.scst");
  CHECK(i32 == Tensor::from_i32({2, 3}, {1, -2, 3, -4, 5, 2147483647}));
  const auto f32 = read_tensor(dir / "f32_2x2.scst");
  CHECK(f32 == Tensor::from_f32({2, 2}, {1.0f, -0.5f, 0.25f, 3.0f}));
  const auto u8 = read_tensor(dir / "u8_1x2x2.scst");
  CHECK(u8 == Tensor::from_u8({1, 2, 2}, {0, 1, 254, 255}));

  for (const char* name : {"f32_scalar.scst", "i32_2x3.scst", "f32_2x2.scst", "u8_1x2x2.scst"}) {
    CAPTURE(name);
    CHECK(encode_tensor(read_tensor(dir / name)) == file_bytes(dir / name));
  }
}

TEST_CASE("scst header layout for a 2x2 f32 tensor") {
  const auto b = encode_tensor(Tensor::from_f32({2, 2}, {0, 0, 0, 0}));
  REQUIRE(b.size() == 8 + 2 * 4 + 16);
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 2);
  CHECK(b[7] == 0);
  CHECK(b[8] == 2);
  CHECK(b[12] == 2);
}

TEST_CASE("scst round trip is the identity on random tensors") {
  Rng rng(20260901);
  TempDir tmp;
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_tensor(rng);
    REQUIRE(decode_tensor(encode_tensor(t)) == t);
    if (i % 100 == 0) {
      write_tensor(t, tmp.path() / "t.scst");
      REQUIRE(read_tensor(tmp.path() / "t.scst") == t);
    }
  }
}

TEST_CASE("scst decoding errors are distinct") {
  auto good = encode_tensor(Tensor::from_f32({3}, {1, 2, 3}));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(bad_magic), FormatError);

  auto short_payload = good;
  short_payload.resize(short_payload.size() - 1);
  CHECK_THROWS_AS(decode_tensor(short_payload), TruncatedError);

  auto bad_dtype = good;
  bad_dtype[5] = 7;
  CHECK_THROWS_AS(decode_tensor(bad_dtype), DTypeError);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_tensor(bad_version), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_tensor(trailing), FormatError);

  CHECK_THROWS_AS(decode_tensor(std::vector<std::uint8_t>{'S', 'C'}), TruncatedError);
  CHECK_THROWS_AS(read_tensor("/nonexistent/x.scst"), IoError);
}

TEST_CASE("label masks reject out-of-range labels") {
  LabelMask m(2, 2, 2, 0);
  m.labels[3] = 2;
  CHECK_THROWS_AS(m.validate(), LabelError);
  m.labels[3] = kIgnore;
  CHECK_NOTHROW(m.validate());
  CHECK(LabelMask::from_tensor(m.to_tensor(), 2).labels == m.labels);
}

TEST_CASE("config defaults") {
  const auto c = config_from_json(nlohmann::json::object());
  CHECK(c.eps == 0.01);
  CHECK(c.rho_reg == 10);
  CHECK(c.lambda_bi == 1);
  CHECK(c.lambda_sub == 1);
  CHECK(c.momentum == 0.9);
  CHECK(c.weight_decay == 5e-4);
  CHECK(c.lr0 == 1e-3);
  CHECK(c.poly_power == 0.9);
  CHECK(c.rho_schedule == std::vector<double>{20, 40, 60, 80, 100});
  CHECK(c.min_pts == 4);
  CHECK(c.downsample == 4);
  CHECK(c.height == 64);
  CHECK(c.feat_dim == 8);
  CHECK(c.s_text == 3);
  CHECK(c.s_back == 3);
  CHECK(c.noise_sigma == 0.5);
  CHECK(c.shift == 1.5);
  CHECK(c.n_train == 32);
  CHECK(c.n_eval == 16);
}

TEST_CASE("config parsing and validation") {
  CHECK(config_from_json(nlohmann::json{{"rho_reg", 10}}).rho_reg == 10);
  try {
    config_from_json(nlohmann::json{{"rho_schedule", {40, 20}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "rho_schedule");
  }
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"no_such_key", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"eps", "small"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"loss", "hinge"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"downsample", 5}}), ConfigError);

  RunConfig c;
  c.seed = 77;
  c.loss = LossKind::DICE;
  c.rho_schedule = {50, 100};
  const auto back = config_from_json(config_to_json(c));
  CHECK(back.seed == 77);
  CHECK(back.loss == LossKind::DICE);
  CHECK(back.rho_schedule == c.rho_schedule);
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("checked-in default config equals the built-in defaults") {
  const auto c = load_config(fixture_dir().parent_path().parent_path() / "configs" / "default.json");
  CHECK(config_to_json(c) == config_to_json(RunConfig{}));
}
