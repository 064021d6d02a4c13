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
#include "scast/tensor.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>

#include "scast/errors.hpp"

namespace scast {

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::I32: return 4;
  }
  return 0;
}

std::string_view dtype_name(DType dtype) noexcept {
  switch (dtype) {
    case DType::F32: return "F32";
    case DType::U8: return "U8";
    case DType::I32: return "I32";
  }
  return "?";
}

namespace {

std::size_t product(const std::vector<std::uint32_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t b) { return a * b; });
}

}  // namespace

Tensor::Tensor(std::vector<std::uint32_t> dims, DType dtype) : dims_(std::move(dims)) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor dims must be >= 1");
  if (dims_.empty()) throw ShapeError("tensor dims must be non-empty");
  const std::size_t n = product(dims_);
  switch (dtype) {
    case DType::F32: data_ = std::vector<float>(n); break;
    case DType::U8: data_ = std::vector<std::uint8_t>(n); break;
    case DType::I32: data_ = std::vector<std::int32_t>(n); break;
  }
}

Tensor Tensor::from_f32(std::vector<std::uint32_t> dims, std::vector<float> values) {
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = std::move(values);
  t.validate();
  return t;
}

Tensor Tensor::from_u8(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values) {
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = std::move(values);
  t.validate();
  return t;
}

Tensor Tensor::from_i32(std::vector<std::uint32_t> dims, std::vector<std::int32_t> values) {
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = std::move(values);
  t.validate();
  return t;
}

std::size_t Tensor::size() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

void Tensor::validate() const {
  if (dims_.empty()) throw ShapeError("tensor dims must be non-empty");
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor dims must be >= 1");
  if (product(dims_) != size())
    throw ShapeError("payload length " + std::to_string(size()) +
                     " does not match product of dims " + std::to_string(product(dims_)));
}

namespace {

template <class T>
std::span<T> typed(auto& data, DType want, DType have) {
  if (want != have)
    throw ShapeError("tensor dtype is " + std::string(dtype_name(have)) + ", requested " +
                     std::string(dtype_name(want)));
  return std::span<T>(std::get<std::vector<std::remove_const_t<T>>>(data));
}

}  // namespace

std::span<float> Tensor::f32() { return typed<float>(data_, DType::F32, dtype()); }
std::span<const float> Tensor::f32() const {
  return typed<const float>(data_, DType::F32, dtype());
}
std::span<std::uint8_t> Tensor::u8() { return typed<std::uint8_t>(data_, DType::U8, dtype()); }
std::span<const std::uint8_t> Tensor::u8() const {
  return typed<const std::uint8_t>(data_, DType::U8, dtype());
}
std::span<std::int32_t> Tensor::i32() { return typed<std::int32_t>(data_, DType::I32, dtype()); }
std::span<const std::int32_t> Tensor::i32() const {
  return typed<const std::int32_t>(data_, DType::I32, dtype());
}

// ---------------------------------------------------------------------------
// SCST encoding

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::uint8_t kMagic[4] = {'S', 'C', 'S', 'T'};
constexpr std::size_t kFixedHeader = 8;

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.ndim() < 1 || t.ndim() > kScstMaxDims)
    throw ShapeError("SCST supports 1-4 dims, got " + std::to_string(t.ndim()));
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + 4 * t.ndim() + t.byte_size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kScstVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.ndim()));
  out.push_back(0);
  for (auto d : t.dims()) put_u32(out, d);
  switch (t.dtype()) {
    case DType::F32:
      for (float v : t.f32()) put_u32(out, std::bit_cast<std::uint32_t>(v));
      break;
    case DType::U8: {
      auto v = t.u8();
      out.insert(out.end(), v.begin(), v.end());
      break;
    }
    case DType::I32:
      for (std::int32_t v : t.i32()) put_u32(out, static_cast<std::uint32_t>(v));
      break;
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeader) throw TruncatedError("SCST header truncated");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw FormatError("bad SCST magic");
  if (bytes[4] != kScstVersion)
    throw FormatError("unsupported SCST version " + std::to_string(bytes[4]));
  const std::uint8_t code = bytes[5];
  if (code > static_cast<std::uint8_t>(DType::I32))
    throw DTypeError("unknown SCST dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[6];
  if (ndim < 1 || ndim > kScstMaxDims)
    throw FormatError("SCST ndim must be 1-4, got " + std::to_string(ndim));
  if (bytes[7] != 0) throw FormatError("SCST reserved byte must be zero");
  if (bytes.size() < kFixedHeader + 4 * ndim) throw TruncatedError("SCST dims truncated");

  std::vector<std::uint32_t> dims(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes.data() + kFixedHeader + 4 * i);
    if (dims[i] == 0) throw FormatError("SCST dim " + std::to_string(i) + " is zero");
    count *= dims[i];
  }
  const std::size_t offset = kFixedHeader + 4 * ndim;
  const std::size_t payload = count * dtype_size(dtype);
  if (bytes.size() - offset < payload)
    throw TruncatedError("SCST payload truncated: expected " + std::to_string(payload) +
                         " bytes, found " + std::to_string(bytes.size() - offset));
  if (bytes.size() - offset > payload) throw FormatError("SCST file has trailing bytes");

  const std::uint8_t* p = bytes.data() + offset;
  switch (dtype) {
    case DType::F32: {
      std::vector<float> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<float>(get_u32(p + 4 * i));
      return Tensor::from_f32(std::move(dims), std::move(v));
    }
    case DType::U8:
      return Tensor::from_u8(std::move(dims), std::vector<std::uint8_t>(p, p + count));
    case DType::I32: {
      std::vector<std::int32_t> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<std::int32_t>(get_u32(p + 4 * i));
      return Tensor::from_i32(std::move(dims), std::move(v));
    }
  }
  throw DTypeError("unreachable dtype");
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  try {
    return decode_tensor(bytes);
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const DTypeError& e) {
    throw DTypeError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Domain views

namespace {

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

}  // namespace

Tensor PixelGrid::to_tensor() const {
  return Tensor::from_f32({u32(height), u32(width), u32(feat_dim)}, features);
}

PixelGrid PixelGrid::from_tensor(const Tensor& t) {
  if (t.ndim() != 3 || t.dtype() != DType::F32)
    throw ShapeError("PixelGrid needs an F32 tensor [H, W, D]");
  PixelGrid g;
  g.height = static_cast<int>(t.dims()[0]);
  g.width = static_cast<int>(t.dims()[1]);
  g.feat_dim = static_cast<int>(t.dims()[2]);
  auto v = t.f32();
  for (float x : v)
    if (!std::isfinite(x)) throw ShapeError("PixelGrid features must be finite");
  g.features.assign(v.begin(), v.end());
  return g;
}

Tensor PredictionMap::to_tensor() const {
  return Tensor::from_f32({u32(height), u32(width), u32(channels)}, probs);
}

PredictionMap PredictionMap::from_tensor(const Tensor& t) {
  if (t.ndim() != 3 || t.dtype() != DType::F32 || t.dims()[2] < 2)
    throw ShapeError("PredictionMap needs an F32 tensor [H, W, C>=2]");
  PredictionMap p;
  p.height = static_cast<int>(t.dims()[0]);
  p.width = static_cast<int>(t.dims()[1]);
  p.channels = static_cast<int>(t.dims()[2]);
  auto v = t.f32();
  p.probs.assign(v.begin(), v.end());
  return p;
}

void LabelMask::validate() const {
  if (labels.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("label mask size does not match H x W");
  for (auto l : labels)
    if (l != kIgnore && (l < 0 || l >= num_classes))
      throw LabelError("label " + std::to_string(l) + " outside [0, " +
                       std::to_string(num_classes) + ")");
}

Tensor LabelMask::to_tensor() const { return Tensor::from_i32({u32(height), u32(width)}, labels); }

LabelMask LabelMask::from_tensor(const Tensor& t, int num_classes) {
  if (t.ndim() != 2 || t.dtype() != DType::I32)
    throw ShapeError("LabelMask needs an I32 tensor [H, W]");
  LabelMask m;
  m.height = static_cast<int>(t.dims()[0]);
  m.width = static_cast<int>(t.dims()[1]);
  m.num_classes = num_classes;
  auto v = t.i32();
  m.labels.assign(v.begin(), v.end());
  m.validate();
  return m;
}

}  // namespace scast
