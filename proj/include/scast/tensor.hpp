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
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace scast {

enum class DType : std::uint8_t { F32 = 0, U8 = 1, I32 = 2 };

std::size_t dtype_size(DType dtype) noexcept;
std::string_view dtype_name(DType dtype) noexcept;

/// Dense row-major array. Invariants: dims non-empty, every dim >= 1, element
/// count equals the product of dims.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  Tensor(std::vector<std::uint32_t> dims, DType dtype);

  static Tensor from_f32(std::vector<std::uint32_t> dims, std::vector<float> values);
  static Tensor from_u8(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values);
  static Tensor from_i32(std::vector<std::uint32_t> dims, std::vector<std::int32_t> values);

  const std::vector<std::uint32_t>& dims() const noexcept { return dims_; }
  std::size_t ndim() const noexcept { return dims_.size(); }
  DType dtype() const noexcept { return static_cast<DType>(data_.index()); }
  std::size_t size() const noexcept;
  std::size_t byte_size() const noexcept { return size() * dtype_size(dtype()); }

  // Typed views; throw ShapeError on dtype mismatch.
  std::span<float> f32();
  std::span<const float> f32() const;
  std::span<std::uint8_t> u8();
  std::span<const std::uint8_t> u8() const;
  std::span<std::int32_t> i32();
  std::span<const std::int32_t> i32() const;

  bool operator==(const Tensor&) const = default;

 private:
  void validate() const;

  std::vector<std::uint32_t> dims_;
  // Alternative order matches the DType codes.
  std::variant<std::vector<float>, std::vector<std::uint8_t>, std::vector<std::int32_t>> data_;
};

// SCST on-disk format: "SCST", version 0x01, dtype code, ndim (1-4), 0x00,
// ndim little-endian u32 dims, little-endian row-major payload.
inline constexpr std::uint8_t kScstVersion = 1;
inline constexpr std::size_t kScstMaxDims = 4;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

inline constexpr std::int32_t kIgnore = -1;

/// H x W grid of per-pixel feature vectors.
struct PixelGrid {
  int height = 0;
  int width = 0;
  int feat_dim = 0;
  std::vector<float> features;  // [H, W, D]

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }
  const float* pixel(std::size_t i) const noexcept { return features.data() + i * feat_dim; }

  Tensor to_tensor() const;
  static PixelGrid from_tensor(const Tensor& t);
};

/// Per-pixel class distributions, [H, W, C] with C >= 2.
struct PredictionMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> probs;

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::span<const float> at(std::size_t i) const noexcept {
    return {probs.data() + i * channels, static_cast<std::size_t>(channels)};
  }

  Tensor to_tensor() const;
  static PredictionMap from_tensor(const Tensor& t);
};

/// Per-pixel integer labels in [0, num_classes) or kIgnore.
struct LabelMask {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<std::int32_t> labels;

  LabelMask() = default;
  LabelMask(int h, int w, int classes, std::int32_t fill = kIgnore)
      : height(h), width(w), num_classes(classes),
        labels(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixels() const noexcept { return labels.size(); }
  void validate() const;

  Tensor to_tensor() const;
  /// num_classes is not stored in SCST; it must be supplied.
  static LabelMask from_tensor(const Tensor& t, int num_classes);
};

}  // namespace scast
