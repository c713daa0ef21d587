// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "intnet/error.hpp"

namespace intnet {

// Element kind tags as they appear in the binary tensor blob header.
enum class ElemKind : std::uint8_t { kF32 = 0, kI8 = 1, kI32 = 2, kU8 = 3 };

template <typename T>
struct elem_kind_of;
template <>
struct elem_kind_of<float> : std::integral_constant<ElemKind, ElemKind::kF32> {};
template <>
struct elem_kind_of<std::int8_t> : std::integral_constant<ElemKind, ElemKind::kI8> {};
template <>
struct elem_kind_of<std::int32_t> : std::integral_constant<ElemKind, ElemKind::kI32> {};
template <>
struct elem_kind_of<std::uint8_t> : std::integral_constant<ElemKind, ElemKind::kU8> {};

std::size_t elem_size(ElemKind kind);
const char* to_string(ElemKind kind);

using Shape = std::vector<std::int64_t>;

inline std::int64_t volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

// Dense row-major tensor. NCHW for activations, OIHW for kernels.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  static constexpr ElemKind kind = elem_kind_of<T>::value;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_shape(shape_);
    elems_.assign(static_cast<std::size_t>(volume(shape_)), fill);
  }
  Tensor(Shape shape, std::vector<T> elems) : shape_(std::move(shape)), elems_(std::move(elems)) {
    check_shape(shape_);
    if (volume(shape_) != static_cast<std::int64_t>(elems_.size()))
      throw shape_error("tensor " + shape_string(shape_) + " given " +
                        std::to_string(elems_.size()) + " elements");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return elems_.size(); }
  bool empty() const noexcept { return elems_.empty(); }

  std::span<T> data() noexcept { return elems_; }
  std::span<const T> data() const noexcept { return elems_; }
  T& operator[](std::size_t i) { return elems_[i]; }
  const T& operator[](std::size_t i) const { return elems_[i]; }

  // NCHW / OIHW element access.
  T& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    return elems_[offset4(a, b, c, d)];
  }
  const T& at(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
    return elems_[offset4(a, b, c, d)];
  }

  friend bool operator==(const Tensor& x, const Tensor& y) {
    return x.shape_ == y.shape_ && x.elems_ == y.elems_;
  }

 private:
  static void check_shape(const Shape& shape) {
    for (auto d : shape)
      if (d <= 0) throw shape_error("non-positive dimension in " + shape_string(shape));
  }
  std::size_t offset4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
    return static_cast<std::size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d);
  }

  Shape shape_;
  std::vector<T> elems_;
};

using TensorF = Tensor<float>;
using TensorI8 = Tensor<std::int8_t>;
using TensorI32 = Tensor<std::int32_t>;
using TensorU8 = Tensor<std::uint8_t>;

// Nearest integer with ties away from zero. This is the single rounding rule
// used by every quantization step.
inline std::int64_t round_half_away(double x) { return std::llround(x); }

inline std::int64_t saturate(std::int64_t x, std::int64_t lo, std::int64_t hi) {
  return std::clamp(x, lo, hi);
}

// Element-kind conversion, flat index preserving. Integer targets saturate.
template <typename To, typename From>
Tensor<To> convert(const Tensor<From>& src) {
  std::vector<To> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if constexpr (std::is_floating_point_v<To>) {
      out[i] = static_cast<To>(src[i]);
    } else if constexpr (std::is_floating_point_v<From>) {
      out[i] = static_cast<To>(saturate(round_half_away(src[i]), std::numeric_limits<To>::min(),
                                        std::numeric_limits<To>::max()));
    } else {
      out[i] = static_cast<To>(saturate(static_cast<std::int64_t>(src[i]),
                                        std::numeric_limits<To>::min(),
                                        std::numeric_limits<To>::max()));
    }
  }
  return Tensor<To>(src.shape(), std::move(out));
}

// Split along axis 1 (channels) / concatenate along axis 1.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> inputs);

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& t, std::span<const std::int64_t> sizes);

// One image (index n) of an NCHW tensor as a 1xCxHxW tensor.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, std::int64_t n);

// Stack 1xCxHxW or CxHxW tensors into NxCxHxW.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items);

// Binary tensor blob: kind tag (1 byte), rank (1 byte), dims (u32 LE each),
// then raw little-endian elements.
void write_blob(std::ostream& os, ElemKind kind, const Shape& shape, const void* data);

template <typename T>
void write_blob(std::ostream& os, const Tensor<T>& t) {
  write_blob(os, Tensor<T>::kind, t.shape(), t.data().data());
}

std::size_t blob_header_size(std::size_t rank);

// Reads one blob whose kind must equal T's; `offset` is advanced and used in
// parse errors.
template <typename T>
Tensor<T> read_blob(std::istream& is, std::size_t& offset);

ElemKind peek_blob_kind(std::istream& is);

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t);
template <typename T>
Tensor<T> load_tensor(const std::string& path);
ElemKind tensor_file_kind(const std::string& path);

}  // namespace intnet
