// Copyright 2026 The intnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "intnet/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace intnet {

std::size_t elem_size(ElemKind kind) {
  switch (kind) {
    case ElemKind::kF32:
    case ElemKind::kI32:
      return 4;
    case ElemKind::kI8:
    case ElemKind::kU8:
      return 1;
  }
  throw invalid_argument("unknown element kind");
}

const char* to_string(ElemKind kind) {
  switch (kind) {
    case ElemKind::kF32: return "f32";
    case ElemKind::kI8: return "i8";
    case ElemKind::kI32: return "i32";
    case ElemKind::kU8: return "u8";
  }
  return "?";
}

std::string shape_string(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> inputs) {
  if (inputs.empty()) throw shape_error("concat of zero tensors");
  const Shape& first = inputs[0]->shape();
  if (first.size() != 4) throw shape_error("concat expects NCHW tensors");
  std::int64_t channels = 0;
  for (const auto* t : inputs) {
    const Shape& s = t->shape();
    if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3])
      throw shape_error("concat input " + shape_string(s) + " does not match " +
                        shape_string(first));
    channels += s[1];
  }
  Tensor<T> out({first[0], channels, first[2], first[3]});
  const std::int64_t plane = first[2] * first[3];
  auto dst = out.data();
  std::size_t pos = 0;
  for (std::int64_t n = 0; n < first[0]; ++n) {
    for (const auto* t : inputs) {
      const std::size_t chunk = static_cast<std::size_t>(t->dim(1) * plane);
      auto src = t->data().subspan(static_cast<std::size_t>(n) * chunk, chunk);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += chunk;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& t, std::span<const std::int64_t> sizes) {
  if (t.rank() != 4) throw shape_error("split expects an NCHW tensor");
  std::int64_t total = 0;
  for (auto s : sizes) total += s;
  if (total != t.dim(1)) throw shape_error("split sizes do not sum to channel count");
  const std::int64_t plane = t.dim(2) * t.dim(3);
  std::vector<Tensor<T>> parts;
  for (auto s : sizes) parts.emplace_back(Shape{t.dim(0), s, t.dim(2), t.dim(3)});
  auto src = t.data();
  std::size_t pos = 0;
  for (std::int64_t n = 0; n < t.dim(0); ++n) {
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t chunk = static_cast<std::size_t>(sizes[k] * plane);
      auto dst = parts[k].data().subspan(static_cast<std::size_t>(n) * chunk, chunk);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(pos), chunk, dst.begin());
      pos += chunk;
    }
  }
  return parts;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, std::int64_t n) {
  if (t.rank() != 4 || n < 0 || n >= t.dim(0)) throw shape_error("batch index out of range");
  const std::size_t chunk = t.size() / static_cast<std::size_t>(t.dim(0));
  auto src = t.data().subspan(static_cast<std::size_t>(n) * chunk, chunk);
  return Tensor<T>({1, t.dim(1), t.dim(2), t.dim(3)}, std::vector<T>(src.begin(), src.end()));
}

template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
  if (items.empty()) throw shape_error("stack of zero tensors");
  auto chw = [](const Shape& s) -> Shape {
    if (s.size() == 3) return s;
    if (s.size() == 4) return {s[0] * s[1], s[2], s[3]};
    throw shape_error("stack expects CHW or NCHW tensors, got " + shape_string(s));
  };
  // NCHW items with N > 1 contribute N images each.
  std::int64_t images = 0;
  Shape image_shape;
  for (const auto& t : items) {
    Shape s = t.shape();
    const std::int64_t n = s.size() == 4 ? s[0] : 1;
    Shape one = s.size() == 4 ? Shape{s[1], s[2], s[3]} : chw(s);
    if (image_shape.empty()) image_shape = one;
    if (one != image_shape)
      throw shape_error("stack: image " + shape_string(one) + " differs from " +
                        shape_string(image_shape));
    images += n;
  }
  std::vector<T> elems;
  elems.reserve(static_cast<std::size_t>(images * volume(image_shape)));
  for (const auto& t : items) elems.insert(elems.end(), t.data().begin(), t.data().end());
  return Tensor<T>({images, image_shape[0], image_shape[1], image_shape[2]}, std::move(elems));
}

namespace {

void put_le(std::ostream& os, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_le(std::istream& is, int bytes, std::size_t& offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw ParseError(offset, "truncated tensor blob");
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
    ++offset;
  }
  return v;
}

}  // namespace

std::size_t blob_header_size(std::size_t rank) { return 2 + 4 * rank; }

void write_blob(std::ostream& os, ElemKind kind, const Shape& shape, const void* data) {
  if (shape.size() > 255) throw invalid_argument("tensor rank exceeds 255");
  put_le(os, static_cast<std::uint32_t>(kind), 1);
  put_le(os, static_cast<std::uint32_t>(shape.size()), 1);
  for (auto d : shape) put_le(os, static_cast<std::uint32_t>(d), 4);
  const std::size_t width = elem_size(kind);
  const std::size_t count = static_cast<std::size_t>(volume(shape));
  const auto* bytes = static_cast<const unsigned char*>(data);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(count * width));
  } else {
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t b = width; b-- > 0;) os.put(static_cast<char>(bytes[i * width + b]));
  }
  if (!os) throw io_error("failed writing tensor blob");
}

ElemKind peek_blob_kind(std::istream& is) {
  const int c = is.peek();
  if (c == std::char_traits<char>::eof()) throw ParseError(0, "empty tensor blob");
  if (c > 3) throw ParseError(0, "unknown element kind tag " + std::to_string(c));
  return static_cast<ElemKind>(c);
}

template <typename T>
Tensor<T> read_blob(std::istream& is, std::size_t& offset) {
  const std::size_t start = offset;
  const auto tag = get_le(is, 1, offset);
  if (tag != static_cast<std::uint32_t>(Tensor<T>::kind))
    throw ParseError(start, std::string("expected ") + to_string(Tensor<T>::kind) +
                                " tensor, found kind tag " + std::to_string(tag));
  const auto rank = get_le(is, 1, offset);
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_le(is, 4, offset);
    if (d == 0) throw ParseError(offset - 4, "zero dimension in tensor blob");
  }
  std::vector<T> elems(static_cast<std::size_t>(volume(shape)));
  const std::size_t bytes = elems.size() * sizeof(T);
  is.read(reinterpret_cast<char*>(elems.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(is.gcount()) != bytes)
    throw ParseError(offset + static_cast<std::size_t>(is.gcount()), "truncated tensor payload");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& e : elems) {
      auto* p = reinterpret_cast<unsigned char*>(&e);
      std::reverse(p, p + sizeof(T));
    }
  }
  offset += bytes;
  return Tensor<T>(std::move(shape), std::move(elems));
}

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open '" + path + "' for writing");
  write_blob(os, t);
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "'");
  std::size_t offset = 0;
  auto t = read_blob<T>(is, offset);
  if (is.peek() != std::char_traits<char>::eof())
    throw ParseError(offset, "trailing bytes after tensor blob in '" + path + "'");
  return t;
}

ElemKind tensor_file_kind(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "'");
  return peek_blob_kind(is);
}

#define INTNET_INSTANTIATE(T)                                                             \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>* const>);              \
  template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&,                    \
                                                    std::span<const std::int64_t>);      \
  template Tensor<T> slice_batch<T>(const Tensor<T>&, std::int64_t);                      \
  template Tensor<T> stack_batch<T>(std::span<const Tensor<T>>);                          \
  template Tensor<T> read_blob<T>(std::istream&, std::size_t&);                           \
  template void save_tensor<T>(const std::string&, const Tensor<T>&);                     \
  template Tensor<T> load_tensor<T>(const std::string&);

INTNET_INSTANTIATE(float)
INTNET_INSTANTIATE(std::int8_t)
INTNET_INSTANTIATE(std::int32_t)
INTNET_INSTANTIATE(std::uint8_t)

#undef INTNET_INSTANTIATE

}  // namespace intnet
