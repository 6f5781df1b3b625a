#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "l2p/error.hpp"

namespace l2p::nn {

// Vector storage with a fixed SIMD alignment. Eigen picks its peeling from the
// start address, so equal alignment keeps reductions bit-reproducible.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

// Dense C x H x W activation map. Batch size is always one.
template <typename T>
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T(0))
      : c(channels), h(height), w(width), data(static_cast<std::size_t>(channels) * height * width, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  T* channel(int ch) { return data.data() + plane() * ch; }
  const T* channel(int ch) const { return data.data() + plane() * ch; }
  T& at(int ch, int y, int x) { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  T at(int ch, int y, int x) const { return data[(static_cast<std::size_t>(ch) * h + y) * w + x]; }

  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
  std::string shape_str() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.h != b.h || a.w != b.w) {
    throw ShapeError("concat: spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor<T> out(a.c + b.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

// Splits a gradient w.r.t. concat(a, b) back into its two parts.
template <typename T>
void split_channels(const Tensor<T>& g, int first_channels, Tensor<T>& ga, Tensor<T>& gb) {
  ga = Tensor<T>(first_channels, g.h, g.w);
  gb = Tensor<T>(g.c - first_channels, g.h, g.w);
  const auto cut = static_cast<std::ptrdiff_t>(ga.size());
  std::copy(g.data.begin(), g.data.begin() + cut, ga.data.begin());
  std::copy(g.data.begin() + cut, g.data.end(), gb.data.begin());
}

}  // namespace l2p::nn
