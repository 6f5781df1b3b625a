#pragma once

// Layers with hand-written backward passes. Each layer caches what its
// backward needs during forward, so a layer instance handles one forward /
// backward pair at a time.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "l2p/nn/tensor.hpp"
#include "l2p/random.hpp"

namespace l2p::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

template <typename T>
struct Param {
  std::string name;
  std::vector<int> dims;
  Buffer<T> value;
  Buffer<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> d) : name(std::move(n)), dims(std::move(d)) {
    std::size_t count = 1;
    for (int x : dims) count *= static_cast<std::size_t>(x);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Geometry of a k x k convolution over an (h, w) input.
struct ConvGeometry {
  int k, stride, pad;
  int in_h, in_w, out_h, out_w;
};

inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// cols[(ci*k + ky)*k + kx][oy*out_w + ox] = x[ci][oy*s - p + ky][ox*s - p + kx], zero outside.
template <typename T>
void im2col(const T* x, int channels, const ConvGeometry& g, T* cols) {
  const int n = g.out_h * g.out_w;
  for (int ci = 0; ci < channels; ++ci) {
    const T* plane = x + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * n;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into x (x must be zeroed by the caller).
template <typename T>
void col2im(const T* cols, int channels, const ConvGeometry& g, T* x) {
  const int n = g.out_h * g.out_w;
  for (int ci = 0; ci < channels; ++ci) {
    T* plane = x + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * n;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          const T* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void init_normal(Param<T>& p, Rng& rng, double stddev) {
  for (auto& v : p.value) v = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int cin, int cout, int k, int stride, int pad)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
        weight_(name + ".weight", {cout, cin, k, k}), bias_(name + ".bias", {cout}) {}

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != cin_) throw ShapeError(weight_.name + ": expected " + std::to_string(cin_) + " input channels, got " + x.shape_str());
    geom_ = {k_, stride_, pad_, x.h, x.w, conv_out(x.h, k_, stride_, pad_), conv_out(x.w, k_, stride_, pad_)};
    if (geom_.out_h < 1 || geom_.out_w < 1) throw ShapeError(weight_.name + ": input " + x.shape_str() + " too small");
    const int kk = cin_ * k_ * k_;
    const int n = geom_.out_h * geom_.out_w;
    cols_.resize(static_cast<std::size_t>(kk) * n);
    im2col(x.data.data(), cin_, geom_, cols_.data());
    Tensor<T> y(cout_, geom_.out_h, geom_.out_w);
    MapRM<T> ym(y.data.data(), cout_, n);
    ym.noalias() = CMapRM<T>(weight_.value.data(), cout_, kk) * CMapRM<T>(cols_.data(), kk, n);
    for (int co = 0; co < cout_; ++co) ym.row(co).array() += bias_.value[co];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int kk = cin_ * k_ * k_;
    const int n = geom_.out_h * geom_.out_w;
    CMapRM<T> dym(dy.data.data(), cout_, n);
    CMapRM<T> cm(cols_.data(), kk, n);
    MapRM<T>(weight_.grad.data(), cout_, kk).noalias() += dym * cm.transpose();
    for (int co = 0; co < cout_; ++co) bias_.grad[co] += dym.row(co).sum();
    Buffer<T> dcols(static_cast<std::size_t>(kk) * n);
    MapRM<T>(dcols.data(), kk, n).noalias() = CMapRM<T>(weight_.value.data(), cout_, kk).transpose() * dym;
    Tensor<T> dx(cin_, geom_.in_h, geom_.in_w);
    col2im(dcols.data(), cin_, geom_, dx.data.data());
    return dx;
  }

  void init(Rng& rng) { init_normal(weight_, rng, 0.02); }
  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }

 private:
  int cin_ = 0, cout_ = 0, k_ = 4, stride_ = 1, pad_ = 0;
  Param<T> weight_, bias_;
  ConvGeometry geom_{};
  Buffer<T> cols_;
};

// Transposed convolution; weight layout [cin, cout, k, k].
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, int cin, int cout, int k, int stride, int pad)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
        weight_(name + ".weight", {cin, cout, k, k}), bias_(name + ".bias", {cout}) {}

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != cin_) throw ShapeError(weight_.name + ": expected " + std::to_string(cin_) + " input channels, got " + x.shape_str());
    const int out_h = (x.h - 1) * stride_ - 2 * pad_ + k_;
    const int out_w = (x.w - 1) * stride_ - 2 * pad_ + k_;
    // The adjoint convolution maps (cout, out_h, out_w) onto (x.h, x.w).
    geom_ = {k_, stride_, pad_, out_h, out_w, x.h, x.w};
    input_ = x;
    const int kk = cout_ * k_ * k_;
    const int n = x.h * x.w;
    Buffer<T> cols(static_cast<std::size_t>(kk) * n);
    MapRM<T>(cols.data(), kk, n).noalias() =
        CMapRM<T>(weight_.value.data(), cin_, kk).transpose() * CMapRM<T>(x.data.data(), cin_, n);
    Tensor<T> y(cout_, out_h, out_w);
    col2im(cols.data(), cout_, geom_, y.data.data());
    for (int co = 0; co < cout_; ++co) {
      T* p = y.channel(co);
      for (std::size_t i = 0; i < y.plane(); ++i) p[i] += bias_.value[co];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int kk = cout_ * k_ * k_;
    const int n = input_.h * input_.w;
    Buffer<T> dcols(static_cast<std::size_t>(kk) * n);
    im2col(dy.data.data(), cout_, geom_, dcols.data());
    CMapRM<T> dcm(dcols.data(), kk, n);
    CMapRM<T> xm(input_.data.data(), cin_, n);
    MapRM<T>(weight_.grad.data(), cin_, kk).noalias() += xm * dcm.transpose();
    for (int co = 0; co < cout_; ++co) {
      const T* p = dy.channel(co);
      T s = 0;
      for (std::size_t i = 0; i < dy.plane(); ++i) s += p[i];
      bias_.grad[co] += s;
    }
    Tensor<T> dx(cin_, input_.h, input_.w);
    MapRM<T>(dx.data.data(), cin_, n).noalias() = CMapRM<T>(weight_.value.data(), cin_, kk) * dcm;
    return dx;
  }

  void init(Rng& rng) { init_normal(weight_, rng, 0.02); }
  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }

 private:
  int cin_ = 0, cout_ = 0, k_ = 4, stride_ = 2, pad_ = 1;
  Param<T> weight_, bias_;
  ConvGeometry geom_{};
  Tensor<T> input_;
};

// Per-sample, per-channel normalization without affine parameters.
template <typename T>
class InstanceNorm {
 public:
  static constexpr double kEps = 1e-5;

  Tensor<T> forward(const Tensor<T>& x) {
    xhat_ = Tensor<T>(x.c, x.h, x.w);
    inv_std_.assign(x.c, T(0));
    const std::size_t n = x.plane();
    for (int ch = 0; ch < x.c; ++ch) {
      const T* src = x.channel(ch);
      T mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += src[i];
      mean /= static_cast<T>(n);
      T var = 0;
      for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
      var /= static_cast<T>(n);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kEps));
      inv_std_[ch] = inv;
      T* dst = xhat_.channel(ch);
      for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * inv;
    }
    return xhat_;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.c, dy.h, dy.w);
    const std::size_t n = dy.plane();
    for (int ch = 0; ch < dy.c; ++ch) {
      const T* g = dy.channel(ch);
      const T* xh = xhat_.channel(ch);
      T mean_g = 0;
      T mean_gx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        mean_g += g[i];
        mean_gx += g[i] * xh[i];
      }
      mean_g /= static_cast<T>(n);
      mean_gx /= static_cast<T>(n);
      T* d = dx.channel(ch);
      for (std::size_t i = 0; i < n; ++i) d[i] = inv_std_[ch] * (g[i] - mean_g - xh[i] * mean_gx);
    }
    return dx;
  }

 private:
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// Leaky ReLU with slope 0 is a plain ReLU.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : v * slope;
  return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& dy, const Tensor<T>& x, T slope) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    if (!(x.data[i] > T(0))) dx.data[i] *= slope;
  }
  return dx;
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = std::tanh(v);
  return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& dy, const Tensor<T>& y) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= T(1) - y.data[i] * y.data[i];
  return dx;
}

// Inverted dropout: kept units are scaled by 1/(1-p) at train time.
template <typename T>
class Dropout {
 public:
  explicit Dropout(double p = 0.5) : p_(p) {}

  Tensor<T> forward(const Tensor<T>& x, Rng* rng) {
    if (rng == nullptr || p_ <= 0.0) {
      mask_.clear();
      return x;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - p_));
    mask_.resize(x.size());
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      mask_[i] = rng->uniform() >= p_ ? scale : T(0);
      y.data[i] *= mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) const {
    if (mask_.empty()) return dy;
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= mask_[i];
    return dx;
  }

 private:
  double p_;
  std::vector<T> mask_;
};

}  // namespace l2p::nn
