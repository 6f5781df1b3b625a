#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "l2p/nn/layers.hpp"

using namespace l2p;
using nn::Tensor;

namespace {

Tensor<double> random_tensor(Rng& rng, int c, int h, int w) {
  Tensor<double> t(c, h, w);
  for (auto& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

// Direct-loop convolution.
Tensor<double> naive_conv(const Tensor<double>& x, const nn::Buffer<double>& w, const nn::Buffer<double>& b, int cout,
                          int k, int stride, int pad) {
  const int oh = (x.h + 2 * pad - k) / stride + 1;
  const int ow = (x.w + 2 * pad - k) / stride + 1;
  Tensor<double> y(cout, oh, ow);
  for (int co = 0; co < cout; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double s = b[co];
        for (int ci = 0; ci < x.c; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride - pad + ky;
              const int ix = ox * stride - pad + kx;
              if (iy < 0 || ix < 0 || iy >= x.h || ix >= x.w) continue;
              s += w[((static_cast<std::size_t>(co) * x.c + ci) * k + ky) * k + kx] * x.at(ci, iy, ix);
            }
          }
        }
        y.at(co, oy, ox) = s;
      }
    }
  }
  return y;
}

// Scatter form of the transposed convolution.
Tensor<double> naive_conv_transpose(const Tensor<double>& x, const nn::Buffer<double>& w, const nn::Buffer<double>& b,
                                    int cout, int k, int stride, int pad) {
  const int oh = (x.h - 1) * stride - 2 * pad + k;
  const int ow = (x.w - 1) * stride - 2 * pad + k;
  Tensor<double> y(cout, oh, ow);
  for (int co = 0; co < cout; ++co) {
    for (int i = 0; i < oh * ow; ++i) y.data[static_cast<std::size_t>(co) * oh * ow + i] = b[co];
  }
  for (int ci = 0; ci < x.c; ++ci) {
    for (int iy = 0; iy < x.h; ++iy) {
      for (int ix = 0; ix < x.w; ++ix) {
        for (int co = 0; co < cout; ++co) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int oy = iy * stride - pad + ky;
              const int ox = ix * stride - pad + kx;
              if (oy < 0 || ox < 0 || oy >= oh || ox >= ow) continue;
              y.at(co, oy, ox) += w[((static_cast<std::size_t>(ci) * cout + co) * k + ky) * k + kx] * x.at(ci, iy, ix);
            }
          }
        }
      }
    }
  }
  return y;
}

// Checks analytic gradients of L = <probe, f(x)> against central differences
// for the input and every parameter entry.
template <typename Layer>
void check_layer_gradients(Layer& layer, Tensor<double> x, Rng& rng, double tol = 1e-7) {
  const Tensor<double> y0 = layer.forward(x);
  const Tensor<double> probe = random_tensor(rng, y0.c, y0.h, y0.w);
  for (auto* p : layer.params()) p->zero_grad();
  const Tensor<double> dx = layer.backward(probe);
  const double eps = 1e-6;
  auto loss = [&]() { return dot(probe, layer.forward(x)); };
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + eps;
    const double up = loss();
    x.data[i] = keep - eps;
    const double down = loss();
    x.data[i] = keep;
    ASSERT_NEAR(dx.data[i], (up - down) / (2 * eps), tol) << "input " << i;
  }
  for (auto* p : layer.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + eps;
      const double up = loss();
      p->value[i] = keep - eps;
      const double down = loss();
      p->value[i] = keep;
      ASSERT_NEAR(p->grad[i], (up - down) / (2 * eps), tol) << p->name << " " << i;
    }
  }
}

template <typename T>
struct NoParams {
  std::vector<nn::Param<T>*> params() { return {}; }
};

}  // namespace

TEST(Conv2d, MatchesDirectLoop) {
  Rng rng(1);
  for (auto [k, s, p] : {std::array{4, 2, 1}, std::array{4, 1, 1}, std::array{3, 1, 0}}) {
    nn::Conv2d<double> conv("c", 3, 5, k, s, p);
    conv.init(rng);
    for (auto& b : conv.params()[1]->value) b = rng.uniform(-1, 1);
    const auto x = random_tensor(rng, 3, 9, 8);
    const auto y = conv.forward(x);
    const auto want = naive_conv(x, conv.params()[0]->value, conv.params()[1]->value, 5, k, s, p);
    ASSERT_TRUE(y.same_shape(want));
    for (std::size_t i = 0; i < y.data.size(); ++i) ASSERT_NEAR(y.data[i], want.data[i], 1e-12);
  }
}

TEST(Conv2d, OutputSizes) {
  EXPECT_EQ(nn::conv_out(64, 4, 2, 1), 32);
  EXPECT_EQ(nn::conv_out(8, 4, 1, 1), 7);
  nn::Conv2d<float> conv("c", 2, 4, 4, 2, 1);
  EXPECT_THROW(conv.forward(Tensor<float>(3, 8, 8)), ShapeError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  nn::Conv2d<double> conv("c", 2, 3, 4, 2, 1);
  conv.init(rng);
  for (auto& w : conv.params()[0]->value) w = rng.uniform(-1, 1);
  check_layer_gradients(conv, random_tensor(rng, 2, 6, 6), rng);
}

TEST(ConvTranspose2d, MatchesScatterLoop) {
  Rng rng(3);
  nn::ConvTranspose2d<double> up("u", 4, 3, 4, 2, 1);
  up.init(rng);
  for (auto& w : up.params()[0]->value) w = rng.uniform(-1, 1);
  for (auto& b : up.params()[1]->value) b = rng.uniform(-1, 1);
  const auto x = random_tensor(rng, 4, 5, 6);
  const auto y = up.forward(x);
  const auto want = naive_conv_transpose(x, up.params()[0]->value, up.params()[1]->value, 3, 4, 2, 1);
  ASSERT_EQ(y.shape_str(), "3x10x12");
  for (std::size_t i = 0; i < y.data.size(); ++i) ASSERT_NEAR(y.data[i], want.data[i], 1e-12);
}

TEST(ConvTranspose2d, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  nn::ConvTranspose2d<double> up("u", 3, 2, 4, 2, 1);
  for (auto* p : up.params()) {
    for (auto& v : p->value) v = rng.uniform(-1, 1);
  }
  check_layer_gradients(up, random_tensor(rng, 3, 3, 4), rng);
}

TEST(InstanceNorm, NormalizesEachChannel) {
  Rng rng(5);
  nn::InstanceNorm<double> norm;
  auto x = random_tensor(rng, 3, 5, 5);
  for (auto& v : x.data) v = 3 * v + 7;
  const auto y = norm.forward(x);
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < y.plane(); ++i) mean += y.channel(c)[i];
    mean /= static_cast<double>(y.plane());
    for (std::size_t i = 0; i < y.plane(); ++i) var += std::pow(y.channel(c)[i] - mean, 2);
    var /= static_cast<double>(y.plane());
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(InstanceNorm, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  struct Wrapped : NoParams<double> {
    nn::InstanceNorm<double> n;
    Tensor<double> forward(const Tensor<double>& x) { return n.forward(x); }
    Tensor<double> backward(const Tensor<double>& dy) { return n.backward(dy); }
  } layer;
  check_layer_gradients(layer, random_tensor(rng, 2, 3, 3), rng);
}

TEST(Activations, LeakyReluAndTanh) {
  Tensor<double> x(1, 1, 4);
  x.data = {-2, -0.5, 0.5, 2};
  const auto y = nn::leaky_relu(x, 0.2);
  EXPECT_EQ(y.data, (nn::Buffer<double>{-0.4, -0.1, 0.5, 2}));
  Tensor<double> g(1, 1, 4, 1.0);
  EXPECT_EQ(nn::leaky_relu_backward(g, x, 0.2).data, (nn::Buffer<double>{0.2, 0.2, 1, 1}));
  EXPECT_EQ(nn::leaky_relu(x, 0.0).data, (nn::Buffer<double>{0, 0, 0.5, 2}));
  const auto t = nn::tanh_forward(x);
  const auto dt = nn::tanh_backward(g, t);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(dt.data[i], 1 / std::pow(std::cosh(x.data[i]), 2), 1e-12);
}

TEST(Dropout, InvertedScalingAndIdentityAtInference) {
  nn::Dropout<double> drop(0.5);
  Tensor<double> x(4, 16, 16, 1.0);
  EXPECT_EQ(drop.forward(x, nullptr), x);
  Rng rng(7);
  const auto y = drop.forward(x, &rng);
  int zeros = 0;
  for (double v : y.data) {
    ASSERT_TRUE(v == 0.0 || v == 2.0);
    zeros += v == 0.0;
  }
  EXPECT_NEAR(zeros / 1024.0, 0.5, 0.06);
  Tensor<double> g(4, 16, 16, 1.0);
  EXPECT_EQ(drop.backward(g), y);
}

TEST(Tensor, ConcatAndSplit) {
  Rng rng(8);
  const auto a = random_tensor(rng, 2, 3, 3);
  const auto b = random_tensor(rng, 1, 3, 3);
  const auto c = nn::concat_channels(a, b);
  EXPECT_EQ(c.c, 3);
  Tensor<double> ga, gb;
  nn::split_channels(c, 2, ga, gb);
  EXPECT_EQ(ga, a);
  EXPECT_EQ(gb, b);
  EXPECT_THROW(nn::concat_channels(a, random_tensor(rng, 1, 2, 3)), ShapeError);
}
