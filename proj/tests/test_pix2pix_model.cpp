#include <cmath>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "l2p/pix2pix_model.hpp"

using namespace l2p;
using l2p::fixture::uniform_tensor;

// Reference totals come from the equivalent torch.nn modules (U-Net with
// instance norm and biased convolutions; 70x70-style PatchGAN).
TEST(Architecture, ParameterCounts) {
  struct Case {
    int in, base, depth;
    std::size_t gen;
  };
  for (const Case& c : {Case{2, 64, 6, 29240707}, Case{2, 64, 8, 54408579}, Case{2, 32, 6, 7313091},
                        Case{1, 64, 6, 29239683}}) {
    Generator<float> g(GeneratorConfig{c.in, 3, c.base, c.depth, 0.5});
    EXPECT_EQ(parameter_count(g.params()), c.gen) << c.in << "/" << c.base << "/" << c.depth;
  }
  struct DCase {
    int in, base, layers;
    std::size_t count;
  };
  for (const DCase& c : {DCase{5, 64, 3, 2766785}, DCase{6, 64, 3, 2767809}, DCase{5, 32, 3, 695265},
                         DCase{5, 4, 2, 3165}}) {
    Discriminator<float> d(DiscriminatorConfig{c.in, c.base, c.layers});
    EXPECT_EQ(parameter_count(d.params()), c.count);
  }
}

TEST(Architecture, PatchMapSides) {
  DiscriminatorConfig d{5, 8, 3};
  EXPECT_EQ(d.patch_side(256), 30);
  EXPECT_EQ(d.patch_side(64), 6);
  EXPECT_EQ((DiscriminatorConfig{5, 4, 2}.patch_side(16)), 2);
  EXPECT_EQ(d.patch_side(16), 0);
  EXPECT_THROW(ModelConfig::standard(2, 4, 4, 3).validate(), InvalidArgument);

  Discriminator<float> disc(d);
  Rng rng(1);
  disc.init(rng);
  const auto out = disc.forward(nn::Tensor<float>(2, 64, 64), nn::Tensor<float>(3, 64, 64));
  EXPECT_EQ(out.shape_str(), "1x6x6");
}

TEST(Architecture, GeneratorOutputShapeAndRange) {
  for (int in : {1, 2}) {
    Generator<float> g(GeneratorConfig{in, 3, 4, 6, 0.5});
    Rng rng(2);
    g.init(rng);
    Rng x_rng(3);
    nn::Tensor<float> x(in, 64, 64);
    for (auto& v : x.data) v = static_cast<float>(x_rng.uniform(-1, 1));
    const auto y = g.forward(x, nullptr);
    EXPECT_EQ(y.shape_str(), "3x64x64");
    for (float v : y.data) ASSERT_TRUE(v >= -1.0f && v <= 1.0f);
  }
}

TEST(Architecture, RejectsMismatchedInput) {
  Generator<float> g(GeneratorConfig{2, 3, 4, 4, 0.5});
  EXPECT_THROW(g.forward(nn::Tensor<float>(1, 16, 16), nullptr), ShapeError);
  EXPECT_THROW(g.forward(nn::Tensor<float>(2, 32, 32), nullptr), ShapeError);
  Discriminator<float> d(DiscriminatorConfig{5, 4, 2});
  EXPECT_THROW(d.forward(nn::Tensor<float>(2, 16, 16), nn::Tensor<float>(3, 8, 8)), ShapeError);
  EXPECT_THROW(d.forward(nn::Tensor<float>(1, 16, 16), nn::Tensor<float>(3, 16, 16)), ShapeError);
}

TEST(Architecture, ConfigValidation) {
  EXPECT_THROW(GeneratorConfig({3, 3, 64, 8, 0.5}).validate(), InvalidArgument);
  EXPECT_THROW(GeneratorConfig({2, 3, 64, 3, 0.5}).validate(), InvalidArgument);
  EXPECT_THROW(GeneratorConfig({2, 3, 64, 8, 1.0}).validate(), InvalidArgument);
  ModelConfig m = ModelConfig::standard(2, 6);
  m.disc.input_channels = 4;
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Architecture, DropoutOnlyWhenRngGiven) {
  Generator<float> g(GeneratorConfig{2, 3, 4, 7, 0.5});
  Rng rng(4);
  g.init(rng);
  nn::Tensor<float> x(2, 128, 128, 0.3f);
  EXPECT_EQ(g.forward(x, nullptr), g.forward(x, nullptr));
  Rng a(9), b(9), c(10);
  const auto ya = g.forward(x, &a);
  EXPECT_EQ(ya, g.forward(x, &b));
  EXPECT_NE(ya, g.forward(x, &c));
}

TEST(Architecture, InitIsSeededNormal) {
  Pix2PixModel<float> m1(ModelConfig::standard(2, 6, 16)), m2(ModelConfig::standard(2, 6, 16));
  m1.init(5);
  m2.init(5);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  auto p1 = m1.params(), p2 = m2.params();
  for (std::size_t k = 0; k < p1.size(); ++k) {
    ASSERT_EQ(p1[k]->value, p2[k]->value);
    if (p1[k]->name.ends_with(".bias")) {
      for (float v : p1[k]->value) ASSERT_EQ(v, 0.0f);
      continue;
    }
    for (float v : p1[k]->value) {
      sum += v;
      sq += double(v) * v;
      ++n;
    }
  }
  EXPECT_NEAR(sum / n, 0.0, 1e-3);
  EXPECT_NEAR(std::sqrt(sq / n), 0.02, 5e-4);
}

TEST(Losses, BceMatchesScalarFormula) {
  nn::Tensor<double> z(1, 2, 3);
  z.data = {-3, -0.5, 0, 0.25, 2, 7};
  for (double label : {0.0, 1.0}) {
    const auto r = bce_with_logits(z, label);
    double want = 0;
    for (double v : z.data) {
      const double s = 1 / (1 + std::exp(-v));
      want -= label * std::log(s) + (1 - label) * std::log(1 - s);
    }
    EXPECT_NEAR(r.value, want / 6, 1e-12);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(r.grad.data[i], (1 / (1 + std::exp(-z.data[i])) - label) / 6, 1e-12);
    }
  }
}

TEST(Losses, BceIsStableForLargeLogits) {
  nn::Tensor<double> z(1, 1, 2);
  z.data = {800, -800};
  const auto r = bce_with_logits(z, 1.0);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.value, 400, 1e-9);
}

TEST(Losses, GeneratorLossCombinesTerms) {
  nn::Tensor<double> logits(1, 2, 2, 0.0);
  nn::Tensor<double> fake(3, 1, 2), target(3, 1, 2);
  fake.data = {0.5, -0.5, 0.1, 0.2, 0.3, 0.4};
  target.data = {0.0, 0.0, 0.1, 0.0, 0.0, 0.0};
  const auto gl = generator_loss(logits, fake, target, 100.0);
  const double l1 = (0.5 + 0.5 + 0 + 0.2 + 0.3 + 0.4) / 6;
  EXPECT_NEAR(gl.l1, l1, 1e-12);
  EXPECT_NEAR(gl.adversarial, std::log(2.0), 1e-12);
  EXPECT_NEAR(gl.value, std::log(2.0) + 100 * l1, 1e-12);
  EXPECT_NEAR(gl.grad_fake.data[0], 100.0 / 6, 1e-12);
  EXPECT_NEAR(gl.grad_fake.data[1], -100.0 / 6, 1e-12);
  EXPECT_EQ(gl.grad_fake.data[2], 0.0);
  EXPECT_THROW(generator_loss(logits, fake, nn::Tensor<double>(3, 2, 2), 100.0), ShapeError);
}

TEST(Losses, DiscriminatorLossIsMeanOfHalves) {
  nn::Tensor<double> real(1, 1, 1, 2.0), fake(1, 1, 1, -1.0);
  const auto dl = discriminator_loss(real, fake);
  EXPECT_NEAR(dl.value, 0.5 * (std::log1p(std::exp(-2.0)) + std::log1p(std::exp(-1.0))), 1e-12);
  EXPECT_NEAR(dl.grad_real.data[0], 0.5 * (1 / (1 + std::exp(-2.0)) - 1), 1e-12);
  EXPECT_NEAR(dl.grad_fake.data[0], 0.5 * (1 / (1 + std::exp(1.0))), 1e-12);
}

TEST(Gradients, GeneratorLossMatchesFiniteDifferences) {
  for (int in : {1, 2}) {
    Pix2PixModel<double> model(fixture::micro_config(in));
    model.init(11 + in);
    Rng rng(17);
    const auto x = uniform_tensor(rng, in, 16, 16);
    const auto y = uniform_tensor(rng, 3, 16, 16);
    const auto r = fixture::check_generator_loss(model, x, y, 100.0, 10, rng);
    EXPECT_EQ(r.directions, 10);
    EXPECT_LT(r.max_rel_error, 1e-3) << in << " input channel(s)";
  }
}

TEST(Gradients, DiscriminatorLossMatchesFiniteDifferences) {
  Pix2PixModel<double> model(fixture::micro_config());
  model.init(21);
  Rng rng(23);
  const auto x = uniform_tensor(rng, 2, 16, 16);
  const auto y = uniform_tensor(rng, 3, 16, 16);
  const auto r = fixture::check_discriminator_loss(model, x, y, 10, rng);
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(Gradients, GeneratorInputGradient) {
  // Input gradient through the whole U-Net, including skip connections.
  Pix2PixModel<double> model(fixture::micro_config());
  model.init(31);
  Rng rng(37);
  auto x = uniform_tensor(rng, 2, 16, 16);
  const auto probe = uniform_tensor(rng, 3, 16, 16);
  auto loss = [&]() {
    const auto y = model.gen.forward(x, nullptr);
    double s = 0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += probe.data[i] * y.data[i];
    return s;
  };
  model.gen.forward(x, nullptr);
  const auto dx = model.gen.backward(probe);
  for (std::size_t i = 0; i < x.data.size(); i += 7) {
    const double keep = x.data[i];
    x.data[i] = keep + 1e-6;
    const double up = loss();
    x.data[i] = keep - 1e-6;
    const double down = loss();
    x.data[i] = keep;
    ASSERT_NEAR(dx.data[i], (up - down) / 2e-6, 1e-6 + 1e-4 * std::abs(dx.data[i]));
  }
}
