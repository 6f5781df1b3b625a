#pragma once

// Conditional image-to-image GAN: a U-Net generator with skip connections
// between mirrored levels and a patch discriminator that scores local
// windows of (condition, image) pairs.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "l2p/error.hpp"
#include "l2p/nn/layers.hpp"
#include "l2p/nn/tensor.hpp"
#include "l2p/random.hpp"

namespace l2p {

struct GeneratorConfig {
  int input_channels = 2;
  int output_channels = 3;
  int base_filters = 64;
  int depth = 8;  // number of stride-2 levels; image side = 2^depth
  double dropout = 0.5;

  int image_size() const { return 1 << depth; }
  // Output channels of encoder level i.
  int filters(int level) const { return base_filters * std::min(1 << std::min(level, 3), 8); }

  void validate() const {
    if (input_channels != 1 && input_channels != 2) throw InvalidArgument("generator input_channels must be 1 or 2");
    if (output_channels != 3) throw InvalidArgument("generator output_channels must be 3");
    if (base_filters < 1) throw InvalidArgument("base_filters must be >= 1");
    if (depth < 4 || depth > 12) throw InvalidArgument("generator depth must be in [4, 12]");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must be in [0, 1)");
  }

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct DiscriminatorConfig {
  int input_channels = 5;  // generator input + output channels
  int base_filters = 64;
  int layers = 3;          // stride-2 convolutions before the two stride-1 ones

  static DiscriminatorConfig for_generator(const GeneratorConfig& g, int layers = 3) {
    return {g.input_channels + g.output_channels, g.base_filters, layers};
  }
  int filters(int j) const { return base_filters * std::min(1 << std::min(j, 3), 8); }

  // Side of the logit map for an S x S input: `layers` halvings, then two
  // 4x4 stride-1 convolutions with padding 1 that each remove one pixel.
  int patch_side(int image_side) const {
    int s = image_side;
    for (int j = 0; j < layers; ++j) s = nn::conv_out(s, 4, 2, 1);
    s = nn::conv_out(s, 4, 1, 1);
    return nn::conv_out(s, 4, 1, 1);
  }

  void validate() const {
    if (input_channels < 2) throw InvalidArgument("discriminator input_channels must be >= 2");
    if (base_filters < 1) throw InvalidArgument("discriminator base_filters must be >= 1");
    if (layers < 1 || layers > 6) throw InvalidArgument("discriminator layers must be in [1, 6]");
  }

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

struct ModelConfig {
  GeneratorConfig gen;
  DiscriminatorConfig disc;

  static ModelConfig standard(int input_channels, int depth, int base_filters = 64, int disc_layers = 3) {
    GeneratorConfig g{input_channels, 3, base_filters, depth, 0.5};
    return {g, DiscriminatorConfig::for_generator(g, disc_layers)};
  }

  void validate() const {
    gen.validate();
    disc.validate();
    if (disc.input_channels != gen.input_channels + gen.output_channels) {
      throw InvalidArgument("discriminator must see generator input and output channels");
    }
    if (disc.patch_side(gen.image_size()) < 1) {
      throw InvalidArgument("discriminator has too many layers for a " + std::to_string(gen.image_size()) + " px image");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr float kLeakySlope = 0.2f;

template <typename T>
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int depth = cfg_.depth;
    levels_.resize(depth);
    for (int i = 0; i < depth; ++i) {
      Level& L = levels_[i];
      const int in = i == 0 ? cfg_.input_channels : cfg_.filters(i - 1);
      const std::string tag = "G.level" + std::to_string(i);
      L.down = nn::Conv2d<T>(tag + ".down", in, cfg_.filters(i), 4, 2, 1);
      L.down_norm = i > 0 && i < depth - 1;
      const int up_in = i == depth - 1 ? cfg_.filters(i) : 2 * cfg_.filters(i);
      const int up_out = i == 0 ? cfg_.output_channels : cfg_.filters(i - 1);
      L.up = nn::ConvTranspose2d<T>(tag + ".up", up_in, up_out, 4, 2, 1);
      // Dropout on the (depth - 5) decoder levels just outside the innermost one.
      L.dropout = i < depth - 1 && i >= depth - 1 - std::max(0, depth - 5);
      L.drop = nn::Dropout<T>(cfg_.dropout);
    }
  }

  const GeneratorConfig& config() const { return cfg_; }

  void init(Rng& rng) {
    for (auto& L : levels_) {
      L.down.init(rng);
      L.up.init(rng);
    }
  }

  // dropout_rng == nullptr selects deterministic inference.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, Rng* dropout_rng) {
    const int side = cfg_.image_size();
    if (x.c != cfg_.input_channels || x.h != side || x.w != side) {
      throw ShapeError("generator expects " + std::to_string(cfg_.input_channels) + "x" + std::to_string(side) + "x" +
                       std::to_string(side) + " input, got " + x.shape_str());
    }
    const int depth = cfg_.depth;
    nn::Tensor<T> z = x;
    for (int i = 0; i < depth; ++i) {
      Level& L = levels_[i];
      L.z = z;
      nn::Tensor<T> c = L.down.forward(i > 0 ? nn::leaky_relu(z, T(kLeakySlope)) : z);
      z = L.down_norm ? L.down_norm_layer.forward(c) : std::move(c);
    }
    nn::Tensor<T> inner = std::move(z);
    for (int i = depth - 1; i >= 0; --i) {
      Level& L = levels_[i];
      L.inner = inner;
      nn::Tensor<T> u = L.up.forward(nn::leaky_relu(inner, T(0)));
      if (i == 0) {
        out_ = nn::tanh_forward(u);
        return out_;
      }
      u = L.up_norm_layer.forward(u);
      u = L.drop.forward(u, L.dropout ? dropout_rng : nullptr);
      inner = nn::concat_channels(L.z, u);
    }
    return out_;  // unreachable: depth >= 1
  }

  // Accumulates parameter gradients; returns the gradient w.r.t. the input.
  nn::Tensor<T> backward(const nn::Tensor<T>& dout) {
    const int depth = cfg_.depth;
    std::vector<nn::Tensor<T>> dskip(depth);
    nn::Tensor<T> d = nn::tanh_backward(dout, out_);
    nn::Tensor<T> de;
    for (int i = 0; i < depth; ++i) {
      Level& L = levels_[i];
      if (i > 0) d = L.up_norm_layer.backward(L.drop.backward(d));
      nn::Tensor<T> dinner = nn::leaky_relu_backward(L.up.backward(d), L.inner, T(0));
      if (i == depth - 1) {
        de = std::move(dinner);
      } else {
        nn::split_channels(dinner, levels_[i + 1].z.c, dskip[i + 1], d);
      }
    }
    for (int i = depth - 1; i >= 0; --i) {
      Level& L = levels_[i];
      nn::Tensor<T> dc = L.down_norm ? L.down_norm_layer.backward(de) : std::move(de);
      nn::Tensor<T> dh = L.down.backward(dc);
      if (i == 0) return dh;
      de = nn::leaky_relu_backward(dh, L.z, T(kLeakySlope));
      for (std::size_t k = 0; k < de.data.size(); ++k) de.data[k] += dskip[i].data[k];
    }
    return {};
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    for (auto& L : levels_) {
      for (auto* p : L.down.params()) out.push_back(p);
      for (auto* p : L.up.params()) out.push_back(p);
    }
    return out;
  }

 private:
  struct Level {
    nn::Conv2d<T> down;
    bool down_norm = false;
    nn::InstanceNorm<T> down_norm_layer;
    nn::ConvTranspose2d<T> up;
    nn::InstanceNorm<T> up_norm_layer;
    bool dropout = false;
    nn::Dropout<T> drop;
    nn::Tensor<T> z;      // block input, also the skip tensor
    nn::Tensor<T> inner;  // pre-ReLU input to the up-convolution
  };

  GeneratorConfig cfg_;
  std::vector<Level> levels_;
  nn::Tensor<T> out_;
};

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.layers;
    for (int j = 0; j <= n + 1; ++j) {
      const int in = j == 0 ? cfg_.input_channels : cfg_.filters(j - 1);
      const int out = j == n + 1 ? 1 : cfg_.filters(j);
      const int stride = j < n ? 2 : 1;
      convs_.emplace_back("D.conv" + std::to_string(j), in, out, 4, stride, 1);
    }
    norms_.resize(n + 1);
    pre_.resize(n + 1);
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& condition, const nn::Tensor<T>& image) {
    if (condition.h != image.h || condition.w != image.w) {
      throw ShapeError("discriminator inputs not aligned: " + condition.shape_str() + " vs " + image.shape_str());
    }
    if (condition.c + image.c != cfg_.input_channels) {
      throw ShapeError("discriminator expects " + std::to_string(cfg_.input_channels) + " stacked channels, got " +
                       std::to_string(condition.c + image.c));
    }
    condition_channels_ = condition.c;
    nn::Tensor<T> a = nn::concat_channels(condition, image);
    const int n = cfg_.layers;
    for (int j = 0; j <= n; ++j) {
      nn::Tensor<T> c = convs_[j].forward(a);
      pre_[j] = j >= 1 ? norms_[j].forward(c) : std::move(c);
      a = nn::leaky_relu(pre_[j], T(kLeakySlope));
    }
    return convs_[n + 1].forward(a);
  }

  // Accumulates parameter gradients; returns the gradient w.r.t. `image`.
  nn::Tensor<T> backward(const nn::Tensor<T>& dlogits) {
    const int n = cfg_.layers;
    nn::Tensor<T> d = convs_[n + 1].backward(dlogits);
    for (int j = n; j >= 0; --j) {
      d = nn::leaky_relu_backward(d, pre_[j], T(kLeakySlope));
      if (j >= 1) d = norms_[j].backward(d);
      d = convs_[j].backward(d);
    }
    nn::Tensor<T> dcond, dimage;
    nn::split_channels(d, condition_channels_, dcond, dimage);
    return dimage;
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    for (auto& c : convs_) {
      for (auto* p : c.params()) out.push_back(p);
    }
    return out;
  }

 private:
  DiscriminatorConfig cfg_;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<nn::InstanceNorm<T>> norms_;  // index 0 unused
  std::vector<nn::Tensor<T>> pre_;
  int condition_channels_ = 0;
};

template <typename T>
std::size_t parameter_count(std::vector<nn::Param<T>*> params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->size();
  return n;
}

// ---------------------------------------------------------------------------
// Objectives. Gradients are returned alongside values.

template <typename T>
struct BceResult {
  double value = 0.0;
  nn::Tensor<T> grad;
};

// Mean binary cross-entropy of sigmoid(logits) against a constant label.
template <typename T>
BceResult<T> bce_with_logits(const nn::Tensor<T>& logits, double label) {
  BceResult<T> r{0.0, nn::Tensor<T>(logits.c, logits.h, logits.w)};
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    const double z = static_cast<double>(logits.data[i]);
    r.value += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    r.grad.data[i] = static_cast<T>((sig - label) / n);
  }
  r.value /= n;
  return r;
}

template <typename T>
double mean_abs_error(const nn::Tensor<T>& a, const nn::Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("L1: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  return s / static_cast<double>(a.size());
}

template <typename T>
struct GeneratorLoss {
  double value = 0.0;
  double adversarial = 0.0;
  double l1 = 0.0;  // mean |fake - target|, unweighted
  nn::Tensor<T> grad_logits;
  nn::Tensor<T> grad_fake;
};

// BCE(D(x, fake), real) + lambda * mean|fake - target|.
template <typename T>
GeneratorLoss<T> generator_loss(const nn::Tensor<T>& d_on_fake, const nn::Tensor<T>& fake, const nn::Tensor<T>& target,
                                double lambda_l1) {
  if (!fake.same_shape(target)) throw ShapeError("generator_loss: fake " + fake.shape_str() + " vs target " + target.shape_str());
  auto adv = bce_with_logits(d_on_fake, 1.0);
  GeneratorLoss<T> r;
  r.adversarial = adv.value;
  r.l1 = mean_abs_error(fake, target);
  r.value = r.adversarial + lambda_l1 * r.l1;
  r.grad_logits = std::move(adv.grad);
  r.grad_fake = nn::Tensor<T>(fake.c, fake.h, fake.w);
  const double scale = lambda_l1 / static_cast<double>(fake.size());
  for (std::size_t i = 0; i < fake.data.size(); ++i) {
    const T diff = fake.data[i] - target.data[i];
    r.grad_fake.data[i] = static_cast<T>(diff > T(0) ? scale : (diff < T(0) ? -scale : 0.0));
  }
  return r;
}

template <typename T>
struct DiscriminatorLoss {
  double value = 0.0;
  nn::Tensor<T> grad_real;
  nn::Tensor<T> grad_fake;
};

// 0.5 * [BCE(D(x, y), real) + BCE(D(x, fake), fake)].
template <typename T>
DiscriminatorLoss<T> discriminator_loss(const nn::Tensor<T>& d_on_real, const nn::Tensor<T>& d_on_fake) {
  auto real = bce_with_logits(d_on_real, 1.0);
  auto fake = bce_with_logits(d_on_fake, 0.0);
  DiscriminatorLoss<T> r;
  r.value = 0.5 * (real.value + fake.value);
  for (auto& g : real.grad.data) g *= T(0.5);
  for (auto& g : fake.grad.data) g *= T(0.5);
  r.grad_real = std::move(real.grad);
  r.grad_fake = std::move(fake.grad);
  return r;
}

// Generator and discriminator pair with matching configurations.
template <typename T>
struct Pix2PixModel {
  ModelConfig config;
  Generator<T> gen;
  Discriminator<T> disc;

  explicit Pix2PixModel(const ModelConfig& cfg) : config(cfg), gen((cfg.validate(), cfg.gen)), disc(cfg.disc) {}

  void init(std::uint64_t seed) {
    Rng rng(seed);
    gen.init(rng);
    disc.init(rng);
  }

  std::vector<nn::Param<T>*> params() {
    auto p = gen.params();
    for (auto* q : disc.params()) p.push_back(q);
    return p;
  }
};

}  // namespace l2p
