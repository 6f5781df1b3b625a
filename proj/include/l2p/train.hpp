#pragma once

// Adversarial training loop and inference.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "l2p/checkpoint.hpp"
#include "l2p/pix2pix_model.hpp"
#include "l2p/projection.hpp"

namespace l2p {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::Param<T>*> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), T(0));
      v_.emplace_back(p->size(), T(0));
    }
  }

  void step() {
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T step = static_cast<T>(cfg_.learning_rate * std::sqrt(1.0 - std::pow(cfg_.beta2, t_)) /
                                  (1.0 - std::pow(cfg_.beta1, t_)));
    // eps is applied to the bias-corrected second moment.
    const T eps = static_cast<T>(cfg_.eps * std::sqrt(1.0 - std::pow(cfg_.beta2, t_)));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      T* w = params_[k]->value.data();
      const T* g = params_[k]->grad.data();
      T* m = m_[k].data();
      T* v = v_[k].data();
      const std::size_t n = params_[k]->size();
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        w[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

 private:
  std::vector<nn::Param<T>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  long t_ = 0;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 1;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double lambda_l1 = 100.0;
  std::uint64_t seed = 0;
  ChannelMode mode = ChannelMode::ReflectanceAndDistance;

  void validate() const {
    if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
    if (batch_size != 1) throw InvalidArgument("only batch size 1 is supported");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw InvalidArgument("adam_beta1 must be in [0,1)");
    if (!(lambda_l1 >= 0.0)) throw InvalidArgument("lambda_l1 must be >= 0");
  }
};

// Experiment presets: reflectance only for 50 epochs, reflectance plus
// distance for 40 epochs, batch size one in both.
inline TrainConfig preset(std::string_view name) {
  TrainConfig cfg;
  if (name == "exp1") {
    cfg.mode = ChannelMode::ReflectanceOnly;
    cfg.epochs = 50;
  } else if (name == "exp2") {
    cfg.mode = ChannelMode::ReflectanceAndDistance;
    cfg.epochs = 40;
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected exp1 or exp2)");
  }
  return cfg;
}

// One conditioning raster and its camera image, both in [-1, 1].
struct TrainingPair {
  nn::Tensor<float> input;
  nn::Tensor<float> target;
};

inline TrainingPair make_training_pair(const RasterImage& input, const RasterImage& target) {
  if (input.width != target.width || input.height != target.height) {
    throw ShapeError("input and target sizes differ");
  }
  if (target.channels != 3) throw ShapeError("target image must have 3 channels");
  return {to_model_range(input), to_model_range(target)};
}

struct EpochLog {
  int epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double g_l1 = 0.0;
  double val_l1 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  Checkpoint best;  // lowest validation L1; the last epoch when no validation set is given
  Checkpoint last;
  std::vector<EpochLog> log;
};

// Inference wrapper; no stochastic layers are active.
class Predictor {
 public:
  explicit Predictor(const Checkpoint& ck) : model_(ck.config) { load_parameters(model_, ck); }

  nn::Tensor<float> forward(const nn::Tensor<float>& input) { return model_.gen.forward(input, nullptr); }

  RasterImage predict(const RasterImage& raster) {
    const auto& g = model_.config.gen;
    if (raster.channels != g.input_channels) {
      throw ShapeError("raster has " + std::to_string(raster.channels) + " channel(s) but the checkpoint expects " +
                       std::to_string(g.input_channels) + " (" + std::string(to_string(mode_for_channels(g.input_channels))) + ")");
    }
    if (raster.width != g.image_size() || raster.height != g.image_size()) {
      throw ShapeError("raster is " + std::to_string(raster.width) + "x" + std::to_string(raster.height) +
                       " but the checkpoint expects " + std::to_string(g.image_size()) + "x" + std::to_string(g.image_size()));
    }
    return from_model_range(forward(to_model_range(raster)));
  }

  const ModelConfig& config() const { return model_.config; }

 private:
  Pix2PixModel<float> model_;
};

inline RasterImage predict(const Checkpoint& ck, const RasterImage& raster) { return Predictor(ck).predict(raster); }

inline double validation_l1(Pix2PixModel<float>& model, const std::vector<TrainingPair>& pairs) {
  double s = 0.0;
  for (const auto& p : pairs) s += mean_abs_error(model.gen.forward(p.input, nullptr), p.target);
  return s / static_cast<double>(pairs.size());
}

namespace detail {

inline void check_pairs(const std::vector<TrainingPair>& pairs, const ModelConfig& cfg, const char* what) {
  const int side = cfg.gen.image_size();
  for (const auto& p : pairs) {
    if (p.input.c != cfg.gen.input_channels || p.input.h != side || p.input.w != side) {
      throw ShapeError(std::string(what) + " input " + p.input.shape_str() + " does not match the model (" +
                       std::to_string(cfg.gen.input_channels) + "x" + std::to_string(side) + "x" + std::to_string(side) + ")");
    }
    if (p.target.c != cfg.gen.output_channels || p.target.h != side || p.target.w != side) {
      throw ShapeError(std::string(what) + " target " + p.target.shape_str() + " does not match the model");
    }
  }
}

}  // namespace detail

// Per sample: one discriminator update on (real, detached fake), then one
// generator update against the freshly updated discriminator.
inline TrainResult train(const std::vector<TrainingPair>& data, const std::vector<TrainingPair>& validation,
                         const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  model_cfg.validate();
  if (data.empty()) throw InvalidArgument("training set is empty");
  if (model_cfg.gen.input_channels != channel_count(cfg.mode)) {
    throw InvalidArgument("model input channels do not match channel mode " + std::string(to_string(cfg.mode)));
  }
  detail::check_pairs(data, model_cfg, "training");
  detail::check_pairs(validation, model_cfg, "validation");

  Pix2PixModel<float> model(model_cfg);
  model.init(cfg.seed);
  Adam<float> opt_g(model.gen.params(), {cfg.learning_rate, cfg.adam_beta1});
  Adam<float> opt_d(model.disc.params(), {cfg.learning_rate, cfg.adam_beta1});
  Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  Rng dropout_rng(cfg.seed ^ 0xD1B54A32D192ED03ull);

  TrainResult result;
  result.last = make_checkpoint(model, 0, std::numeric_limits<double>::quiet_NaN());
  result.best = result.last;
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    std::size_t step = 0;
    for (std::size_t idx : order) {
      const TrainingPair& pair = data[idx];
      nn::Tensor<float> fake = model.gen.forward(pair.input, &dropout_rng);

      opt_d.zero_grad();
      const auto d_real = model.disc.forward(pair.input, pair.target);
      const auto real_part = bce_with_logits(d_real, 1.0);
      nn::Tensor<float> g_real = real_part.grad;
      for (auto& g : g_real.data) g *= 0.5f;
      model.disc.backward(g_real);
      const auto d_fake = model.disc.forward(pair.input, fake);
      const auto fake_part = bce_with_logits(d_fake, 0.0);
      nn::Tensor<float> g_fake = fake_part.grad;
      for (auto& g : g_fake.data) g *= 0.5f;
      model.disc.backward(g_fake);
      const double d_loss = 0.5 * (real_part.value + fake_part.value);
      opt_d.step();

      opt_g.zero_grad();
      const auto d_fake_for_g = model.disc.forward(pair.input, fake);
      const auto gl = generator_loss(d_fake_for_g, fake, pair.target, cfg.lambda_l1);
      nn::Tensor<float> dfake = model.disc.backward(gl.grad_logits);
      for (std::size_t i = 0; i < dfake.data.size(); ++i) dfake.data[i] += gl.grad_fake.data[i];
      model.gen.backward(dfake);
      opt_g.step();

      if (!std::isfinite(d_loss) || !std::isfinite(gl.value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                            " (sample " + std::to_string(idx) + "): d_loss=" + std::to_string(d_loss) +
                            " g_loss=" + std::to_string(gl.value));
      }
      log.d_loss += d_loss;
      log.g_loss += gl.value;
      log.g_l1 += gl.l1;
      ++step;
    }
    const double n = static_cast<double>(data.size());
    log.d_loss /= n;
    log.g_loss /= n;
    log.g_l1 /= n;
    if (!validation.empty()) log.val_l1 = validation_l1(model, validation);
    result.log.push_back(log);
    if (!validation.empty() && log.val_l1 < best_val) {
      best_val = log.val_l1;
      result.best = make_checkpoint(model, epoch, log.val_l1);
    }
    if (on_epoch) on_epoch(log);
  }
  if (cfg.epochs > 0) {
    result.last = make_checkpoint(model, cfg.epochs, result.log.back().val_l1);
    if (validation.empty()) result.best = result.last;
  }
  return result;
}

}  // namespace l2p
