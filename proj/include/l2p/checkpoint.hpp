#pragma once

// Serialized model parameters. "L2CK" layout (little-endian):
//   magic, u16 version,
//   config block: u32 gen_in, gen_out, gen_base, gen_depth; f64 dropout;
//                 u32 disc_in, disc_base, disc_layers; u32 epoch; f64 val_l1
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u32 dims[rank], f32 data[prod(dims)]

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "l2p/binary_io.hpp"
#include "l2p/pix2pix_model.hpp"

namespace l2p {

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> data;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  ModelConfig config;
  int epoch = 0;
  double val_l1 = std::numeric_limits<double>::quiet_NaN();
  std::vector<NamedTensor> tensors;

  // Bitwise equality; NaN validation losses compare equal to each other.
  bool same_as(const Checkpoint& o) const {
    const bool val_eq = (std::isnan(val_l1) && std::isnan(o.val_l1)) || val_l1 == o.val_l1;
    return config == o.config && epoch == o.epoch && val_eq && tensors == o.tensors;
  }
};

template <typename T>
Checkpoint make_checkpoint(Pix2PixModel<T>& model, int epoch, double val_l1) {
  Checkpoint ck{model.config, epoch, val_l1, {}};
  for (auto* p : model.params()) {
    NamedTensor t{p->name, p->dims, std::vector<float>(p->value.size())};
    for (std::size_t i = 0; i < p->value.size(); ++i) t.data[i] = static_cast<float>(p->value[i]);
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

template <typename T>
void load_parameters(Pix2PixModel<T>& model, const Checkpoint& ck) {
  if (!(ck.config == model.config)) throw InvalidArgument("checkpoint configuration does not match the model");
  auto params = model.params();
  if (params.size() != ck.tensors.size()) throw InvalidArgument("checkpoint tensor count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor& t = ck.tensors[i];
    if (t.name != params[i]->name || t.dims != params[i]->dims) {
      throw InvalidArgument("checkpoint tensor '" + t.name + "' does not match parameter '" + params[i]->name + "'");
    }
    for (std::size_t k = 0; k < t.data.size(); ++k) params[i]->value[k] = static_cast<T>(t.data[k]);
  }
}

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const Checkpoint& ck) {
  bin::Writer w;
  w.bytes("L2CK");
  w.u16(kCheckpointVersion);
  const auto& g = ck.config.gen;
  const auto& d = ck.config.disc;
  w.u32(static_cast<std::uint32_t>(g.input_channels));
  w.u32(static_cast<std::uint32_t>(g.output_channels));
  w.u32(static_cast<std::uint32_t>(g.base_filters));
  w.u32(static_cast<std::uint32_t>(g.depth));
  w.f64(g.dropout);
  w.u32(static_cast<std::uint32_t>(d.input_channels));
  w.u32(static_cast<std::uint32_t>(d.base_filters));
  w.u32(static_cast<std::uint32_t>(d.layers));
  w.u32(static_cast<std::uint32_t>(ck.epoch));
  w.f64(ck.val_l1);
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (int x : t.dims) w.u32(static_cast<std::uint32_t>(x));
    for (float v : t.data) w.f32(v);
  }
  return w.data();
}

inline Checkpoint decode_checkpoint(bin::Reader& r) {
  r.expect_magic("L2CK");
  if (r.u16() != kCheckpointVersion) r.fail("unsupported checkpoint version");
  auto small = [&](std::uint32_t v) {
    if (v > (1u << 20)) r.fail("implausible configuration value");
    return static_cast<int>(v);
  };
  Checkpoint ck;
  auto& g = ck.config.gen;
  auto& d = ck.config.disc;
  g.input_channels = small(r.u32());
  g.output_channels = small(r.u32());
  g.base_filters = small(r.u32());
  g.depth = small(r.u32());
  g.dropout = r.f64();
  d.input_channels = small(r.u32());
  d.base_filters = small(r.u32());
  d.layers = small(r.u32());
  ck.epoch = small(r.u32());
  ck.val_l1 = r.f64();
  try {
    ck.config.validate();
  } catch (const InvalidArgument& e) {
    r.fail(std::string("invalid model configuration: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  if (count > 10000) r.fail("implausible tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint32_t len = r.u32();
    if (len > 4096) r.fail("implausible tensor name length");
    t.name = std::string(r.bytes(len));
    const std::uint32_t rank = r.u32();
    if (rank > 8) r.fail("implausible tensor rank");
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(small(r.u32()));
      n *= static_cast<std::uint64_t>(t.dims.back());
    }
    if (n * 4 > r.remaining()) r.fail("truncated file");
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32();
    ck.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  bin::Writer w;
  w.bytes(encode_checkpoint(ck));
  w.save(path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto r = bin::Reader::from_file(path);
  Checkpoint ck = decode_checkpoint(r);
  // Validates names and shapes against the architecture the config describes.
  Pix2PixModel<float> probe(ck.config);
  try {
    load_parameters(probe, ck);
  } catch (const InvalidArgument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace l2p
