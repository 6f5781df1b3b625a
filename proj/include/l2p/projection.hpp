#pragma once

// Front-view rasterization of a point cloud: one reflectance channel, plus an
// optional normalized-distance channel. Nearest return wins each pixel.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "l2p/lidar_model.hpp"
#include "l2p/nn/tensor.hpp"
#include "l2p/raster.hpp"

namespace l2p {

enum class ChannelMode { ReflectanceOnly, ReflectanceAndDistance };

inline int channel_count(ChannelMode mode) {
  return mode == ChannelMode::ReflectanceOnly ? 1 : 2;
}

inline std::string_view to_string(ChannelMode mode) {
  return mode == ChannelMode::ReflectanceOnly ? "reflectance" : "reflectance_distance";
}

inline ChannelMode parse_channel_mode(std::string_view s) {
  if (s == "reflectance" || s == "1") return ChannelMode::ReflectanceOnly;
  if (s == "reflectance_distance" || s == "2") return ChannelMode::ReflectanceAndDistance;
  throw InvalidArgument("unknown channel mode '" + std::string(s) +
                        "' (expected reflectance or reflectance_distance)");
}

inline ChannelMode mode_for_channels(int channels) {
  if (channels == 1) return ChannelMode::ReflectanceOnly;
  if (channels == 2) return ChannelMode::ReflectanceAndDistance;
  throw InvalidArgument("no channel mode has " + std::to_string(channels) + " channels");
}

struct Pixel {
  int u = 0;  // column, 0 at the left edge (+h_fov/2)
  int v = 0;  // row, 0 at the top edge (+v_fov/2)
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Column/row of a direction in a W x H front-view image, or nullopt when the
// coordinate is outside the sensor envelope.
inline std::optional<Pixel> pixel_of(const SphericalCoord& s, const SensorConfig& cfg, int width, int height) {
  if (!in_fov(s, cfg)) return std::nullopt;
  const double fu = std::floor((cfg.h_fov / 2.0 - s.azimuth) / cfg.h_fov * width);
  const double fv = std::floor((cfg.v_fov / 2.0 - s.elevation) / cfg.v_fov * height);
  // |azimuth| < h_fov/2 keeps fu in [0, W) up to rounding at the far edge.
  Pixel p{static_cast<int>(std::clamp(fu, 0.0, width - 1.0)), static_cast<int>(std::clamp(fv, 0.0, height - 1.0))};
  return p;
}

inline double normalize_distance(double range, const SensorConfig& cfg) {
  return std::clamp((range - cfg.min_range) / (cfg.max_range - cfg.min_range), 0.0, 1.0);
}

inline RasterImage project_frame(const PointCloud& cloud, const SensorConfig& cfg, ChannelMode mode,
                                 int width, int height) {
  if (width < kMinRasterSide || height < kMinRasterSide) {
    throw InvalidArgument("raster dimensions must be >= 16");
  }
  const int channels = channel_count(mode);
  RasterImage img(width, height, channels);
  std::vector<double> best(img.plane_size(), std::numeric_limits<double>::infinity());
  for (const LidarPoint& p : cloud.points) {
    if (!p.valid()) throw InvalidArgument("project_frame: invalid point in cloud");
    const SphericalCoord s = cartesian_to_spherical(p);
    const auto px = pixel_of(s, cfg, width, height);
    if (!px) continue;
    const std::size_t k = static_cast<std::size_t>(px->v) * width + px->u;
    // Strict comparison: on an exact range tie the earlier point keeps the pixel.
    if (!(s.range < best[k])) continue;
    best[k] = s.range;
    img.at(0, px->v, px->u) = static_cast<float>(p.reflectance);
    if (channels == 2) img.at(1, px->v, px->u) = static_cast<float>(normalize_distance(s.range, cfg));
  }
  return img;
}

// Affine map [0,1] -> [-1,1] used at the network boundary.
inline nn::Tensor<float> to_model_range(const RasterImage& img) {
  nn::Tensor<float> t(img.channels, img.height, img.width);
  for (std::size_t i = 0; i < img.values.size(); ++i) t.data[i] = 2.0f * img.values[i] - 1.0f;
  return t;
}

// Inverse of to_model_range; values are clamped into [0,1].
inline RasterImage from_model_range(const nn::Tensor<float>& t) {
  RasterImage img(t.w, t.h, t.c);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    img.values[i] = std::clamp((t.data[i] + 1.0f) * 0.5f, 0.0f, 1.0f);
  }
  return img;
}

}  // namespace l2p
