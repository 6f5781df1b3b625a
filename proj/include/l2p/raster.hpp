#pragma once

// Multi-channel float images in [0,1], stored channel-planar (CHW), plus the
// "L2RI" binary format and 8-bit PNG import/export.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2p/binary_io.hpp"
#include "l2p/error.hpp"

namespace l2p {

inline constexpr int kMinRasterSide = 16;

struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;  // channel-major, then row-major

  RasterImage() = default;
  RasterImage(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), values(static_cast<std::size_t>(w) * h * c, fill) {
    if (w < 1 || h < 1 || c < 1) throw InvalidArgument("raster dimensions must be positive");
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int c, int v, int u) const {
    return (static_cast<std::size_t>(c) * height + v) * width + u;
  }
  float& at(int c, int v, int u) { return values[index(c, v, u)]; }
  float at(int c, int v, int u) const { return values[index(c, v, u)]; }

  // Throws unless every value lies in [0,1] and the geometry is at least 16x16.
  void validate() const {
    if (width < kMinRasterSide || height < kMinRasterSide) {
      throw InvalidArgument("raster dimensions must be >= 16");
    }
    if (channels < 1 || channels > 3) throw InvalidArgument("raster must have 1, 2 or 3 channels");
    if (values.size() != plane_size() * channels) throw InvalidArgument("raster value count mismatch");
    for (float v : values) {
      if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("raster value outside [0,1]");
    }
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// ---------------------------------------------------------------------------
// L2RI: magic, u16 version, u32 width, u32 height, u32 channels, f32 values.

inline constexpr std::uint16_t kRasterVersion = 1;

inline std::string encode_raster(const RasterImage& img) {
  bin::Writer w;
  w.bytes("L2RI");
  w.u16(kRasterVersion);
  w.u32(static_cast<std::uint32_t>(img.width));
  w.u32(static_cast<std::uint32_t>(img.height));
  w.u32(static_cast<std::uint32_t>(img.channels));
  for (float v : img.values) w.f32(v);
  return w.data();
}

inline RasterImage decode_raster(bin::Reader& r) {
  r.expect_magic("L2RI");
  if (r.u16() != kRasterVersion) r.fail("unsupported raster version");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t c = r.u32();
  if (w < kMinRasterSide || h < kMinRasterSide || w > 1u << 15 || h > 1u << 15 || c < 1 || c > 3) {
    r.fail("implausible raster header");
  }
  const std::uint64_t n = std::uint64_t{w} * h * c;
  if (r.remaining() != n * 4) r.fail(r.remaining() < n * 4 ? "truncated file" : "trailing bytes");
  RasterImage img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (auto& v : img.values) {
    v = r.f32();
    if (!(v >= 0.0f && v <= 1.0f)) r.fail("raster value outside [0,1]");
  }
  return img;
}

inline void write_raster(const std::filesystem::path& path, const RasterImage& img) {
  bin::Writer w;
  w.bytes(encode_raster(img));
  w.save(path);
}

inline RasterImage read_raster(const std::filesystem::path& path) {
  auto r = bin::Reader::from_file(path);
  return decode_raster(r);
}

// ---------------------------------------------------------------------------
// 8-bit PNG. One channel is written as gray, three as RGB; two-channel
// rasters must be split with channel_preview first.

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline RasterImage channel_preview(const RasterImage& img, int channel) {
  if (channel < 0 || channel >= img.channels) throw InvalidArgument("channel index out of range");
  RasterImage out(img.width, img.height, 1);
  std::copy_n(img.values.begin() + static_cast<std::ptrdiff_t>(img.plane_size() * channel),
              img.plane_size(), out.values.begin());
  return out;
}

inline void write_png(const std::filesystem::path& path, const RasterImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidArgument("PNG export needs 1 or 3 channels");
  }
  std::vector<std::uint8_t> pixels(img.plane_size() * img.channels);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      for (int c = 0; c < img.channels; ++c) {
        pixels[(static_cast<std::size_t>(v) * img.width + u) * img.channels + c] = to_byte(img.at(c, v, u));
      }
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("PNG write failed for " + path.string() + ": " + msg);
  }
}

// Reads an 8-bit PNG as RGB (channels = 3) or gray (channels = 1).
inline RasterImage read_png(const std::filesystem::path& path, int channels = 3) {
  if (channels != 1 && channels != 3) throw InvalidArgument("PNG import needs 1 or 3 channels");
  if (!std::filesystem::exists(path)) throw IoError("cannot open for reading: " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ParseError(path.string() + ": " + image.message);
  }
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  if (w < 1 || h < 1 || w > 1 << 15 || h > 1 << 15) {
    png_image_free(&image);
    throw ParseError(path.string() + ": implausible PNG size");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ParseError(path.string() + ": " + msg);
  }
  RasterImage img(w, h, channels);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      for (int c = 0; c < channels; ++c) {
        img.at(c, v, u) = pixels[(static_cast<std::size_t>(v) * w + u) * channels + c] / 255.0f;
      }
    }
  }
  return img;
}

// Rounds every value to the nearest 8-bit level, i.e. what a PNG round trip yields.
inline RasterImage quantize_8bit(RasterImage img) {
  for (auto& v : img.values) v = to_byte(v) / 255.0f;
  return img;
}

}  // namespace l2p
