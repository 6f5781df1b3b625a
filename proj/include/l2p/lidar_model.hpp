#pragma once

// Points, clouds and the sensor envelope shared by the simulator and the
// projector. Frame convention: x forward, y left, z up, sensor at the origin.
// Azimuth is positive to the left, elevation positive up, both in degrees.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "l2p/binary_io.hpp"
#include "l2p/error.hpp"

namespace l2p {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct LidarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double reflectance = 0.0;

  double range() const { return std::sqrt(x * x + y * y + z * z); }

  bool valid() const {
    const double r = range();
    return std::isfinite(r) && r > 0.0 && reflectance >= 0.0 && reflectance <= 1.0;
  }
};

struct SphericalCoord {
  double azimuth = 0.0;    // (-180, 180]
  double elevation = 0.0;  // (-90, 90)
  double range = 0.0;      // > 0

  bool valid() const {
    return std::isfinite(azimuth) && std::isfinite(elevation) && std::isfinite(range) &&
           azimuth > -180.0 && azimuth <= 180.0 && elevation > -90.0 && elevation < 90.0 &&
           range > 0.0;
  }
};

struct SensorConfig {
  double h_fov = 115.0;
  double v_fov = 25.0;
  double az_res = 0.1;
  double el_res = 0.1;
  double min_range = 0.1;
  double max_range = 250.0;

  // Number of azimuth steps (columns) in the full ray grid.
  int columns() const { return static_cast<int>(std::lround(h_fov / az_res)); }
  // Number of elevation steps (rows) in the full ray grid.
  int rows() const { return static_cast<int>(std::lround(v_fov / el_res)); }

  void validate() const {
    auto integral = [](double fov, double res) {
      if (!(fov > 0.0) || !(res > 0.0)) return false;
      const double n = fov / res;
      return std::abs(n - std::round(n)) < 1e-6 && std::round(n) >= 1.0;
    };
    if (!integral(h_fov, az_res)) throw InvalidArgument("h_fov / az_res must be a positive integer");
    if (!integral(v_fov, el_res)) throw InvalidArgument("v_fov / el_res must be a positive integer");
    if (h_fov > 360.0 || v_fov >= 180.0) throw InvalidArgument("field of view out of range");
    if (!(min_range > 0.0 && min_range < max_range && std::isfinite(max_range))) {
      throw InvalidArgument("require 0 < min_range < max_range");
    }
  }

  friend bool operator==(const SensorConfig&, const SensorConfig&) = default;
};

struct PointCloud {
  std::vector<LidarPoint> points;
  std::int64_t frame_id = 0;
};

inline SphericalCoord cartesian_to_spherical(const LidarPoint& p) {
  const double r = p.range();
  if (!std::isfinite(r) || !(r > 0.0)) {
    throw InvalidArgument("cartesian_to_spherical: degenerate point (range must be finite and > 0)");
  }
  SphericalCoord s;
  s.range = r;
  s.azimuth = std::atan2(p.y, p.x) * kRadToDeg;
  if (s.azimuth <= -180.0) s.azimuth = 180.0;
  s.elevation = std::asin(std::clamp(p.z / r, -1.0, 1.0)) * kRadToDeg;
  return s;
}

inline LidarPoint spherical_to_cartesian(const SphericalCoord& s, double reflectance) {
  if (!s.valid()) throw InvalidArgument("spherical_to_cartesian: invalid spherical coordinate");
  if (!(reflectance >= 0.0 && reflectance <= 1.0)) {
    throw InvalidArgument("spherical_to_cartesian: reflectance outside [0,1]");
  }
  const double az = s.azimuth * kDegToRad;
  const double el = s.elevation * kDegToRad;
  const double horiz = s.range * std::cos(el);
  return {horiz * std::cos(az), horiz * std::sin(az), s.range * std::sin(el), reflectance};
}

// Edges of the angular window are exclusive so a direction lands in at most one cell.
inline bool in_fov(const SphericalCoord& s, const SensorConfig& cfg) {
  return std::abs(s.azimuth) < cfg.h_fov / 2.0 && std::abs(s.elevation) < cfg.v_fov / 2.0 &&
         s.range >= cfg.min_range && s.range <= cfg.max_range;
}

// ---------------------------------------------------------------------------
// Point-cloud files: "L2PC" binary and plain CSV (x,y,z,reflectance).

inline constexpr std::uint16_t kPointCloudVersion = 1;

inline std::string encode_point_cloud(const PointCloud& cloud) {
  bin::Writer w;
  w.bytes("L2PC");
  w.u16(kPointCloudVersion);
  w.u64(cloud.points.size());
  for (const auto& p : cloud.points) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
    w.f32(static_cast<float>(p.z));
    w.f32(static_cast<float>(p.reflectance));
  }
  return w.data();
}

inline void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  bin::Writer w;
  w.bytes(encode_point_cloud(cloud));
  w.save(path);
}

inline PointCloud decode_point_cloud(bin::Reader& r) {
  r.expect_magic("L2PC");
  if (r.u16() != kPointCloudVersion) r.fail("unsupported point cloud version");
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 16) r.fail("truncated file");
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    LidarPoint p;
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
    p.reflectance = r.f32();
    if (!p.valid()) r.fail("invalid point at index " + std::to_string(i));
    cloud.points.push_back(p);
  }
  return cloud;
}

inline PointCloud read_point_cloud_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  PointCloud cloud;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    double v[4];
    std::size_t pos = first;
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), v[k]);
      if (ec != std::errc{}) {
        ok = false;
        break;
      }
      pos = static_cast<std::size_t>(ptr - line.data());
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (k < 3) {
        if (pos >= line.size() || line[pos] != ',') ok = false;
        ++pos;
      }
    }
    if (ok && pos != line.size()) ok = false;
    // Header lines such as "x,y,z,reflectance" are tolerated only on line 1.
    if (!ok && line_no == 1) continue;
    if (!ok) throw ParseError(path.string() + ": malformed CSV at line " + std::to_string(line_no));
    LidarPoint p{v[0], v[1], v[2], v[3]};
    if (!p.valid()) throw ParseError(path.string() + ": invalid point at line " + std::to_string(line_no));
    cloud.points.push_back(p);
  }
  return cloud;
}

// Dispatches on extension: ".csv" is text, everything else is L2PC binary.
inline PointCloud read_point_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_point_cloud_csv(path);
  auto r = bin::Reader::from_file(path);
  return decode_point_cloud(r);
}

}  // namespace l2p
