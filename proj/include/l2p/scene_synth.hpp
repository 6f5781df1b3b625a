#pragma once

// Synthetic driving scenes: a ground plane, yawed cuboid cars and optional
// cuboid walls. The LiDAR simulator and the camera renderer share the sensor
// origin and angular grid, so pixel (u, v) and ray (u, v) look the same way.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "l2p/blobs.hpp"
#include "l2p/error.hpp"
#include "l2p/lidar_model.hpp"
#include "l2p/random.hpp"
#include "l2p/raster.hpp"

namespace l2p {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double max_component() const { return std::max({r, g, b}); }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Cuboid resting on the ground plane, yawed about the vertical axis.
struct Cuboid {
  double center_x = 0.0;
  double center_y = 0.0;
  double yaw = 0.0;  // degrees, counter-clockwise seen from above
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;

  friend bool operator==(const Cuboid&, const Cuboid&) = default;
};

struct CarSpec {
  Cuboid body;
  Rgb body_color;
  double body_reflectance = 0.5;

  bool is_black() const { return body_reflectance <= 0.05 && body_color.max_component() <= 0.1; }
  friend bool operator==(const CarSpec&, const CarSpec&) = default;
};

struct WallSpec {
  Cuboid body;
  Rgb color;
  double reflectance = 0.5;
  friend bool operator==(const WallSpec&, const WallSpec&) = default;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  double sensor_height = 1.5;  // ground plane sits at z = -sensor_height
  std::vector<CarSpec> cars;
  std::vector<WallSpec> walls;
  double ground_reflectance = 0.3;
  Rgb ground_color{0.36, 0.36, 0.38};
  Rgb background_color{0.62, 0.76, 0.94};

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

// Car paints and their LiDAR reflectivities. Reflectivities are spread so
// the best-lit face of each paint stays separable after the cosine factor.
struct Paint {
  Rgb color;
  double reflectance;
};

inline constexpr std::array<Paint, 3> kCarPaints{{
    {{0.92, 0.92, 0.92}, 0.90},  // white
    {{0.80, 0.12, 0.10}, 0.50},  // red
    {{0.10, 0.25, 0.75}, 0.25},  // blue
}};
inline constexpr Paint kBlackPaint{{0.06, 0.06, 0.07}, 0.02};

inline constexpr std::array<Paint, 2> kWallPaints{{
    {{0.62, 0.52, 0.38}, 0.45},
    {{0.50, 0.58, 0.50}, 0.35},
}};

struct SceneParams {
  int min_cars = 1;
  int max_cars = 4;
  double black_car_probability = 0.25;
  // Placement bounds, ground-plane polar coordinates around the sensor.
  double min_distance = 6.0;
  double max_distance = 30.0;
  double max_abs_azimuth = 45.0;
  // Minimum angular gap between the azimuth extents of any two cars.
  double min_azimuth_gap = 3.0;
  double yaw_spread = 30.0;
  double wall_probability = 0.5;
  double min_wall_distance = 38.0;
  double max_wall_distance = 50.0;

  void validate(const SensorConfig& cfg) const {
    if (min_cars < 0 || max_cars < min_cars) throw InvalidArgument("invalid car count range");
    if (!(black_car_probability >= 0.0 && black_car_probability <= 1.0)) {
      throw InvalidArgument("black_car_probability must be in [0,1]");
    }
    if (!(min_distance > 0.0 && max_distance >= min_distance)) throw InvalidArgument("invalid distance bounds");
    if (!(max_abs_azimuth >= 0.0 && max_abs_azimuth < cfg.h_fov / 2.0)) {
      throw InvalidArgument("placement azimuth bound must lie inside the sensor field of view");
    }
    if (max_distance >= cfg.max_range) throw InvalidArgument("placement distance beyond sensor range");
    if (!(min_azimuth_gap >= 0.0)) throw InvalidArgument("min_azimuth_gap must be >= 0");
    if (!(wall_probability >= 0.0 && wall_probability <= 1.0)) throw InvalidArgument("wall_probability must be in [0,1]");
    if (!(min_wall_distance > max_distance + 3.0 && max_wall_distance >= min_wall_distance)) {
      throw InvalidArgument("walls must stand behind the car placement region");
    }
  }
};

inline constexpr int kMaxPlacementRetries = 1000;

namespace detail {

inline std::array<std::array<double, 2>, 4> footprint(const Cuboid& c) {
  const double cy = std::cos(c.yaw * kDegToRad);
  const double sy = std::sin(c.yaw * kDegToRad);
  std::array<std::array<double, 2>, 4> pts;
  int k = 0;
  for (double a : {-0.5, 0.5}) {
    for (double b : {-0.5, 0.5}) {
      const double lx = a * c.length;
      const double ly = b * c.width;
      pts[k++] = {c.center_x + cy * lx - sy * ly, c.center_y + sy * lx + cy * ly};
    }
  }
  return pts;
}

// Azimuth interval covered by a cuboid lying in front of the sensor.
inline std::pair<double, double> azimuth_extent(const Cuboid& c) {
  double lo = 180.0;
  double hi = -180.0;
  for (const auto& p : footprint(c)) {
    const double az = std::atan2(p[1], p[0]) * kRadToDeg;
    lo = std::min(lo, az);
    hi = std::max(hi, az);
  }
  return {lo, hi};
}

}  // namespace detail

inline SceneSpec generate_scene(std::uint64_t seed, const SceneParams& params, const SensorConfig& cfg = {}) {
  params.validate(cfg);
  Rng rng(seed);
  SceneSpec scene;
  scene.seed = seed;

  const int count = rng.between(params.min_cars, params.max_cars);
  std::vector<std::pair<double, double>> taken;
  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementRetries && !placed; ++attempt) {
      CarSpec car;
      const double dist = rng.uniform(params.min_distance, params.max_distance);
      const double az = rng.uniform(-params.max_abs_azimuth, params.max_abs_azimuth);
      car.body.center_x = dist * std::cos(az * kDegToRad);
      car.body.center_y = dist * std::sin(az * kDegToRad);
      car.body.yaw = rng.uniform(-params.yaw_spread, params.yaw_spread) + (rng.bernoulli(0.5) ? 180.0 : 0.0);
      car.body.length = rng.uniform(4.0, 4.8);
      car.body.width = rng.uniform(1.7, 1.9);
      car.body.height = rng.uniform(1.4, 1.6);
      const bool black = rng.bernoulli(params.black_car_probability);
      const Paint paint = black ? kBlackPaint : kCarPaints[rng.below(kCarPaints.size())];
      car.body_color = paint.color;
      car.body_reflectance = paint.reflectance;

      const auto [lo, hi] = detail::azimuth_extent(car.body);
      if (lo <= -cfg.h_fov / 2.0 || hi >= cfg.h_fov / 2.0) continue;
      bool clear = true;
      for (const auto& fp : detail::footprint(car.body)) {
        if (std::hypot(fp[0], fp[1]) < params.min_distance * 0.5 || fp[0] <= 0.0) clear = false;
      }
      // Disjoint azimuth extents rule out both footprint overlap and car-on-car occlusion.
      for (const auto& [tlo, thi] : taken) {
        if (lo < thi + params.min_azimuth_gap && tlo < hi + params.min_azimuth_gap) clear = false;
      }
      if (!clear) continue;
      taken.emplace_back(lo, hi);
      scene.cars.push_back(car);
      placed = true;
    }
    if (!placed) {
      throw InvalidArgument("generate_scene: could not place car " + std::to_string(n + 1) + " of " +
                            std::to_string(count) + " after " + std::to_string(kMaxPlacementRetries) +
                            " retries; placement parameters are too dense");
    }
  }

  if (rng.bernoulli(params.wall_probability)) {
    const int walls = rng.between(1, 2);
    for (int n = 0; n < walls; ++n) {
      WallSpec wall;
      const double dist = rng.uniform(params.min_wall_distance, params.max_wall_distance);
      const double az = rng.uniform(-40.0, 40.0);
      wall.body.center_x = dist * std::cos(az * kDegToRad);
      wall.body.center_y = dist * std::sin(az * kDegToRad);
      wall.body.yaw = az + 90.0 + rng.uniform(-20.0, 20.0);
      wall.body.length = rng.uniform(15.0, 35.0);
      wall.body.width = 1.0;
      wall.body.height = rng.uniform(3.0, 8.0);
      const Paint paint = kWallPaints[rng.below(kWallPaints.size())];
      wall.color = paint.color;
      wall.reflectance = paint.reflectance;
      scene.walls.push_back(wall);
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Ray casting.

enum class SurfaceKind { Ground, Car, Wall };

struct RayHit {
  double range = 0.0;
  SurfaceKind kind = SurfaceKind::Ground;
  int index = -1;            // car or wall index; -1 for ground
  std::array<double, 3> normal{0.0, 0.0, 1.0};
};

inline std::array<double, 3> direction_of(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

// Slab test of a ray from the origin against a cuboid standing on the ground.
// Returns the entry distance and the outward normal of the entry face.
inline std::optional<std::pair<double, std::array<double, 3>>> intersect_cuboid(
    const Cuboid& box, double ground_z, const std::array<double, 3>& dir) {
  const double cy = std::cos(box.yaw * kDegToRad);
  const double sy = std::sin(box.yaw * kDegToRad);
  const std::array<double, 3> center{box.center_x, box.center_y, ground_z + box.height / 2.0};
  // Ray origin and direction in the box frame.
  const std::array<double, 3> o{cy * -center[0] + sy * -center[1], -sy * -center[0] + cy * -center[1], -center[2]};
  const std::array<double, 3> d{cy * dir[0] + sy * dir[1], -sy * dir[0] + cy * dir[1], dir[2]};
  const std::array<double, 3> half{box.length / 2.0, box.width / 2.0, box.height / 2.0};

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < -half[a] || o[a] > half[a]) return std::nullopt;
      continue;
    }
    double t0 = (-half[a] - o[a]) / d[a];
    double t1 = (half[a] - o[a]) / d[a];
    double s = -1.0;  // entering through the negative face
    if (t0 > t1) {
      std::swap(t0, t1);
      s = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      axis = a;
      sign = s;
    }
    t_far = std::min(t_far, t1);
  }
  if (axis < 0 || t_near > t_far || t_near <= 0.0) return std::nullopt;
  std::array<double, 3> local{0.0, 0.0, 0.0};
  local[axis] = sign;
  const std::array<double, 3> n{cy * local[0] - sy * local[1], sy * local[0] + cy * local[1], local[2]};
  return std::make_pair(t_near, n);
}

// Nearest surface along a unit direction from the sensor origin.
inline std::optional<RayHit> cast_ray(const SceneSpec& scene, const std::array<double, 3>& dir) {
  std::optional<RayHit> best;
  const double ground_z = -scene.sensor_height;
  if (dir[2] < 0.0) {
    best = RayHit{ground_z / dir[2], SurfaceKind::Ground, -1, {0.0, 0.0, 1.0}};
  }
  auto consider = [&](const Cuboid& box, SurfaceKind kind, int index) {
    if (auto hit = intersect_cuboid(box, ground_z, dir)) {
      if (!best || hit->first < best->range) best = RayHit{hit->first, kind, index, hit->second};
    }
  };
  for (std::size_t i = 0; i < scene.cars.size(); ++i) consider(scene.cars[i].body, SurfaceKind::Car, static_cast<int>(i));
  for (std::size_t i = 0; i < scene.walls.size(); ++i) consider(scene.walls[i].body, SurfaceKind::Wall, static_cast<int>(i));
  return best;
}

inline double surface_reflectance(const SceneSpec& scene, const RayHit& hit) {
  switch (hit.kind) {
    case SurfaceKind::Car: return scene.cars[hit.index].body_reflectance;
    case SurfaceKind::Wall: return scene.walls[hit.index].reflectance;
    case SurfaceKind::Ground: break;
  }
  return scene.ground_reflectance;
}

inline Rgb surface_color(const SceneSpec& scene, const RayHit& hit) {
  switch (hit.kind) {
    case SurfaceKind::Car: return scene.cars[hit.index].body_color;
    case SurfaceKind::Wall: return scene.walls[hit.index].color;
    case SurfaceKind::Ground: break;
  }
  return scene.ground_color;
}

// Lambertian return: material reflectivity times the cosine of incidence.
inline double return_intensity(const SceneSpec& scene, const RayHit& hit, const std::array<double, 3>& dir) {
  const double cos_inc = -(dir[0] * hit.normal[0] + dir[1] * hit.normal[1] + dir[2] * hit.normal[2]);
  return std::clamp(surface_reflectance(scene, hit) * std::max(0.0, cos_inc), 0.0, 1.0);
}

// Number of rays along one grid axis when every `subsample`-th cell is fired.
inline int subsampled_count(int cells, int subsample) { return (cells + subsample - 1) / subsample; }

// Fires one ray through the centre of every subsample-th grid cell, row by row.
inline PointCloud simulate_lidar(const SceneSpec& scene, const SensorConfig& cfg, int subsample = 1) {
  cfg.validate();
  if (subsample < 1) throw InvalidArgument("subsample must be >= 1");
  PointCloud cloud;
  cloud.frame_id = static_cast<std::int64_t>(scene.seed);
  const int cols = cfg.columns();
  const int rows = cfg.rows();
  for (int j = 0; j < rows; j += subsample) {
    const double el = cfg.v_fov / 2.0 - (j + 0.5) * cfg.el_res;
    for (int i = 0; i < cols; i += subsample) {
      const double az = cfg.h_fov / 2.0 - (i + 0.5) * cfg.az_res;
      const auto dir = direction_of(az, el);
      const auto hit = cast_ray(scene, dir);
      if (!hit || hit->range < cfg.min_range || hit->range > cfg.max_range) continue;
      cloud.points.push_back({hit->range * dir[0], hit->range * dir[1], hit->range * dir[2],
                              return_intensity(scene, *hit, dir)});
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Camera rendering and ground-truth metadata.

struct CarAnnotation {
  int car_index = -1;
  BoundingBox box;
  bool is_black = false;
  Rgb color;
  int visible_pixels = 0;
  friend bool operator==(const CarAnnotation&, const CarAnnotation&) = default;
};

struct SceneMeta {
  int width = 0;
  int height = 0;
  std::vector<CarAnnotation> cars;  // only cars counted as present

  int n_g() const { return static_cast<int>(cars.size()); }
  int black_count() const {
    int n = 0;
    for (const auto& c : cars) n += c.is_black ? 1 : 0;
    return n;
  }
  friend bool operator==(const SceneMeta&, const SceneMeta&) = default;
};

// A car counts as present when its largest visible 8-connected piece has at
// least `min_pixels` pixels and that piece's box overlaps the box of all its
// visible pixels with IoU >= min_iou.
struct VisibilityRule {
  int min_pixels = 4;
  double min_iou = 0.3;
};

struct CameraFrame {
  RasterImage image;
  SceneMeta meta;
};

inline CameraFrame render_camera(const SceneSpec& scene, const SensorConfig& cfg, int width, int height,
                                 const VisibilityRule& rule = {}) {
  if (width < kMinRasterSide || height < kMinRasterSide) throw InvalidArgument("image size must be >= 16");
  CameraFrame frame{RasterImage(width, height, 3), SceneMeta{width, height, {}}};
  std::vector<int> car_id(static_cast<std::size_t>(width) * height, -1);
  for (int v = 0; v < height; ++v) {
    const double el = cfg.v_fov / 2.0 - (v + 0.5) * cfg.v_fov / height;
    for (int u = 0; u < width; ++u) {
      const double az = cfg.h_fov / 2.0 - (u + 0.5) * cfg.h_fov / width;
      const auto dir = direction_of(az, el);
      const auto hit = cast_ray(scene, dir);
      const Rgb c = hit ? surface_color(scene, *hit) : scene.background_color;
      frame.image.at(0, v, u) = static_cast<float>(c.r);
      frame.image.at(1, v, u) = static_cast<float>(c.g);
      frame.image.at(2, v, u) = static_cast<float>(c.b);
      if (hit && hit->kind == SurfaceKind::Car) car_id[static_cast<std::size_t>(v) * width + u] = hit->index;
    }
  }

  for (std::size_t i = 0; i < scene.cars.size(); ++i) {
    std::vector<std::uint8_t> mask(car_id.size(), 0);
    CarAnnotation ann;
    ann.car_index = static_cast<int>(i);
    for (std::size_t k = 0; k < car_id.size(); ++k) {
      if (car_id[k] != static_cast<int>(i)) continue;
      mask[k] = 1;
      ++ann.visible_pixels;
      ann.box.include(static_cast<int>(k % width), static_cast<int>(k / width));
    }
    if (ann.visible_pixels == 0) continue;
    const auto blobs = find_blobs(mask, width, height);
    const auto largest = std::max_element(blobs.begin(), blobs.end(),
                                          [](const Blob& a, const Blob& b) { return a.area < b.area; });
    if (largest->area < rule.min_pixels || iou(largest->box, ann.box) < rule.min_iou) continue;
    ann.is_black = scene.cars[i].is_black();
    ann.color = scene.cars[i].body_color;
    frame.meta.cars.push_back(ann);
  }
  return frame;
}

// ---------------------------------------------------------------------------
// Text serialization (key=value lines, shortest round-trip number formatting).

namespace detail {

inline std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string rgb_str(const Rgb& c) { return num(c.r) + " " + num(c.g) + " " + num(c.b); }

inline std::vector<double> parse_numbers(std::string_view s, const std::string& source, int line_no) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (pos >= s.size()) break;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
    if (ec != std::errc{}) throw ParseError(source + ": bad number at line " + std::to_string(line_no));
    out.push_back(v);
    pos = static_cast<std::size_t>(ptr - s.data());
  }
  return out;
}

inline Rgb rgb_from(const std::vector<double>& v, std::size_t at) { return {v[at], v[at + 1], v[at + 2]}; }

// Iterates "key=value" lines after a fixed first line.
template <typename F>
void parse_key_values(std::string_view text, std::string_view header, const std::string& source, F&& on_kv) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line != header) throw ParseError(source + ": missing header '" + std::string(header) + "'");
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source + ": expected key=value at line " + std::to_string(line_no));
    on_kv(std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1), line_no);
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string cuboid_str(const Cuboid& c) {
  return num(c.center_x) + " " + num(c.center_y) + " " + num(c.yaw) + " " + num(c.length) + " " + num(c.width) +
         " " + num(c.height);
}

inline Cuboid cuboid_from(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

}  // namespace detail

inline std::string format_scene(const SceneSpec& s) {
  std::string out = "l2p-scene 1\n";
  out += "seed=" + std::to_string(s.seed) + "\n";
  out += "sensor_height=" + detail::num(s.sensor_height) + "\n";
  out += "ground_reflectance=" + detail::num(s.ground_reflectance) + "\n";
  out += "ground_color=" + detail::rgb_str(s.ground_color) + "\n";
  out += "background_color=" + detail::rgb_str(s.background_color) + "\n";
  for (const auto& c : s.cars) {
    out += "car=" + detail::cuboid_str(c.body) + " " + detail::rgb_str(c.body_color) + " " +
           detail::num(c.body_reflectance) + "\n";
  }
  for (const auto& w : s.walls) {
    out += "wall=" + detail::cuboid_str(w.body) + " " + detail::rgb_str(w.color) + " " + detail::num(w.reflectance) + "\n";
  }
  return out;
}

inline SceneSpec parse_scene(std::string_view text, const std::string& source = "<scene>") {
  SceneSpec s;
  detail::parse_key_values(text, "l2p-scene 1", source, [&](std::string_view key, std::string_view val, int line_no) {
    const auto nums = detail::parse_numbers(val, source, line_no);
    auto need = [&](std::size_t n) {
      if (nums.size() != n) throw ParseError(source + ": wrong field count at line " + std::to_string(line_no));
    };
    if (key == "seed") {
      std::uint64_t seed = 0;
      auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), seed);
      if (ec != std::errc{} || ptr != val.data() + val.size()) throw ParseError(source + ": bad seed");
      s.seed = seed;
    } else if (key == "sensor_height") {
      need(1);
      s.sensor_height = nums[0];
    } else if (key == "ground_reflectance") {
      need(1);
      s.ground_reflectance = nums[0];
    } else if (key == "ground_color") {
      need(3);
      s.ground_color = detail::rgb_from(nums, 0);
    } else if (key == "background_color") {
      need(3);
      s.background_color = detail::rgb_from(nums, 0);
    } else if (key == "car") {
      need(10);
      s.cars.push_back({detail::cuboid_from(nums), detail::rgb_from(nums, 6), nums[9]});
    } else if (key == "wall") {
      need(10);
      s.walls.push_back({detail::cuboid_from(nums), detail::rgb_from(nums, 6), nums[9]});
    } else {
      throw ParseError(source + ": unknown key '" + std::string(key) + "' at line " + std::to_string(line_no));
    }
  });
  return s;
}

inline std::string format_meta(const SceneMeta& m) {
  std::string out = "l2p-meta 1\n";
  out += "width=" + std::to_string(m.width) + "\n";
  out += "height=" + std::to_string(m.height) + "\n";
  out += "n_g=" + std::to_string(m.n_g()) + "\n";
  for (const auto& c : m.cars) {
    out += "car=" + std::to_string(c.car_index) + " " + std::to_string(c.box.u0) + " " + std::to_string(c.box.v0) + " " +
           std::to_string(c.box.u1) + " " + std::to_string(c.box.v1) + " " + (c.is_black ? "1" : "0") + " " +
           detail::rgb_str(c.color) + " " + std::to_string(c.visible_pixels) + "\n";
  }
  return out;
}

inline SceneMeta parse_meta(std::string_view text, const std::string& source = "<meta>") {
  SceneMeta m;
  int declared = -1;
  detail::parse_key_values(text, "l2p-meta 1", source, [&](std::string_view key, std::string_view val, int line_no) {
    const auto nums = detail::parse_numbers(val, source, line_no);
    auto integer = [&](double v) {
      if (v != std::floor(v) || std::abs(v) > 1e9) throw ParseError(source + ": expected integer at line " + std::to_string(line_no));
      return static_cast<int>(v);
    };
    if (key == "width" && nums.size() == 1) {
      m.width = integer(nums[0]);
    } else if (key == "height" && nums.size() == 1) {
      m.height = integer(nums[0]);
    } else if (key == "n_g" && nums.size() == 1) {
      declared = integer(nums[0]);
    } else if (key == "car" && nums.size() == 10) {
      CarAnnotation c;
      c.car_index = integer(nums[0]);
      c.box = {integer(nums[1]), integer(nums[2]), integer(nums[3]), integer(nums[4])};
      c.is_black = integer(nums[5]) != 0;
      c.color = detail::rgb_from(nums, 6);
      c.visible_pixels = integer(nums[9]);
      m.cars.push_back(c);
    } else {
      throw ParseError(source + ": unexpected entry at line " + std::to_string(line_no));
    }
  });
  if (declared != m.n_g()) throw ParseError(source + ": n_g does not match the number of car boxes");
  if (m.width < 1 || m.height < 1) throw ParseError(source + ": missing image size");
  return m;
}

inline void write_scene(const std::filesystem::path& path, const SceneSpec& s) { detail::write_text_file(path, format_scene(s)); }
inline SceneSpec read_scene(const std::filesystem::path& path) {
  return parse_scene(detail::read_text_file(path), path.string());
}
inline void write_meta(const std::filesystem::path& path, const SceneMeta& m) { detail::write_text_file(path, format_meta(m)); }
inline SceneMeta read_meta(const std::filesystem::path& path) {
  return parse_meta(detail::read_text_file(path), path.string());
}

}  // namespace l2p
