#pragma once

// Paired-sample datasets on disk:
//   <root>/manifest.txt
//   <root>/pairs/<id>.l2ri   conditioning raster
//   <root>/pairs/<id>.png    camera image, 8-bit RGB
//   <root>/pairs/<id>.meta   ground-truth car annotations

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iterator>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "l2p/projection.hpp"
#include "l2p/scene_synth.hpp"

namespace l2p {

struct PairedSample {
  std::string id;
  std::string split = "train";  // "train" or "test"
  std::uint64_t seed = 0;
  std::string input;   // paths relative to the manifest directory
  std::string target;
  std::string meta;
  friend bool operator==(const PairedSample&, const PairedSample&) = default;
};

struct DatasetManifest {
  int version = 1;
  ChannelMode mode = ChannelMode::ReflectanceAndDistance;
  int width = 64;
  int height = 64;
  SensorConfig sensor;
  int subsample = 4;
  std::uint64_t base_seed = 0;
  std::vector<PairedSample> entries;
  std::filesystem::path root;  // directory holding manifest.txt; not serialized

  std::vector<PairedSample> split_entries(std::string_view which) const {
    std::vector<PairedSample> out;
    for (const auto& e : entries) {
      if (e.split == which) out.push_back(e);
    }
    return out;
  }

  // Throws on duplicate ids, unknown split names or train/test seed overlap.
  void validate() const {
    std::vector<std::string> ids;
    std::vector<std::uint64_t> train_seeds, test_seeds;
    for (const auto& e : entries) {
      if (e.split != "train" && e.split != "test") throw InvalidArgument("entry '" + e.id + "' has unknown split '" + e.split + "'");
      ids.push_back(e.id);
      (e.split == "train" ? train_seeds : test_seeds).push_back(e.seed);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InvalidArgument("duplicate pair ids in manifest");
    std::sort(train_seeds.begin(), train_seeds.end());
    std::sort(test_seeds.begin(), test_seeds.end());
    std::vector<std::uint64_t> common;
    std::set_intersection(train_seeds.begin(), train_seeds.end(), test_seeds.begin(), test_seeds.end(),
                          std::back_inserter(common));
    if (!common.empty()) throw InvalidArgument("train and test splits share scene seeds");
  }
};

struct DatasetOptions {
  int count = 10;
  std::uint64_t seed = 0;
  SceneParams scene;
  SensorConfig sensor;
  ChannelMode mode = ChannelMode::ReflectanceAndDistance;
  int size = 64;
  int subsample = 4;
};

// Worker count from L2P_THREADS (default: hardware concurrency); L2P_DETERMINISTIC=1 forces one.
inline unsigned worker_threads() {
  if (const char* det = std::getenv("L2P_DETERMINISTIC"); det != nullptr && std::string(det) == "1") return 1;
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("L2P_THREADS"); cap != nullptr) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

// Runs fn(i) for i in [0, n) on a small pool; the first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::string pair_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%06zu", index);
  return buf;
}

struct RenderedPair {
  RasterImage input;
  RasterImage target;
  SceneMeta meta;
};

// Scene -> LiDAR frame -> front-view raster, plus the co-located camera image.
inline RenderedPair render_pair(const SceneSpec& scene, const SensorConfig& sensor, ChannelMode mode, int size,
                                int subsample) {
  const PointCloud cloud = simulate_lidar(scene, sensor, subsample);
  CameraFrame cam = render_camera(scene, sensor, size, size);
  return {project_frame(cloud, sensor, mode, size, size), std::move(cam.image), std::move(cam.meta)};
}

inline std::string format_manifest(const DatasetManifest& m) {
  std::string out = "l2p-manifest " + std::to_string(m.version) + "\n";
  out += "mode=" + std::string(to_string(m.mode)) + "\n";
  out += "width=" + std::to_string(m.width) + "\n";
  out += "height=" + std::to_string(m.height) + "\n";
  const auto& s = m.sensor;
  out += "sensor=" + detail::num(s.h_fov) + " " + detail::num(s.v_fov) + " " + detail::num(s.az_res) + " " +
         detail::num(s.el_res) + " " + detail::num(s.min_range) + " " + detail::num(s.max_range) + "\n";
  out += "subsample=" + std::to_string(m.subsample) + "\n";
  out += "base_seed=" + std::to_string(m.base_seed) + "\n";
  for (const auto& e : m.entries) {
    out += "entry=" + e.id + " " + e.split + " " + std::to_string(e.seed) + " " + e.input + " " + e.target + " " + e.meta + "\n";
  }
  return out;
}

inline DatasetManifest parse_manifest(std::string_view text, const std::string& source) {
  DatasetManifest m;
  detail::parse_key_values(text, "l2p-manifest 1", source, [&](std::string_view key, std::string_view val, int line_no) {
    auto bad = [&]() { throw ParseError(source + ": malformed '" + std::string(key) + "' at line " + std::to_string(line_no)); };
    auto to_u64 = [&](std::string_view s) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) bad();
      return v;
    };
    if (key == "mode") {
      try {
        m.mode = parse_channel_mode(val);
      } catch (const InvalidArgument&) {
        bad();
      }
    } else if (key == "width") {
      m.width = static_cast<int>(to_u64(val));
    } else if (key == "height") {
      m.height = static_cast<int>(to_u64(val));
    } else if (key == "subsample") {
      m.subsample = static_cast<int>(to_u64(val));
    } else if (key == "base_seed") {
      m.base_seed = to_u64(val);
    } else if (key == "sensor") {
      const auto v = detail::parse_numbers(val, source, line_no);
      if (v.size() != 6) bad();
      m.sensor = {v[0], v[1], v[2], v[3], v[4], v[5]};
    } else if (key == "entry") {
      std::vector<std::string> f;
      std::size_t pos = 0;
      while (pos <= val.size()) {
        const auto sp = val.find(' ', pos);
        f.emplace_back(val.substr(pos, sp == std::string_view::npos ? std::string_view::npos : sp - pos));
        if (sp == std::string_view::npos) break;
        pos = sp + 1;
      }
      if (f.size() != 6) bad();
      m.entries.push_back({f[0], f[1], to_u64(f[2]), f[3], f[4], f[5]});
    } else {
      bad();
    }
  });
  try {
    m.sensor.validate();
    m.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (m.width < kMinRasterSide || m.height < kMinRasterSide) throw ParseError(source + ": image size must be >= 16");
  return m;
}

inline void write_manifest(const DatasetManifest& m) {
  detail::write_text_file(m.root / "manifest.txt", format_manifest(m));
}

// Accepts the manifest file itself or the dataset directory.
inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "manifest.txt" : path;
  DatasetManifest m = parse_manifest(detail::read_text_file(file), file.string());
  m.root = file.parent_path();
  return m;
}

// Generates, renders and writes `count` pairs with scene seeds seed + i.
// Every entry starts in the "train" split.
inline DatasetManifest build_dataset(const DatasetOptions& opt, const std::filesystem::path& out_dir) {
  if (opt.count < 2) throw InvalidArgument("dataset needs at least 2 pairs");
  if (opt.size < kMinRasterSide) throw InvalidArgument("image size must be >= 16");
  if (opt.subsample < 1) throw InvalidArgument("subsample must be >= 1");
  opt.sensor.validate();
  opt.scene.validate(opt.sensor);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "pairs", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "pairs").string() + ": " + ec.message());

  DatasetManifest m;
  m.mode = opt.mode;
  m.width = m.height = opt.size;
  m.sensor = opt.sensor;
  m.subsample = opt.subsample;
  m.base_seed = opt.seed;
  m.root = out_dir;
  m.entries.resize(static_cast<std::size_t>(opt.count));

  parallel_for(m.entries.size(), [&](std::size_t i) {
    PairedSample& e = m.entries[i];
    e.id = pair_id(i);
    e.seed = opt.seed + i;
    e.input = "pairs/" + e.id + ".l2ri";
    e.target = "pairs/" + e.id + ".png";
    e.meta = "pairs/" + e.id + ".meta";
    const SceneSpec scene = generate_scene(e.seed, opt.scene, opt.sensor);
    const RenderedPair pair = render_pair(scene, opt.sensor, opt.mode, opt.size, opt.subsample);
    write_raster(out_dir / e.input, pair.input);
    write_png(out_dir / e.target, pair.target);
    write_meta(out_dir / e.meta, pair.meta);
  });
  write_manifest(m);
  return m;
}

// Deterministic seeded partition; round(n * test_fraction) entries go to test.
inline DatasetManifest split(DatasetManifest m, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must be in (0,1)");
  const std::size_t n = m.entries.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test >= n) {
    throw InvalidArgument("test fraction " + detail::num(test_fraction) + " leaves an empty split for " +
                          std::to_string(n) + " pair(s)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  for (std::size_t k = 0; k < n; ++k) m.entries[order[k]].split = k < n_test ? "test" : "train";
  m.validate();
  return m;
}

struct LoadedPair {
  RasterImage input;
  RasterImage target;
  SceneMeta meta;
};

inline LoadedPair load_pair(const DatasetManifest& m, const PairedSample& e) {
  LoadedPair p{read_raster(m.root / e.input), read_png(m.root / e.target, 3), read_meta(m.root / e.meta)};
  if (p.input.channels != channel_count(m.mode)) {
    throw ParseError((m.root / e.input).string() + ": has " + std::to_string(p.input.channels) +
                     " channel(s), manifest mode is " + std::string(to_string(m.mode)));
  }
  if (p.input.width != p.target.width || p.input.height != p.target.height) {
    throw ParseError((m.root / e.target).string() + ": size differs from the input raster");
  }
  if (p.meta.width != p.target.width || p.meta.height != p.target.height) {
    throw ParseError((m.root / e.meta).string() + ": size differs from the target image");
  }
  return p;
}

}  // namespace l2p
