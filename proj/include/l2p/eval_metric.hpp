#pragma once

// Car-presence score: the mean over image pairs of (cars detected in the
// prediction) / (cars present in the ground truth), each ratio capped at 1.
// Pairs without ground-truth cars are left out of the mean.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "l2p/blobs.hpp"
#include "l2p/error.hpp"
#include "l2p/raster.hpp"
#include "l2p/scene_synth.hpp"

namespace l2p {

struct PairCounts {
  int n_p = 0;
  int n_g = 0;
};

struct PairScore {
  std::string id;
  int n_p = 0;
  int n_g = 0;
  double ratio = std::numeric_limits<double>::quiet_NaN();  // NaN when excluded (n_g == 0)
  int black_g = 0;
  int black_p = 0;
};

struct EvalReport {
  int m = 0;
  double score = 0.0;
  std::vector<PairScore> pairs;

  int black_total() const {
    int n = 0;
    for (const auto& p : pairs) n += p.black_g;
    return n;
  }
  int black_detected() const {
    int n = 0;
    for (const auto& p : pairs) n += p.black_p;
    return n;
  }
};

namespace detail {

// Neumaier-compensated sum over a fixed order.
inline double stable_sum(const std::vector<double>& xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace detail

inline EvalReport score(const std::vector<PairScore>& pairs) {
  EvalReport report;
  report.pairs = pairs;
  std::vector<double> ratios;
  for (auto& p : report.pairs) {
    if (p.n_p < 0 || p.n_g < 0) throw InvalidArgument("car counts must be non-negative (pair '" + p.id + "')");
    if (p.n_g == 0) {
      p.ratio = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    p.ratio = std::min(static_cast<double>(p.n_p) / p.n_g, 1.0);
    ratios.push_back(p.ratio);
  }
  if (ratios.empty()) throw InvalidArgument("score undefined: no pair has ground-truth cars (n_g > 0)");
  report.m = static_cast<int>(ratios.size());
  report.score = detail::stable_sum(ratios) / report.m;
  return report;
}

inline EvalReport score(const std::vector<PairCounts>& counts) {
  std::vector<PairScore> pairs;
  pairs.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    pairs.push_back({std::to_string(i), counts[i].n_p, counts[i].n_g});
  }
  return score(pairs);
}

struct DetectorConfig {
  double color_tolerance = 0.2;  // per-channel absolute difference
  int min_area = 4;              // pixels
  double iou_threshold = 0.3;

  void validate() const {
    if (!(color_tolerance >= 0.0 && color_tolerance <= 1.0)) throw InvalidArgument("color tolerance must be in [0,1]");
    if (min_area < 1) throw InvalidArgument("minimum blob area must be >= 1");
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw InvalidArgument("IoU threshold must be in (0,1]");
  }
};

// One flag per annotated car: whether a blob of its body color matches its box.
inline std::vector<bool> detect_each_car(const RasterImage& predicted, const SceneMeta& meta, const DetectorConfig& det) {
  det.validate();
  if (predicted.channels != 3) throw ShapeError("detector needs an RGB image");
  if (predicted.width != meta.width || predicted.height != meta.height) {
    throw ShapeError("predicted image is " + std::to_string(predicted.width) + "x" + std::to_string(predicted.height) +
                     " but the ground truth is " + std::to_string(meta.width) + "x" + std::to_string(meta.height));
  }
  const int w = predicted.width;
  const int h = predicted.height;
  std::map<std::array<double, 3>, std::vector<Blob>> blobs_by_color;
  std::vector<bool> found;
  for (const auto& car : meta.cars) {
    const std::array<double, 3> key{car.color.r, car.color.g, car.color.b};
    auto it = blobs_by_color.find(key);
    if (it == blobs_by_color.end()) {
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          bool match = true;
          for (int c = 0; c < 3 && match; ++c) {
            match = std::abs(static_cast<double>(predicted.at(c, v, u)) - key[c]) <= det.color_tolerance;
          }
          mask[static_cast<std::size_t>(v) * w + u] = match ? 1 : 0;
        }
      }
      it = blobs_by_color.emplace(key, find_blobs(mask, w, h)).first;
    }
    bool hit = false;
    for (const Blob& b : it->second) {
      if (b.area >= det.min_area && iou(b.box, car.box) >= det.iou_threshold) {
        hit = true;
        break;
      }
    }
    found.push_back(hit);
  }
  return found;
}

inline int detect_cars(const RasterImage& predicted, const SceneMeta& meta, const DetectorConfig& det = {}) {
  int n = 0;
  for (bool f : detect_each_car(predicted, meta, det)) n += f ? 1 : 0;
  return n;
}

inline PairScore count_pair(const std::string& id, const RasterImage& predicted, const SceneMeta& meta,
                            const DetectorConfig& det) {
  PairScore p{id, 0, meta.n_g()};
  const auto found = detect_each_car(predicted, meta, det);
  for (std::size_t i = 0; i < found.size(); ++i) {
    p.n_p += found[i] ? 1 : 0;
    if (meta.cars[i].is_black) {
      ++p.black_g;
      p.black_p += found[i] ? 1 : 0;
    }
  }
  return p;
}

inline std::string format_report_csv(const EvalReport& r) {
  std::string out = "pair_id,n_p,n_g,ratio\n";
  for (const auto& p : r.pairs) {
    out += p.id + "," + std::to_string(p.n_p) + "," + std::to_string(p.n_g) + "," +
           (std::isnan(p.ratio) ? std::string("excluded") : detail::num(p.ratio)) + "\n";
  }
  out += "# m=" + std::to_string(r.m) + " score=" + detail::num(r.score) + "\n";
  return out;
}

inline std::string summary_line(const EvalReport& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "m=%d score=%.6f", r.m, r.score);
  return buf;
}

}  // namespace l2p
