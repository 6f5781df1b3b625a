#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace l2p {

// Inclusive pixel rectangle.
struct BoundingBox {
  int u0 = 0;
  int v0 = 0;
  int u1 = -1;
  int v1 = -1;

  bool empty() const { return u1 < u0 || v1 < v0; }
  long area() const { return empty() ? 0 : static_cast<long>(u1 - u0 + 1) * (v1 - v0 + 1); }

  void include(int u, int v) {
    if (empty()) {
      u0 = u1 = u;
      v0 = v1 = v;
      return;
    }
    u0 = std::min(u0, u);
    u1 = std::max(u1, u);
    v0 = std::min(v0, v);
    v1 = std::max(v1, v);
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  if (a.empty() || b.empty()) return 0.0;
  const BoundingBox inter{std::max(a.u0, b.u0), std::max(a.v0, b.v0), std::min(a.u1, b.u1), std::min(a.v1, b.v1)};
  const long i = inter.area();
  const long u = a.area() + b.area() - i;
  return u > 0 ? static_cast<double>(i) / static_cast<double>(u) : 0.0;
}

struct Blob {
  BoundingBox box;
  int area = 0;
};

// 8-connected components of a row-major width x height mask.
inline std::vector<Blob> find_blobs(const std::vector<std::uint8_t>& mask, int width, int height) {
  std::vector<Blob> blobs;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<int> stack;
  for (int start = 0; start < width * height; ++start) {
    if (!mask[start] || seen[start]) continue;
    Blob blob;
    seen[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      const int u = k % width;
      const int v = k / width;
      blob.box.include(u, v);
      ++blob.area;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int nu = u + du;
          const int nv = v + dv;
          if (nu < 0 || nv < 0 || nu >= width || nv >= height) continue;
          const int n = nv * width + nu;
          if (mask[n] && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
      }
    }
    blobs.push_back(blob);
  }
  return blobs;
}

}  // namespace l2p
