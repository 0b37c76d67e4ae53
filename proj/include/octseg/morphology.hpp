#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "octseg/grid.hpp"

namespace octseg {

namespace detail {

inline void require_binary(const BinaryImage& img) {
  for (auto v : img.data())
    if (v > 1) throw std::invalid_argument("binary image holds a value other than 0/1");
}

}  // namespace detail

/// Zhang-Suen parallel thinning, iterated until a full pass of both
/// subiterations deletes nothing. Pixels outside the image count as 0.
///
/// Neighbors are labeled P2..P9 clockwise from north:
///   P9 P2 P3
///   P8 P1 P4
///   P7 P6 P5
/// A foreground pixel is deleted when 2 <= B(P1) <= 6, A(P1) == 1, and
///   first subiteration:  P2*P4*P6 == 0 and P4*P6*P8 == 0
///   second subiteration: P2*P4*P8 == 0 and P2*P6*P8 == 0
/// where B counts foreground neighbors and A counts 0->1 transitions in
/// the cyclic sequence P2, P3, ..., P9, P2.
inline BinaryImage zhang_suen_thin(BinaryImage img) {
  detail::require_binary(img);
  const long long w = static_cast<long long>(img.nx());
  const long long h = static_cast<long long>(img.ny());
  auto at = [&](long long x, long long y) -> int {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : img(x, y);
  };
  std::vector<std::pair<long long, long long>> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (long long y = 0; y < h; ++y)
        for (long long x = 0; x < w; ++x) {
          if (!img(x, y)) continue;
          const std::array<int, 8> p = {at(x, y - 1),     at(x + 1, y - 1), at(x + 1, y),
                                        at(x + 1, y + 1), at(x, y + 1),     at(x - 1, y + 1),
                                        at(x - 1, y),     at(x - 1, y - 1)};
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[k];
            a += (p[k] == 0 && p[(k + 1) % 8] == 1);
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const int p2 = p[0], p4 = p[2], p6 = p[4], p8 = p[6];
          const bool ok = pass == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                    : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
          if (ok) doomed.emplace_back(x, y);
        }
      for (auto [x, y] : doomed) img(x, y) = 0;
      if (!doomed.empty()) changed = true;
    }
  }
  return img;
}

/// Sets background regions that are not 4-connected to the image border
/// to foreground.
inline BinaryImage fill(const BinaryImage& img) {
  detail::require_binary(img);
  const std::size_t w = img.nx(), h = img.ny();
  BinaryImage outside(w, h, 0);
  std::queue<std::pair<std::size_t, std::size_t>> q;
  auto seed = [&](std::size_t x, std::size_t y) {
    if (img(x, y) == 0 && !outside(x, y)) {
      outside(x, y) = 1;
      q.emplace(x, y);
    }
  };
  for (std::size_t x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (std::size_t y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  BinaryImage out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = outside.data()[i] ? 0 : 1;
  return out;
}

/// Boundary extraction: keeps foreground pixels that touch the image
/// border or have a background 4-neighbor.
inline BinaryImage contour(const BinaryImage& img) {
  detail::require_binary(img);
  const std::size_t w = img.nx(), h = img.ny();
  BinaryImage out(w, h, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!img(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
      if (edge || !img(x - 1, y) || !img(x + 1, y) || !img(x, y - 1) || !img(x, y + 1))
        out(x, y) = 1;
    }
  return out;
}

/// Per-slice Zhang-Suen followed by an inter-slice pruning pass: a skeleton
/// pixel with no skeleton pixel in the 3x3 neighborhood of the same
/// position in any adjacent slice is removed. A single slice is left as is.
inline std::vector<BinaryImage> zhang_suen_thin_stack(const std::vector<BinaryImage>& slices) {
  std::vector<BinaryImage> thin;
  thin.reserve(slices.size());
  for (const auto& s : slices) thin.push_back(zhang_suen_thin(s));
  if (thin.size() < 2) return thin;

  auto supported = [&](std::size_t k, long long x, long long y) {
    const auto& img = thin[k];
    for (long long v = y - 1; v <= y + 1; ++v)
      for (long long u = x - 1; u <= x + 1; ++u)
        if (u >= 0 && v >= 0 && u < static_cast<long long>(img.nx()) &&
            v < static_cast<long long>(img.ny()) && img(u, v))
          return true;
    return false;
  };
  std::vector<BinaryImage> out = thin;
  for (std::size_t k = 0; k < thin.size(); ++k)
    for (std::size_t y = 0; y < thin[k].ny(); ++y)
      for (std::size_t x = 0; x < thin[k].nx(); ++x) {
        if (!thin[k](x, y)) continue;
        const bool below = k > 0 && supported(k - 1, x, y);
        const bool above = k + 1 < thin.size() && supported(k + 1, x, y);
        if (!below && !above) out[k](x, y) = 0;
      }
  return out;
}

}  // namespace octseg
