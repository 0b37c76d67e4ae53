#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "octseg/grid.hpp"

namespace octseg {

// ---------------------------------------------------------------------------
// Thresholding

/// value >= threshold -> 1, else 0.
template <typename T>
BinaryImage binarize(const Grid2<T>& m, double threshold) {
  BinaryImage out(m.nx(), m.ny());
  for (std::size_t i = 0; i < m.size(); ++i)
    out.data()[i] = static_cast<double>(m.data()[i]) >= threshold ? 1 : 0;
  return out;
}

using Histogram256 = std::array<std::uint64_t, 256>;

/// Bin index of a value: nearest integer, clamped to [0, 255].
inline std::size_t histogram_bin(double v) {
  if (!(v > 0.0)) return 0;
  return static_cast<std::size_t>(std::min(255.0, std::floor(v + 0.5)));
}

template <typename T>
Histogram256 histogram256(const Grid2<T>& m) {
  Histogram256 h{};
  for (const T& v : m.data())
    if constexpr (std::floating_point<T>) {
      if (is_defined(v)) ++h[histogram_bin(v)];
    } else {
      ++h[histogram_bin(static_cast<double>(v))];
    }
  return h;
}

struct OtsuResult {
  int threshold = 0;
  bool degenerate = false;  // single populated bin
};

/// Otsu's threshold over a 256-bin histogram.
///
/// A candidate T splits the bins into [0, T) and [T, 255]; T maximizes the
/// between-class variance w0 * w1 * (mu0 - mu1)^2, ties going to the smaller
/// T. The comparison is exact: with n0, n1 the class counts and s0, s1 the
/// class intensity sums, the criterion is proportional to
/// (s0 * n1 - s1 * n0)^2 / (n0 * n1), compared by cross-multiplication in
/// 256-bit integers.
inline OtsuResult otsu_threshold(const Histogram256& h) {
  using boost::multiprecision::int256_t;
  std::uint64_t total = 0;
  std::uint64_t total_sum = 0;
  int populated = 0;
  int first_populated = 0;
  for (int b = 0; b < 256; ++b) {
    if (h[b] == 0) continue;
    if (populated++ == 0) first_populated = b;
    total += h[b];
    total_sum += h[b] * static_cast<std::uint64_t>(b);
  }
  if (total == 0) throw std::invalid_argument("otsu threshold of an empty histogram");
  if (populated == 1) return {first_populated, true};

  int best_t = -1;
  int256_t best_num = 0;
  int256_t best_den = 1;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 1; t < 256; ++t) {
    n0 += h[t - 1];
    s0 += h[t - 1] * static_cast<std::uint64_t>(t - 1);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::uint64_t s1 = total_sum - s0;
    const int256_t d = int256_t(s0) * n1 - int256_t(s1) * n0;
    const int256_t num = d * d;
    const int256_t den = int256_t(n0) * n1;
    if (best_t < 0 || num * best_den > best_num * den) {
      best_t = t;
      best_num = num;
      best_den = den;
    }
  }
  return {best_t, false};
}

template <typename T>
OtsuResult otsu_threshold(const Grid2<T>& m) {
  if (m.empty()) throw std::invalid_argument("otsu threshold of an empty matrix");
  return otsu_threshold(histogram256(m));
}

// ---------------------------------------------------------------------------
// Sliding windows

/// Window extents for 2D sliding filters. Even extents put the extra pixel
/// on the negative side: extent w covers offsets [-(w/2), w - 1 - w/2].
/// Windows are clipped at the borders.
struct Kernel2DSpec {
  std::size_t wx = 1;
  std::size_t wy = 1;

  void validate() const {
    if (wx < 1 || wy < 1) throw std::invalid_argument("window extents must be >= 1");
  }
};

namespace detail {

/// Offsets [-(extent/2), extent-1-extent/2] around i, clamped into [0, n).
inline std::size_t window_index(std::size_t i, std::size_t k, std::size_t extent, std::size_t n) {
  const long long j = static_cast<long long>(i) + static_cast<long long>(k) - static_cast<long long>(extent / 2);
  return static_cast<std::size_t>(std::clamp(j, 0LL, static_cast<long long>(n) - 1));
}

}  // namespace detail

/// Median over the window with replicated borders. NaN entries are
/// excluded from the window population; an all-NaN window yields NaN.
/// Even populations take the mean of the two middle values.
template <std::floating_point T>
Grid2<T> median_filter(const Grid2<T>& m, const Kernel2DSpec& spec) {
  spec.validate();
  Grid2<T> out(m.nx(), m.ny());
  std::vector<T> window;
  window.reserve(spec.wx * spec.wy);
  for (std::size_t y = 0; y < m.ny(); ++y) {
    for (std::size_t x = 0; x < m.nx(); ++x) {
      window.clear();
      for (std::size_t kv = 0; kv < spec.wy; ++kv) {
        const std::size_t v = detail::window_index(y, kv, spec.wy, m.ny());
        for (std::size_t ku = 0; ku < spec.wx; ++ku) {
          const T val = m(detail::window_index(x, ku, spec.wx, m.nx()), v);
          if (!std::isnan(val)) window.push_back(val);
        }
      }
      if (window.empty()) {
        out(x, y) = std::numeric_limits<T>::quiet_NaN();
        continue;
      }
      const std::size_t mid = window.size() / 2;
      std::nth_element(window.begin(), window.begin() + mid, window.end());
      T med = window[mid];
      if (window.size() % 2 == 0) {
        const T lower = *std::max_element(window.begin(), window.begin() + mid);
        med = (lower + med) / 2;
      }
      out(x, y) = med;
    }
  }
  return out;
}

inline Surface median_filter(const Surface& s, const Kernel2DSpec& spec) {
  Surface out(s.width(), s.slices(), s.depth());
  out.assign_clamped(median_filter(s.grid(), spec));
  return out;
}

namespace detail {

template <typename T, typename Pick>
Grid2<T> flat_rank(const Grid2<T>& m, std::size_t wx, std::size_t wy, Pick pick) {
  // Separable: a flat rectangular min/max is a row pass then a column pass.
  Grid2<T> tmp(m.nx(), m.ny());
  const std::size_t cx = wx / 2, cy = wy / 2;
  for (std::size_t y = 0; y < m.ny(); ++y)
    for (std::size_t x = 0; x < m.nx(); ++x) {
      const std::size_t lo = x >= cx ? x - cx : 0;
      const std::size_t hi = std::min(m.nx() - 1, x + (wx - 1 - cx));
      T v = m(lo, y);
      for (std::size_t u = lo + 1; u <= hi; ++u) v = pick(v, m(u, y));
      tmp(x, y) = v;
    }
  Grid2<T> out(m.nx(), m.ny());
  for (std::size_t y = 0; y < m.ny(); ++y) {
    const std::size_t lo = y >= cy ? y - cy : 0;
    const std::size_t hi = std::min(m.ny() - 1, y + (wy - 1 - cy));
    for (std::size_t x = 0; x < m.nx(); ++x) {
      T v = tmp(x, lo);
      for (std::size_t w = lo + 1; w <= hi; ++w) v = pick(v, tmp(x, w));
      out(x, y) = v;
    }
  }
  return out;
}

}  // namespace detail

/// Flat rectangular erosion with replicated borders.
template <typename T>
Grid2<T> erode(const Grid2<T>& m, std::size_t wx = 5, std::size_t wy = 5) {
  return detail::flat_rank(m, wx, wy, [](T a, T b) { return std::min(a, b); });
}

/// Flat rectangular dilation with replicated borders. The window is the
/// reflection of erode's, so dilate(erode(.)) is a true opening for even
/// extents as well.
template <typename T>
Grid2<T> dilate(const Grid2<T>& m, std::size_t wx = 5, std::size_t wy = 5) {
  auto flipped = [](const Grid2<T>& g) {
    Grid2<T> r(g.nx(), g.ny());
    for (std::size_t y = 0; y < g.ny(); ++y)
      for (std::size_t x = 0; x < g.nx(); ++x) r(g.nx() - 1 - x, g.ny() - 1 - y) = g(x, y);
    return r;
  };
  return flipped(detail::flat_rank(flipped(m), wx, wy, [](T a, T b) { return std::max(a, b); }));
}

template <typename T>
Grid2<T> opening(const Grid2<T>& m, std::size_t wx = 5, std::size_t wy = 5) {
  return dilate(erode(m, wx, wy), wx, wy);
}

/// White top-hat: input minus its opening. Non-negative everywhere.
template <typename T>
Grid2<T> tophat(const Grid2<T>& m, std::size_t wx = 5, std::size_t wy = 5) {
  Grid2<T> open = opening(m, wx, wy);
  Grid2<T> out(m.nx(), m.ny());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i] - open.data()[i];
  return out;
}

// ---------------------------------------------------------------------------
// Surface repair and smoothing

/// Fills every undefined entry with the value of the nearest defined entry
/// (Euclidean distance in (x, y)); ties go to smaller x, then smaller y.
inline Surface inpaint_nearest(const Surface& s) {
  if (s.defined_count() == 0) throw std::invalid_argument("cannot inpaint an all-undefined surface");
  Surface out = s;
  const long long w = static_cast<long long>(s.width());
  const long long n = static_cast<long long>(s.slices());
  const long long max_r = std::max(w, n);
  for (long long y = 0; y < n; ++y)
    for (long long x = 0; x < w; ++x) {
      if (s.defined(x, y)) continue;
      long long best_d2 = std::numeric_limits<long long>::max();
      long long bx = -1, by = -1;
      // Chebyshev rings; a ring of radius r only holds points at Euclidean
      // distance >= r, so stop once r^2 exceeds the best distance.
      for (long long r = 1; r <= max_r && r * r <= best_d2; ++r) {
        auto consider = [&](long long u, long long v) {
          if (u < 0 || v < 0 || u >= w || v >= n || !s.defined(u, v)) return;
          const long long d2 = (u - x) * (u - x) + (v - y) * (v - y);
          if (d2 < best_d2 || (d2 == best_d2 && (u < bx || (u == bx && v < by)))) {
            best_d2 = d2;
            bx = u;
            by = v;
          }
        };
        for (long long u = x - r; u <= x + r; ++u) {
          consider(u, y - r);
          consider(u, y + r);
        }
        for (long long v = y - r + 1; v <= y + r - 1; ++v) {
          consider(x - r, v);
          consider(x + r, v);
        }
      }
      out.set(x, y, s(bx, by));
    }
  return out;
}

/// Normalized truncated Gaussian weights for offsets 0..radius, radius = ceil(3 sigma).
inline std::vector<double> gaussian_half_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be > 0");
  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(radius + 1);
  for (std::size_t d = 0; d <= radius; ++d)
    w[d] = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
  return w;
}

/// Smooths each lateral position's depth sequence z(x, 0..N-1) with a 1D
/// Gaussian across slices, replicating the end slices. Undefined samples
/// drop out and the weights are renormalized over the rest; undefined
/// entries stay undefined.
inline Surface gaussian_smooth_across_slices(const Surface& s, double sigma) {
  const auto w = gaussian_half_kernel(sigma);
  const long long radius = static_cast<long long>(w.size()) - 1;
  const long long n = static_cast<long long>(s.slices());
  Matrix out(s.width(), s.slices(), kUndefined);
  for (std::size_t x = 0; x < s.width(); ++x)
    for (long long y = 0; y < n; ++y) {
      if (!s.defined(x, y)) continue;
      double acc = 0.0, norm = 0.0;
      for (long long d = -radius; d <= radius; ++d) {
        const long long v = std::clamp(y + d, 0LL, n - 1);
        if (!s.defined(x, v)) continue;
        const double k = w[static_cast<std::size_t>(std::llabs(d))];
        acc += k * s(x, v);
        norm += k;
      }
      out(x, y) = acc / norm;
    }
  Surface result(s.width(), s.slices(), s.depth());
  result.assign_clamped(out);
  return result;
}

// ---------------------------------------------------------------------------
// A-scan alignment

struct AlignmentResult {
  /// Axial shift per column: aligned(x, z) = original(x, z - shift[x]).
  std::vector<int> shifts;
  Grid2<std::uint8_t> aligned;
};

namespace detail {

template <typename T>
double normalized_xcorr(const std::vector<double>& ref, std::span<const T> col, int shift) {
  const long long m = static_cast<long long>(col.size());
  double mean_a = 0, mean_b = 0;
  std::vector<double> b(col.size());
  for (long long z = 0; z < m; ++z) {
    const long long src = std::clamp(z - shift, 0LL, m - 1);
    b[z] = static_cast<double>(col[src]);
    mean_a += ref[z];
    mean_b += b[z];
  }
  mean_a /= m;
  mean_b /= m;
  double sab = 0, saa = 0, sbb = 0;
  for (long long z = 0; z < m; ++z) {
    const double da = ref[z] - mean_a, db = b[z] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Aligns the A-scans of a B-scan (addressed (x, z)) by chained
/// cross-correlation.
///
/// Starting at `reference_column` (shift 0), each column's shift is chosen
/// within +-max_shift of its already-aligned neighbor's shift (left
/// neighbor when moving right, right neighbor when moving left) to
/// maximize the normalized cross-correlation with that neighbor's aligned
/// profile. Vacated samples replicate the column edge. Zero-variance
/// columns get shift 0 and do not become the chain's reference.
inline AlignmentResult align_ascans_xcorr(const Grid2<std::uint8_t>& bscan,
                                          std::size_t reference_column, int max_shift) {
  const std::size_t w = bscan.nx();
  const std::size_t m = bscan.ny();
  if (max_shift < 0 || 2 * static_cast<std::size_t>(max_shift) >= m)
    throw std::invalid_argument("alignment max shift must be in [0, M/2)");
  if (reference_column >= w) throw std::invalid_argument("reference column out of range");

  auto column = [&](std::size_t x) {
    std::vector<std::uint8_t> c(m);
    for (std::size_t z = 0; z < m; ++z) c[z] = bscan(x, z);
    return c;
  };
  auto has_variance = [](const std::vector<std::uint8_t>& c) {
    return std::adjacent_find(c.begin(), c.end(), std::not_equal_to<>()) != c.end();
  };
  auto shifted = [&](const std::vector<std::uint8_t>& c, int s) {
    std::vector<double> out(m);
    const long long mm = static_cast<long long>(m);
    for (long long z = 0; z < mm; ++z) out[z] = c[std::clamp(z - s, 0LL, mm - 1)];
    return out;
  };

  AlignmentResult result{std::vector<int>(w, 0), Grid2<std::uint8_t>(w, m)};
  const int limit = static_cast<int>(m / 2);

  auto sweep = [&](long long from, long long to, long long step) {
    std::optional<std::vector<double>> ref;
    int ref_shift = 0;
    {
      auto c = column(static_cast<std::size_t>(from));
      if (has_variance(c)) ref = shifted(c, 0);
    }
    for (long long x = from + step; x != to; x += step) {
      auto c = column(static_cast<std::size_t>(x));
      if (!ref || !has_variance(c)) {
        result.shifts[x] = 0;
        if (has_variance(c)) {
          ref = shifted(c, 0);
          ref_shift = 0;
        }
        continue;
      }
      std::span<const std::uint8_t> cs(c);
      int best = ref_shift;
      double best_score = -2.0;
      // Candidates ordered by |delta|, negative first, so ties keep the
      // smallest displacement.
      for (int k = 0; k <= max_shift; ++k)
        for (int sign : {-1, 1}) {
          if (k == 0 && sign == 1) continue;
          const int s = ref_shift + sign * k;
          if (s <= -limit || s >= limit) continue;
          const double score = detail::normalized_xcorr(*ref, cs, s);
          if (score > best_score) {
            best_score = score;
            best = s;
          }
        }
      result.shifts[x] = best;
      ref = shifted(c, best);
      ref_shift = best;
    }
  };
  const auto r = static_cast<long long>(reference_column);
  sweep(r, static_cast<long long>(w), 1);
  sweep(r, -1, -1);

  const long long mm = static_cast<long long>(m);
  for (std::size_t x = 0; x < w; ++x)
    for (long long z = 0; z < mm; ++z)
      result.aligned(x, z) = bscan(x, std::clamp(z - result.shifts[x], 0LL, mm - 1));
  return result;
}

}  // namespace octseg
