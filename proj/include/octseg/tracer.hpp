#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "octseg/filters.hpp"
#include "octseg/grid.hpp"
#include "octseg/parallel.hpp"
#include "octseg/volume.hpp"

namespace octseg {

// ---------------------------------------------------------------------------
// Canny

struct CannyParams {
  double sigma = 1.5;   // Gaussian pre-blur; 0 disables it
  double low = 40.0;    // hysteresis thresholds on Sobel magnitude
  double high = 100.0;

  void validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("canny sigma must be >= 0");
    if (!(low >= 0.0) || !(high >= 0.0)) throw std::invalid_argument("canny thresholds must be >= 0");
    if (low > high) throw std::invalid_argument("canny low threshold exceeds high threshold");
  }
};

/// Every intermediate of the Canny pipeline, exposed for inspection.
struct CannyStages {
  Matrix blurred;
  Matrix gx;  // d/dx (first grid coordinate)
  Matrix gy;  // d/dy (second grid coordinate)
  Matrix magnitude;
  Matrix suppressed;  // magnitude after non-maximum suppression
  BinaryImage edges;
};

namespace detail {

inline long long clamp_index(long long i, long long n) { return std::clamp(i, 0LL, n - 1); }

}  // namespace detail

/// Separable Gaussian blur with replicated borders.
inline Matrix gaussian_blur(const Matrix& m, double sigma) {
  if (sigma == 0.0) return m;
  const auto half = gaussian_half_kernel(sigma);
  double norm = half[0];
  for (std::size_t d = 1; d < half.size(); ++d) norm += 2.0 * half[d];
  const long long r = static_cast<long long>(half.size()) - 1;
  const long long w = static_cast<long long>(m.nx()), h = static_cast<long long>(m.ny());
  Matrix tmp(m.nx(), m.ny()), out(m.nx(), m.ny());
  for (long long y = 0; y < h; ++y)
    for (long long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long long d = -r; d <= r; ++d) acc += half[std::llabs(d)] * m(detail::clamp_index(x + d, w), y);
      tmp(x, y) = acc / norm;
    }
  for (long long y = 0; y < h; ++y)
    for (long long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long long d = -r; d <= r; ++d) acc += half[std::llabs(d)] * tmp(x, detail::clamp_index(y + d, h));
      out(x, y) = acc / norm;
    }
  return out;
}

/// Canny edge detection: Gaussian blur, 3x3 Sobel gradients, non-maximum
/// suppression along the gradient direction quantized to 0/45/90/135
/// degrees, then double-threshold hysteresis with 8-connectivity.
///
/// Suppression keeps a pixel whose magnitude is strictly greater than the
/// neighbor on the negative side of the gradient and at least the one on
/// the positive side, so a plateau two pixels wide yields a single edge.
inline CannyStages canny(const Matrix& image, const CannyParams& params) {
  params.validate();
  CannyStages s;
  s.blurred = gaussian_blur(image, params.sigma);
  const long long w = static_cast<long long>(image.nx()), h = static_cast<long long>(image.ny());
  s.gx = Matrix(image.nx(), image.ny());
  s.gy = Matrix(image.nx(), image.ny());
  s.magnitude = Matrix(image.nx(), image.ny());
  auto b = [&](long long x, long long y) {
    return s.blurred(detail::clamp_index(x, w), detail::clamp_index(y, h));
  };
  for (long long y = 0; y < h; ++y)
    for (long long x = 0; x < w; ++x) {
      const double gx = (b(x + 1, y - 1) + 2 * b(x + 1, y) + b(x + 1, y + 1)) -
                        (b(x - 1, y - 1) + 2 * b(x - 1, y) + b(x - 1, y + 1));
      const double gy = (b(x - 1, y + 1) + 2 * b(x, y + 1) + b(x + 1, y + 1)) -
                        (b(x - 1, y - 1) + 2 * b(x, y - 1) + b(x + 1, y - 1));
      s.gx(x, y) = gx;
      s.gy(x, y) = gy;
      s.magnitude(x, y) = std::hypot(gx, gy);
    }

  s.suppressed = Matrix(image.nx(), image.ny());
  auto mag = [&](long long x, long long y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : s.magnitude(x, y);
  };
  constexpr double kPi = 3.14159265358979323846;
  for (long long y = 0; y < h; ++y)
    for (long long x = 0; x < w; ++x) {
      const double m = s.magnitude(x, y);
      if (m == 0.0) continue;
      double angle = std::atan2(s.gy(x, y), s.gx(x, y)) * 180.0 / kPi;
      if (angle < 0) angle += 180.0;
      int dx, dy;
      if (angle < 22.5 || angle >= 157.5) {
        dx = 1, dy = 0;
      } else if (angle < 67.5) {
        dx = 1, dy = 1;
      } else if (angle < 112.5) {
        dx = 0, dy = 1;
      } else {
        dx = -1, dy = 1;
      }
      if (m > mag(x - dx, y - dy) && m >= mag(x + dx, y + dy)) s.suppressed(x, y) = m;
    }

  s.edges = BinaryImage(image.nx(), image.ny(), 0);
  std::queue<std::pair<long long, long long>> q;
  for (long long y = 0; y < h; ++y)
    for (long long x = 0; x < w; ++x)
      if (s.suppressed(x, y) >= params.high && s.suppressed(x, y) > 0.0) {
        s.edges(x, y) = 1;
        q.emplace(x, y);
      }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    for (long long v = y - 1; v <= y + 1; ++v)
      for (long long u = x - 1; u <= x + 1; ++u) {
        if (u < 0 || v < 0 || u >= w || v >= h || s.edges(u, v)) continue;
        if (s.suppressed(u, v) >= params.low && s.suppressed(u, v) > 0.0) {
          s.edges(u, v) = 1;
          q.emplace(u, v);
        }
      }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Cost map

struct CostWeights {
  double canny = 0.6;   // w1
  double axial = 0.4;   // w2
  double others = 0.0;  // w3
};

/// Per-B-scan search cost, addressed (x lateral, z axial) like the B-scan.
struct CostMap {
  Matrix cost;
  CostWeights weights;
  BinaryImage canny_edges;
  Matrix axial;  // |dI/dz| of the blurred image, scaled to [0, 1]
};

/// Combines Canny edges, axial gradient strength and an optional extra
/// term into strength S = w1*Canny + w2*Axial + w3*Others, then inverts it
/// to cost C = max(S) - S so the strongest edges are cheapest.
///
/// All-zero weights are rejected, as are w1 = w2 = 0 with a missing or
/// all-zero `others` term.
inline CostMap build_cost_map(const Matrix& bscan, const CostWeights& weights,
                              const CannyParams& canny_params,
                              const Matrix* others = nullptr) {
  for (double v : {weights.canny, weights.axial, weights.others})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("cost weights must be finite and >= 0");
  if (others && !others->same_shape(bscan)) throw std::invalid_argument("others term shape mismatch");
  const bool others_nonzero =
      others && std::any_of(others->data().begin(), others->data().end(), [](double v) { return v != 0.0; });
  if (weights.canny == 0.0 && weights.axial == 0.0 && (weights.others == 0.0 || !others_nonzero))
    throw std::invalid_argument("degenerate cost weights");

  const CannyStages stages = canny(bscan, canny_params);
  CostMap map;
  map.weights = weights;
  map.canny_edges = stages.edges;
  map.axial = Matrix(bscan.nx(), bscan.ny());
  const long long w = static_cast<long long>(bscan.nx()), h = static_cast<long long>(bscan.ny());
  double max_axial = 0.0;
  for (long long x = 0; x < w; ++x)
    for (long long z = 0; z < h; ++z) {
      double g = 0.0;
      if (h > 1) {
        if (z == 0) g = stages.blurred(x, 1) - stages.blurred(x, 0);
        else if (z == h - 1) g = stages.blurred(x, z) - stages.blurred(x, z - 1);
        else g = 0.5 * (stages.blurred(x, z + 1) - stages.blurred(x, z - 1));
      }
      map.axial(x, z) = std::abs(g);
      max_axial = std::max(max_axial, std::abs(g));
    }
  if (max_axial > 0.0)
    for (double& v : map.axial.data()) v /= max_axial;

  Matrix strength(bscan.nx(), bscan.ny());
  double max_strength = 0.0;
  for (std::size_t i = 0; i < strength.size(); ++i) {
    double s = weights.canny * map.canny_edges.data()[i] + weights.axial * map.axial.data()[i];
    if (others) s += weights.others * others->data()[i];
    strength.data()[i] = s;
    max_strength = std::max(max_strength, s);
  }
  map.cost = Matrix(bscan.nx(), bscan.ny());
  for (std::size_t i = 0; i < strength.size(); ++i)
    map.cost.data()[i] = max_strength - strength.data()[i];
  return map;
}

inline CostMap build_cost_map(const Grid2<std::uint8_t>& bscan, const CostWeights& weights,
                              const CannyParams& canny_params, const Matrix* others = nullptr) {
  Matrix m(bscan.nx(), bscan.ny());
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = bscan.data()[i];
  return build_cost_map(m, weights, canny_params, others);
}

// ---------------------------------------------------------------------------
// Minimum-cost path

/// Which grid axis the path advances along.
enum class PathAxis {
  kColumnPerRow,  // one x per y: the path steps through rows
  kRowPerColumn,  // one y per x: for a B-scan, one depth per A-scan
};

/// Path with one index per step; consecutive indices differ by at most
/// kMaxPathStep.
struct BoundaryPath {
  PathAxis axis = PathAxis::kColumnPerRow;
  std::vector<std::size_t> index;
  double total_cost = 0.0;
};

inline constexpr std::size_t kMaxPathStep = 2;

/// Dynamic program over steps i with choices j:
///   t(0, j) = C(0, j)
///   t(i, j) = min_{m in [j-2, j+2]} t(i-1, m) + C(i, j)
/// with out-of-range m contributing infinity. Backtracks from the minimum
/// of the last step; every tie goes to the smaller j.
inline BoundaryPath dp_shortest_path(const Matrix& cost, PathAxis axis = PathAxis::kColumnPerRow) {
  const bool per_row = axis == PathAxis::kColumnPerRow;
  const std::size_t steps = per_row ? cost.ny() : cost.nx();
  const std::size_t choices = per_row ? cost.nx() : cost.ny();
  if (steps == 0 || choices == 0) throw std::invalid_argument("empty cost map");
  for (double v : cost.data())
    if (!std::isfinite(v)) throw std::invalid_argument("cost map holds a non-finite entry");
  auto c = [&](std::size_t i, std::size_t j) { return per_row ? cost(j, i) : cost(i, j); };

  std::vector<double> prev(choices), cur(choices);
  std::vector<std::size_t> parent(steps * choices, 0);
  for (std::size_t j = 0; j < choices; ++j) prev[j] = c(0, j);
  for (std::size_t i = 1; i < steps; ++i) {
    for (std::size_t j = 0; j < choices; ++j) {
      const std::size_t lo = j >= kMaxPathStep ? j - kMaxPathStep : 0;
      const std::size_t hi = std::min(choices - 1, j + kMaxPathStep);
      std::size_t best = lo;
      for (std::size_t m = lo + 1; m <= hi; ++m)
        if (prev[m] < prev[best]) best = m;
      cur[j] = prev[best] + c(i, j);
      parent[i * choices + j] = best;
    }
    std::swap(prev, cur);
  }
  BoundaryPath path;
  path.axis = axis;
  path.index.resize(steps);
  std::size_t j = static_cast<std::size_t>(std::min_element(prev.begin(), prev.end()) - prev.begin());
  path.total_cost = prev[j];
  for (std::size_t i = steps; i-- > 0;) {
    path.index[i] = j;
    if (i > 0) j = parent[i * choices + j];
  }
  return path;
}

// ---------------------------------------------------------------------------
// Boundary tracing over a volume

struct TraceParams {
  CostWeights weights;
  CannyParams canny;
  double smoothing_sigma = 1.0;  // across B-scans; 0 disables smoothing
  bool align = false;
  int max_shift = 6;             // per-step alignment lag bound
  std::size_t reference_column = 0;
  unsigned threads = 1;
};

struct TraceResult {
  std::vector<BoundaryPath> paths;        // per slice, one depth per A-scan, unshifted
  std::vector<std::vector<int>> shifts;   // per slice alignment shifts (empty when off)
  Surface surface;
};

/// Traces one boundary per B-scan: optional A-scan alignment, cost map,
/// minimum-cost path (one depth per A-scan), undo the alignment shifts,
/// then smooth the assembled surface across B-scans.
inline TraceResult trace_boundary(const Volume& volume, const TraceParams& params) {
  if (!(params.smoothing_sigma >= 0.0)) throw std::invalid_argument("smoothing sigma must be >= 0");
  params.canny.validate();
  const std::size_t n = volume.slices(), w = volume.width();
  const long long m = static_cast<long long>(volume.height());
  TraceResult result;
  result.paths.resize(n);
  result.shifts.resize(n);
  parallel_for(n, params.threads, [&](std::size_t y) {
    Grid2<std::uint8_t> image = volume.bscan(y);
    std::vector<int> shifts;
    if (params.align) {
      auto aligned = align_ascans_xcorr(image, params.reference_column, params.max_shift);
      image = std::move(aligned.aligned);
      shifts = std::move(aligned.shifts);
    }
    const CostMap map = build_cost_map(image, params.weights, params.canny);
    BoundaryPath path = dp_shortest_path(map.cost, PathAxis::kRowPerColumn);
    if (!shifts.empty())
      for (std::size_t x = 0; x < w; ++x) {
        const long long z = static_cast<long long>(path.index[x]) - shifts[x];
        path.index[x] = static_cast<std::size_t>(std::clamp(z, 0LL, m - 1));
      }
    result.paths[y] = std::move(path);
    result.shifts[y] = std::move(shifts);
  });

  Surface surface = volume.make_surface();
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < w; ++x) surface.set(x, y, static_cast<double>(result.paths[y].index[x]));
  result.surface = params.smoothing_sigma > 0.0 ? gaussian_smooth_across_slices(surface, params.smoothing_sigma)
                                                : std::move(surface);
  return result;
}

}  // namespace octseg
