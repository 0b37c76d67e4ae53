#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "octseg/grid.hpp"
#include "octseg/parallel.hpp"

namespace octseg {

/// Dense 3D OCT intensity volume.
///
/// Axes: x lateral (width W, A-scans per B-scan), z axial depth (height M,
/// samples per A-scan), y B-scan index (N slices). Storage keeps every
/// A-scan contiguous: index = (y * W + x) * M + z. Intensities are 8-bit.
class Volume {
 public:
  using value_type = std::uint8_t;
  static constexpr int kMaxIntensity = 255;

  Volume() = default;
  Volume(std::size_t width, std::size_t height, std::size_t slices, value_type fill = 0)
      : width_(width), height_(height), slices_(slices), data_(width * height * slices, fill) {
    if (width == 0 || height == 0 || slices == 0)
      throw std::invalid_argument("volume dimensions must be >= 1");
  }

  std::size_t width() const noexcept { return width_; }    // W
  std::size_t height() const noexcept { return height_; }  // M
  std::size_t slices() const noexcept { return slices_; }  // N
  std::size_t voxel_count() const noexcept { return data_.size(); }

  value_type operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[index(x, y, z)];
  }
  value_type& operator()(std::size_t x, std::size_t y, std::size_t z) noexcept {
    return data_[index(x, y, z)];
  }

  std::span<const value_type> ascan(std::size_t x, std::size_t y) const noexcept {
    return std::span<const value_type>(data_).subspan((y * width_ + x) * height_, height_);
  }
  std::span<value_type> ascan(std::size_t x, std::size_t y) noexcept {
    return std::span<value_type>(data_).subspan((y * width_ + x) * height_, height_);
  }

  /// B-scan y as an image addressed (x, z).
  Grid2<value_type> bscan(std::size_t y) const {
    Grid2<value_type> out(width_, height_);
    for (std::size_t x = 0; x < width_; ++x) {
      auto a = ascan(x, y);
      for (std::size_t z = 0; z < height_; ++z) out(x, z) = a[z];
    }
    return out;
  }

  void set_bscan(std::size_t y, const Grid2<value_type>& image) {
    if (image.nx() != width_ || image.ny() != height_)
      throw std::invalid_argument("b-scan shape mismatch");
    for (std::size_t x = 0; x < width_; ++x) {
      auto a = ascan(x, y);
      for (std::size_t z = 0; z < height_; ++z) a[z] = image(x, z);
    }
  }

  std::span<const value_type> data() const noexcept { return data_; }
  std::span<value_type> data() noexcept { return data_; }

  /// Empty surface sized for this volume.
  Surface make_surface(double fill = kUndefined) const {
    return Surface(width_, slices_, height_, fill);
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return (y * width_ + x) * height_ + z;
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t slices_ = 0;
  std::vector<value_type> data_;
};

/// Smallest z attaining the maximum of each A-scan.
inline Surface max_intensity_depth(const Volume& volume, unsigned threads = 1) {
  Surface out = volume.make_surface();
  parallel_for(volume.slices(), threads, [&](std::size_t y) {
    for (std::size_t x = 0; x < volume.width(); ++x) {
      auto a = volume.ascan(x, y);
      std::size_t best = 0;
      for (std::size_t z = 1; z < a.size(); ++z)
        if (a[z] > a[best]) best = z;
      out.set(x, y, static_cast<double>(best));
    }
  });
  return out;
}

struct Voxel {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;
};

/// Local statistics of a voxel and its neighbor set.
struct NeighborhoodFeatures {
  Voxel position;
  double intensity = 0.0;
  double neighbor_mean = 0.0;
  double neighbor_variance = 0.0;
  std::array<double, 3> mean_gradient{};  // (d/dx, d/dy, d/dz)
  std::size_t neighbor_count = 0;
};

/// Neighbor connectivity used by neighborhood_features. Face neighbors only.
inline constexpr int kNeighborConnectivity = 6;

/// Central differences in the interior, one-sided at faces, zero along a
/// degenerate (size 1) axis. Component order (x, y, z).
inline std::array<double, 3> intensity_gradient(const Volume& v, const Voxel& p) {
  auto diff = [&](std::size_t i, std::size_t n, auto sample) -> double {
    if (n < 2) return 0.0;
    if (i == 0) return sample(1) - sample(0);
    if (i == n - 1) return sample(n - 1) - sample(n - 2);
    return 0.5 * (sample(i + 1) - sample(i - 1));
  };
  return {
      diff(p.x, v.width(), [&](std::size_t x) { return double(v(x, p.y, p.z)); }),
      diff(p.y, v.slices(), [&](std::size_t y) { return double(v(p.x, y, p.z)); }),
      diff(p.z, v.height(), [&](std::size_t z) { return double(v(p.x, p.y, z)); }),
  };
}

/// 6-connected neighbors of p, clipped at the volume faces.
inline std::vector<Voxel> face_neighbors(const Volume& v, const Voxel& p) {
  std::vector<Voxel> out;
  out.reserve(kNeighborConnectivity);
  if (p.x > 0) out.push_back({p.x - 1, p.y, p.z});
  if (p.x + 1 < v.width()) out.push_back({p.x + 1, p.y, p.z});
  if (p.y > 0) out.push_back({p.x, p.y - 1, p.z});
  if (p.y + 1 < v.slices()) out.push_back({p.x, p.y + 1, p.z});
  if (p.z > 0) out.push_back({p.x, p.y, p.z - 1});
  if (p.z + 1 < v.height()) out.push_back({p.x, p.y, p.z + 1});
  return out;
}

inline NeighborhoodFeatures neighborhood_features(const Volume& volume, const Voxel& p) {
  if (p.x >= volume.width() || p.y >= volume.slices() || p.z >= volume.height())
    throw std::out_of_range("voxel outside volume");

  NeighborhoodFeatures f;
  f.position = p;
  f.intensity = volume(p.x, p.y, p.z);
  const auto neighbors = face_neighbors(volume, p);
  f.neighbor_count = neighbors.size();

  f.mean_gradient = intensity_gradient(volume, p);
  if (neighbors.empty()) return f;  // 1x1x1 volume

  double sum = 0.0;
  for (const auto& n : neighbors) {
    sum += volume(n.x, n.y, n.z);
    auto g = intensity_gradient(volume, n);
    for (int k = 0; k < 3; ++k) f.mean_gradient[k] += g[k];
  }
  const double count = static_cast<double>(neighbors.size());
  f.neighbor_mean = sum / count;
  double sq = 0.0;
  for (const auto& n : neighbors) {
    const double d = volume(n.x, n.y, n.z) - f.neighbor_mean;
    sq += d * d;
  }
  f.neighbor_variance = sq / count;
  for (auto& g : f.mean_gradient) g /= count + 1.0;
  return f;
}

/// Axial runs of a volume around a surface, with the mapping back to
/// absolute depth.
class BandView {
 public:
  BandView(const Volume& volume, Grid2<std::size_t> start, Grid2<std::size_t> length)
      : volume_(&volume), start_(std::move(start)), length_(std::move(length)) {}

  std::size_t width() const noexcept { return start_.nx(); }
  std::size_t slices() const noexcept { return start_.ny(); }

  std::size_t start(std::size_t x, std::size_t y) const noexcept { return start_(x, y); }
  std::size_t length(std::size_t x, std::size_t y) const noexcept { return length_(x, y); }

  /// Band-relative sample k of column (x, y).
  std::span<const Volume::value_type> samples(std::size_t x, std::size_t y) const noexcept {
    return volume_->ascan(x, y).subspan(start_(x, y), length_(x, y));
  }
  std::size_t absolute_z(std::size_t x, std::size_t y, std::size_t k) const noexcept {
    return start_(x, y) + k;
  }

 private:
  const Volume* volume_;
  Grid2<std::size_t> start_;
  Grid2<std::size_t> length_;
};

/// Axial run [round(z) - above, round(z) + below] of every column, clipped
/// to [0, M). The surface must be fully defined.
inline BandView extract_band(const Volume& volume, const Surface& surface, std::size_t above,
                             std::size_t below) {
  if (surface.width() != volume.width() || surface.slices() != volume.slices())
    throw std::invalid_argument("surface does not match volume");
  Grid2<std::size_t> start(volume.width(), volume.slices());
  Grid2<std::size_t> length(volume.width(), volume.slices());
  const auto m = static_cast<long long>(volume.height());
  for (std::size_t y = 0; y < volume.slices(); ++y)
    for (std::size_t x = 0; x < volume.width(); ++x) {
      if (!surface.defined(x, y))
        throw std::invalid_argument("band extraction needs a fully defined surface");
      const auto c = static_cast<long long>(std::floor(surface(x, y) + 0.5));
      const long long lo = std::max(0LL, c - static_cast<long long>(above));
      const long long hi = std::min(m - 1, c + static_cast<long long>(below));
      start(x, y) = static_cast<std::size_t>(lo);
      length(x, y) = static_cast<std::size_t>(hi - lo + 1);
    }
  return BandView(volume, std::move(start), std::move(length));
}

/// Smallest absolute z attaining the maximum inside each band column.
inline Surface band_max_depth(const BandView& band, std::size_t depth) {
  Surface out(band.width(), band.slices(), depth);
  for (std::size_t y = 0; y < band.slices(); ++y)
    for (std::size_t x = 0; x < band.width(); ++x) {
      auto s = band.samples(x, y);
      std::size_t best = 0;
      for (std::size_t k = 1; k < s.size(); ++k)
        if (s[k] > s[best]) best = k;
      out.set(x, y, static_cast<double>(band.absolute_z(x, y, best)));
    }
  return out;
}

}  // namespace octseg
