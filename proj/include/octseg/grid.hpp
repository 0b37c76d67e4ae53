#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace octseg {

/// Dense 2D grid addressed as (x, y) with x contiguous.
///
/// The same type backs B-scan images (x lateral, y = z axial), surfaces
/// (x lateral, y slice) and cost maps.
template <typename T>
class Grid2 {
 public:
  using value_type = T;

  Grid2() = default;
  Grid2(std::size_t nx, std::size_t ny, T fill = T{})
      : nx_(nx), ny_(ny), data_(nx * ny, fill) {}

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) noexcept {
    assert(x < nx_ && y < ny_);
    return data_[y * nx_ + x];
  }
  const T& operator()(std::size_t x, std::size_t y) const noexcept {
    assert(x < nx_ && y < ny_);
    return data_[y * nx_ + x];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  /// Row y as a contiguous span of nx values.
  std::span<const T> row(std::size_t y) const noexcept {
    return std::span<const T>(data_).subspan(y * nx_, nx_);
  }

  bool same_shape(const Grid2<auto>& other) const noexcept {
    return nx_ == other.nx() && ny_ == other.ny();
  }

  Grid2 transposed() const {
    Grid2 out(ny_, nx_);
    for (std::size_t y = 0; y < ny_; ++y)
      for (std::size_t x = 0; x < nx_; ++x) out(y, x) = (*this)(x, y);
    return out;
  }

  friend bool operator==(const Grid2&, const Grid2&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<T> data_;
};

using Matrix = Grid2<double>;
using BinaryImage = Grid2<std::uint8_t>;

/// Sentinel for an undefined surface entry.
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double v) noexcept { return !std::isnan(v); }

/// Per-(x, y) axial depth map z(x, y) over a volume of depth M.
///
/// Defined entries always lie in [0, M); undefined entries hold NaN.
class Surface {
 public:
  Surface() = default;
  Surface(std::size_t width, std::size_t slices, std::size_t depth,
          double fill = kUndefined)
      : depth_(depth), grid_(width, slices, fill) {
    if (is_defined(fill)) check_value(fill);
  }
  /// Adopts a grid; every defined entry must lie in [0, depth).
  Surface(Matrix grid, std::size_t depth) : depth_(depth), grid_(std::move(grid)) {
    for (double v : grid_.data())
      if (is_defined(v)) check_value(v);
  }

  std::size_t width() const noexcept { return grid_.nx(); }
  std::size_t slices() const noexcept { return grid_.ny(); }
  std::size_t depth() const noexcept { return depth_; }

  double operator()(std::size_t x, std::size_t y) const noexcept { return grid_(x, y); }
  bool defined(std::size_t x, std::size_t y) const noexcept {
    return is_defined(grid_(x, y));
  }

  void set(std::size_t x, std::size_t y, double z) {
    if (is_defined(z)) check_value(z);
    grid_(x, y) = z;
  }
  void set_undefined(std::size_t x, std::size_t y) noexcept { grid_(x, y) = kUndefined; }

  std::size_t defined_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(grid_.data().begin(), grid_.data().end(),
                      [](double v) { return is_defined(v); }));
  }
  bool fully_defined() const noexcept { return defined_count() == grid_.size(); }

  const Matrix& grid() const noexcept { return grid_; }

  /// Replaces the contents, clamping defined values into [0, depth).
  void assign_clamped(const Matrix& values) {
    if (!values.same_shape(grid_)) throw std::invalid_argument("surface shape mismatch");
    const double hi = std::nextafter(static_cast<double>(depth_), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      double v = values.data()[i];
      grid_.data()[i] = is_defined(v) ? std::clamp(v, 0.0, hi) : kUndefined;
    }
  }

  friend bool operator==(const Surface& a, const Surface& b) noexcept {
    if (a.depth_ != b.depth_ || !a.grid_.same_shape(b.grid_)) return false;
    for (std::size_t i = 0; i < a.grid_.size(); ++i) {
      double u = a.grid_.data()[i], v = b.grid_.data()[i];
      if (is_defined(u) != is_defined(v) || (is_defined(u) && u != v)) return false;
    }
    return true;
  }

 private:
  void check_value(double v) const {
    if (!(v >= 0.0 && v < static_cast<double>(depth_)))
      throw std::out_of_range("surface value outside [0, depth)");
  }

  std::size_t depth_ = 0;
  Matrix grid_;
};

}  // namespace octseg
