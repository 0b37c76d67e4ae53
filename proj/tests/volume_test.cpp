#include <gtest/gtest.h>

#include <random>

#include "octseg/volume.hpp"

namespace octseg {
namespace {

Volume random_volume(std::size_t w, std::size_t m, std::size_t n, unsigned seed) {
  Volume v(w, m, n);
  std::mt19937 rng(seed);
  for (auto& x : v.data()) x = static_cast<Volume::value_type>(rng() % 256);
  return v;
}

TEST(Volume, RejectsEmptyDimensions) {
  EXPECT_THROW(Volume(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(Volume(1, 1, 0), std::invalid_argument);
}

TEST(Volume, AscanIsContiguousAlongZ) {
  Volume v(3, 4, 2);
  v(2, 1, 3) = 77;
  EXPECT_EQ(v.ascan(2, 1)[3], 77);
  EXPECT_EQ(v.bscan(1)(2, 3), 77);
}

TEST(MaxIntensityDepth, ConstantVolumeTiesToShallowest) {
  Volume v(4, 8, 3, 10);
  const Surface s = max_intensity_depth(v);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(s(x, y), 0.0);
}

TEST(MaxIntensityDepth, BrightPlane) {
  Volume v(5, 300, 2, 20);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 5; ++x) v(x, y, 150) = 200;
  const Surface s = max_intensity_depth(v);
  EXPECT_TRUE(s.fully_defined());
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(s(x, y), 150.0);
}

TEST(MaxIntensityDepth, MatchesExhaustiveScan) {
  const Volume v = random_volume(4, 8, 4, 3);
  const Surface s = max_intensity_depth(v, 3);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      std::size_t best = 0;
      for (std::size_t z = 0; z < 8; ++z)
        if (v(x, y, z) > v(x, y, best)) best = z;
      EXPECT_EQ(s(x, y), static_cast<double>(best));
    }
}

TEST(MaxIntensityDepth, InvariantUnderStrictlyMonotoneRemap) {
  Volume v = random_volume(6, 16, 3, 11);
  for (auto& x : v.data()) x = static_cast<Volume::value_type>(x / 2);  // [0, 127]
  const Surface before = max_intensity_depth(v);
  Volume affine = v, squared = v;
  for (auto& x : affine.data()) x = static_cast<Volume::value_type>(2 * x + 1);
  for (auto& x : squared.data()) x = static_cast<Volume::value_type>((x * x) / 127 + x);  // strictly increasing, <= 254
  EXPECT_EQ(max_intensity_depth(affine), before);
  EXPECT_EQ(max_intensity_depth(squared), before);
}

TEST(NeighborhoodFeatures, ConstantVolume) {
  Volume v(5, 5, 5, 42);
  const auto f = neighborhood_features(v, {2, 2, 2});
  EXPECT_EQ(f.neighbor_count, 6u);
  EXPECT_DOUBLE_EQ(f.neighbor_mean, 42.0);
  EXPECT_DOUBLE_EQ(f.neighbor_variance, 0.0);
  for (double g : f.mean_gradient) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(NeighborhoodFeatures, AxialRamp) {
  Volume v(5, 6, 5);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x)
      for (std::size_t z = 0; z < 6; ++z) v(x, y, z) = static_cast<Volume::value_type>(z);
  const auto f = neighborhood_features(v, {2, 2, 3});
  EXPECT_DOUBLE_EQ(f.neighbor_mean, 3.0);
  // Neighbors: z-1, z+1 and four at z: ((-1)^2 + 1^2) / 6.
  EXPECT_DOUBLE_EQ(f.neighbor_variance, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(f.mean_gradient[0], 0.0);
  EXPECT_DOUBLE_EQ(f.mean_gradient[1], 0.0);
  EXPECT_DOUBLE_EQ(f.mean_gradient[2], 1.0);
}

TEST(NeighborhoodFeatures, LinearFieldGradientIsExactInInterior) {
  Volume v(6, 6, 6);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x)
      for (std::size_t z = 0; z < 6; ++z) v(x, y, z) = static_cast<Volume::value_type>(3 * x + 2 * y + 5 * z);
  for (std::size_t c = 2; c <= 3; ++c) {
    const auto f = neighborhood_features(v, {c, c, c});
    EXPECT_DOUBLE_EQ(f.mean_gradient[0], 3.0);
    EXPECT_DOUBLE_EQ(f.mean_gradient[1], 2.0);
    EXPECT_DOUBLE_EQ(f.mean_gradient[2], 5.0);
  }
}

TEST(NeighborhoodFeatures, RandomCenterMatchesScalarRecomputation) {
  const Volume v = random_volume(3, 3, 3, 5);
  const auto f = neighborhood_features(v, {1, 1, 1});
  const double n[6] = {double(v(0, 1, 1)), double(v(2, 1, 1)), double(v(1, 0, 1)),
                       double(v(1, 2, 1)), double(v(1, 1, 0)), double(v(1, 1, 2))};
  double mean = 0;
  for (double a : n) mean += a;
  mean /= 6;
  double var = 0;
  for (double a : n) var += (a - mean) * (a - mean);
  var /= 6;
  EXPECT_NEAR(f.neighbor_mean, mean, 1e-12);
  EXPECT_NEAR(f.neighbor_variance, var, 1e-9);

  // Gradient average over the center and its six neighbors, each by central
  // or one-sided differences.
  auto g = [&](int x, int y, int z, int axis) {
    int p[3] = {x, y, z};
    auto at = [&](int k) {
      int q[3] = {p[0], p[1], p[2]};
      q[axis] = k;
      return double(v(q[0], q[1], q[2]));
    };
    int i = p[axis];
    if (i == 0) return at(1) - at(0);
    if (i == 2) return at(2) - at(1);
    return 0.5 * (at(2) - at(0));
  };
  const int pts[7][3] = {{1, 1, 1}, {0, 1, 1}, {2, 1, 1}, {1, 0, 1}, {1, 2, 1}, {1, 1, 0}, {1, 1, 2}};
  for (int axis = 0; axis < 3; ++axis) {
    double acc = 0;
    for (auto& p : pts) acc += g(p[0], p[1], p[2], axis);
    EXPECT_NEAR(f.mean_gradient[axis], acc / 7.0, 1e-12);
  }
}

TEST(NeighborhoodFeatures, FaceVoxelUsesClippedSet) {
  Volume v(3, 3, 3, 1);
  const auto f = neighborhood_features(v, {0, 0, 0});
  EXPECT_EQ(f.neighbor_count, 3u);
  EXPECT_THROW(neighborhood_features(v, {3, 0, 0}), std::out_of_range);
}

TEST(ExtractBand, PinnedBandAroundConstantSurface) {
  Volume v(4, 300, 2);
  const Surface s = v.make_surface(100.0);
  const BandView b = extract_band(v, s, 10, 20);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      EXPECT_EQ(b.length(x, y), 31u);
      EXPECT_EQ(b.start(x, y), 90u);
    }
}

TEST(ExtractBand, ClipsAtTopFace) {
  Volume v(2, 50, 1);
  const BandView b = extract_band(v, v.make_surface(0.0), 5, 7);
  EXPECT_EQ(b.start(0, 0), 0u);
  EXPECT_EQ(b.length(0, 0), 8u);  // 1 + below
}

TEST(ExtractBand, RoundTripsCoordinates) {
  const Volume v = random_volume(8, 32, 8, 17);
  std::mt19937 rng(2);
  Surface s = v.make_surface();
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) s.set(x, y, static_cast<double>(rng() % 32));
  const BandView b = extract_band(v, s, 4, 6);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      auto samples = b.samples(x, y);
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const std::size_t z = b.absolute_z(x, y, k);
        EXPECT_EQ(samples[k], v(x, y, z));
        EXPECT_LE(static_cast<double>(z), s(x, y) + 6);
        EXPECT_GE(static_cast<double>(z) + 4, s(x, y));
      }
    }
}

TEST(ExtractBand, RejectsUndefinedEntries) {
  Volume v(2, 20, 1);
  Surface s = v.make_surface(5.0);
  s.set_undefined(1, 0);
  EXPECT_THROW(extract_band(v, s, 1, 1), std::invalid_argument);
}

}  // namespace
}  // namespace octseg
