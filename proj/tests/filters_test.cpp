#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "octseg/filters.hpp"
#include "oracles.hpp"

namespace octseg {
namespace {

Matrix random_matrix(std::size_t w, std::size_t h, unsigned seed, int hi = 255) {
  Matrix m(w, h);
  std::mt19937 rng(seed);
  for (auto& v : m.data()) v = static_cast<double>(rng() % (hi + 1));
  return m;
}

// --- binarize ---------------------------------------------------------------

TEST(Binarize, Definition) {
  Matrix m(2, 1);
  m(0, 0) = 10;
  m(1, 0) = 200;
  const auto b = binarize(m, 100);
  EXPECT_EQ(b(0, 0), 0);
  EXPECT_EQ(b(1, 0), 1);
}

TEST(Binarize, ZeroThresholdIsAllOnes) {
  const auto b = binarize(random_matrix(8, 8, 1), 0);
  for (auto v : b.data()) EXPECT_EQ(v, 1);
}

TEST(Binarize, MatchesElementwiseComparison) {
  const Matrix m = random_matrix(8, 8, 4);
  const auto b = binarize(m, 128);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) EXPECT_EQ(b(x, y), m(x, y) >= 128 ? 1 : 0);
}

// --- otsu -------------------------------------------------------------------

TEST(Otsu, TwoLevelImageSplitsBetweenLevels) {
  Grid2<std::uint8_t> m(10, 10);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = i % 2 ? 200 : 50;
  const OtsuResult r = otsu_threshold(m);
  EXPECT_FALSE(r.degenerate);
  EXPECT_GT(r.threshold, 50);
  EXPECT_LE(r.threshold, 200);
  // Exhaustive scan: every T in (50, 200] is optimal; the smallest wins.
  std::vector<int> vals(m.data().begin(), m.data().end());
  EXPECT_EQ(r.threshold, oracle::exhaustive_otsu(vals).threshold);
  EXPECT_EQ(r.threshold, 51);
  const auto b = binarize(m, r.threshold);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(b.data()[i], m.data()[i] == 200 ? 1 : 0);
}

TEST(Otsu, ConstantMatrixIsDegenerate) {
  Grid2<std::uint8_t> m(4, 4, 77);
  const OtsuResult r = otsu_threshold(m);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.threshold, 77);
}

TEST(Otsu, BimodalGaussianMixtureMatchesExhaustiveScan) {
  std::mt19937 rng(9);
  std::normal_distribution<double> lo(70, 12), hi(170, 20);
  Grid2<std::uint8_t> m(64, 32);
  std::vector<int> vals;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = std::clamp(std::round(i % 3 ? lo(rng) : hi(rng)), 0.0, 255.0);
    m.data()[i] = static_cast<std::uint8_t>(v);
    vals.push_back(static_cast<int>(v));
  }
  EXPECT_EQ(otsu_threshold(m).threshold, oracle::exhaustive_otsu(vals).threshold);
}

TEST(Otsu, EmptyInputRejected) {
  EXPECT_THROW(otsu_threshold(Grid2<std::uint8_t>()), std::invalid_argument);
}

// --- median -----------------------------------------------------------------

TEST(Median, ConstantUnchanged) {
  Matrix m(9, 7, 3.5);
  EXPECT_EQ(median_filter(m, {4, 3}), m);
}

TEST(Median, ImpulseRemoved) {
  Matrix m(7, 7, 0.0);
  m(3, 3) = 255;
  const Matrix out = median_filter(m, {3, 3});
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 7; ++x) EXPECT_EQ(out(x, y), oracle::window_median(m, x, y, 3, 3));
  EXPECT_EQ(out(3, 3), 0.0);
}

TEST(Median, SingletonWindowIsIdentity) {
  const Matrix m = random_matrix(6, 5, 2);
  EXPECT_EQ(median_filter(m, {1, 1}), m);
  EXPECT_EQ(median_filter(median_filter(m, {1, 1}), {1, 1}), m);
}

TEST(Median, EvenWindowsMatchSortingOracleWithUndefined) {
  Matrix m = random_matrix(12, 6, 3);
  m(0, 0) = m(5, 2) = m(6, 2) = kUndefined;
  for (auto spec : {Kernel2DSpec{4, 2}, Kernel2DSpec{3, 5}, Kernel2DSpec{30, 2}}) {
    const Matrix out = median_filter(m, spec);
    for (std::size_t y = 0; y < m.ny(); ++y)
      for (std::size_t x = 0; x < m.nx(); ++x)
        EXPECT_EQ(out(x, y), oracle::window_median(m, x, y, spec.wx, spec.wy)) << x << "," << y;
  }
}

TEST(Median, AllUndefinedWindowStaysUndefined) {
  Matrix m(5, 1, kUndefined);
  m(4, 0) = 1;
  const Matrix out = median_filter(m, {3, 1});
  EXPECT_TRUE(std::isnan(out(0, 0)));
  EXPECT_EQ(out(3, 0), 1.0);
}

TEST(Median, ScalesWithPositiveConstant) {
  const Matrix m = random_matrix(10, 10, 8);
  Matrix scaled = m;
  for (auto& v : scaled.data()) v *= 2.5;
  const Matrix a = median_filter(m, {4, 3}), b = median_filter(scaled, {4, 3});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(b.data()[i], 2.5 * a.data()[i]);
}

// --- top-hat ----------------------------------------------------------------

TEST(TopHat, ConstantIsZero) {
  const Matrix t = tophat(Matrix(8, 8, 9.0));
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(TopHat, IsolatedPeak) {
  Matrix m(9, 9, 4.0);
  m(4, 4) = 4.0 + 37.0;
  const Matrix t = tophat(m);
  EXPECT_EQ(t(4, 4), 37.0);
  EXPECT_EQ(t(0, 0), 0.0);
}

TEST(TopHat, MatchesCompositionOracleAndIsNonNegative) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Matrix m = random_matrix(10, 10, seed);
    const Matrix t = tophat(m), ref = oracle::tophat5(m);
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_EQ(t.data()[i], ref.data()[i]);
      EXPECT_GE(t.data()[i], 0.0);
    }
  }
}

TEST(TopHat, EvenExtentOpeningIsAntiExtensive) {
  const Matrix m = random_matrix(11, 9, 21);
  const Matrix t = tophat(m, 4, 2);
  for (double v : t.data()) EXPECT_GE(v, 0.0);
}

// --- inpaint ----------------------------------------------------------------

TEST(Inpaint, SingleDonorFillsEverything) {
  Surface s(5, 4, 100);
  s.set(2, 1, 42);
  const Surface out = inpaint_nearest(s);
  for (double v : out.grid().data()) EXPECT_EQ(v, 42.0);
}

TEST(Inpaint, RingFillsCenterAtDistanceOne) {
  Surface s(3, 3, 100);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) s.set(x, y, 10.0 * x + y);
  s.set_undefined(1, 1);
  const Surface out = inpaint_nearest(s);
  // Distance-1 donors are (1,0), (0,1), (2,1), (1,2); (0,1) has the smallest x.
  EXPECT_EQ(out(1, 1), oracle::nearest_donor(s.grid(), 1, 1));
  EXPECT_EQ(out(1, 1), 1.0);
}

TEST(Inpaint, MatchesExhaustiveDonorSearch) {
  std::mt19937 rng(13);
  Surface s(17, 11, 50);
  for (std::size_t y = 0; y < 11; ++y)
    for (std::size_t x = 0; x < 17; ++x)
      if (rng() % 5 == 0) s.set(x, y, static_cast<double>(rng() % 50));
  const Surface out = inpaint_nearest(s);
  for (std::size_t y = 0; y < 11; ++y)
    for (std::size_t x = 0; x < 17; ++x) {
      if (s.defined(x, y)) EXPECT_EQ(out(x, y), s(x, y));
      else EXPECT_EQ(out(x, y), oracle::nearest_donor(s.grid(), x, y));
    }
}

TEST(Inpaint, FullyDefinedIsIdentityAndEmptyRejected) {
  const Surface s(4, 4, 10, 3.0);
  EXPECT_EQ(inpaint_nearest(s), s);
  EXPECT_THROW(inpaint_nearest(Surface(4, 4, 10)), std::invalid_argument);
}

// --- gaussian ---------------------------------------------------------------

TEST(GaussianSmooth, ConstantUnchanged) {
  Surface s(3, 20, 100);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 3; ++x) s.set(x, y, 10.0 + x);
  const Surface out = gaussian_smooth_across_slices(s, 2.0);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 3; ++x) EXPECT_NEAR(out(x, y), 10.0 + x, 1e-9 * (10.0 + x));
}

TEST(GaussianSmooth, ImpulseReproducesKernelProfile) {
  const double sigma = 1.5;
  Surface s(2, 21, 100, 0.0);
  s.set(1, 10, 1.0);
  const Surface out = gaussian_smooth_across_slices(s, sigma);
  // Direct convolution: full window at every y within reach of the impulse.
  double norm = 0;
  for (int d = -5; d <= 5; ++d) norm += std::exp(-d * d / (2 * sigma * sigma));
  double total = 0;
  for (int y = 0; y < 21; ++y) {
    const int d = y - 10;
    const double expect = std::abs(d) <= 5 ? std::exp(-d * d / (2 * sigma * sigma)) / norm : 0.0;
    EXPECT_NEAR(out(1, y), expect, 1e-12);
    EXPECT_EQ(out(0, y), 0.0);
    total += out(1, y);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(GaussianSmooth, TinySigmaIsIdentity) {
  Surface s(4, 6, 100);
  std::mt19937 rng(1);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 4; ++x) s.set(x, y, static_cast<double>(rng() % 100));
  EXPECT_EQ(gaussian_smooth_across_slices(s, 1e-3), s);
  EXPECT_THROW(gaussian_smooth_across_slices(s, 0.0), std::invalid_argument);
}

TEST(GaussianSmooth, UndefinedEntriesExcluded) {
  Surface s(1, 5, 100, 10.0);
  s.set_undefined(0, 2);
  s.set(0, 3, 20.0);
  const Surface out = gaussian_smooth_across_slices(s, 0.5);
  EXPECT_FALSE(out.defined(0, 2));
  const double w1 = std::exp(-1.0 / (2 * 0.25)), w2 = std::exp(-4.0 / (2 * 0.25));
  // y = 3 sees y = 1 (distance 2), itself, y = 4 (distance 1) and y = 4
  // again as the replicated y = 5; y = 2 is skipped.
  EXPECT_NEAR(out(0, 3), (20.0 + 10.0 * w1 + 20.0 * w2) / (1 + w1 + 2 * w2), 1e-12);
}

// --- alignment --------------------------------------------------------------

Grid2<std::uint8_t> shifted_profile_slice(std::size_t w, std::size_t m, int step) {
  Grid2<std::uint8_t> img(w, m);
  for (std::size_t x = 0; x < w; ++x)
    for (std::size_t z = 0; z < m; ++z) {
      const double c = 20.0 + step * static_cast<double>(x);
      const double d = static_cast<double>(z) - c;
      img(x, z) = static_cast<std::uint8_t>(std::lround(30 + 180 * std::exp(-d * d / 8.0) +
                                                        60 * std::exp(-(d - 9) * (d - 9) / 4.0)));
    }
  return img;
}

TEST(Align, RecoversPerColumnShiftRamp) {
  const auto img = shifted_profile_slice(10, 64, 1);
  const AlignmentResult r = align_ascans_xcorr(img, 0, 3);
  for (std::size_t x = 0; x < 10; ++x) EXPECT_EQ(r.shifts[x], -static_cast<int>(x));
  for (std::size_t x = 1; x < 10; ++x)
    for (std::size_t z = 0; z < 40; ++z) EXPECT_EQ(r.aligned(x, z), r.aligned(0, z)) << x << "," << z;
}

TEST(Align, AlignedSliceHasZeroShifts) {
  const auto img = shifted_profile_slice(8, 64, 0);
  const AlignmentResult r = align_ascans_xcorr(img, 3, 4);
  for (int s : r.shifts) EXPECT_EQ(s, 0);
  EXPECT_EQ(r.aligned, img);
}

TEST(Align, ZeroMaxShiftIsIdentity) {
  const auto img = shifted_profile_slice(8, 64, 2);
  const AlignmentResult r = align_ascans_xcorr(img, 0, 0);
  for (int s : r.shifts) EXPECT_EQ(s, 0);
  EXPECT_EQ(r.aligned, img);
}

TEST(Align, ZeroVarianceColumnGetsZeroShift) {
  auto img = shifted_profile_slice(6, 64, 1);
  for (std::size_t z = 0; z < 64; ++z) img(2, z) = 90;
  const AlignmentResult r = align_ascans_xcorr(img, 0, 3);
  EXPECT_EQ(r.shifts[2], 0);
  EXPECT_EQ(r.shifts[3], -3);  // chain continues from column 1
}

TEST(Align, RejectsLargeMaxShift) {
  const auto img = shifted_profile_slice(4, 10, 0);
  EXPECT_THROW(align_ascans_xcorr(img, 0, 5), std::invalid_argument);
}

}  // namespace
}  // namespace octseg
