#include <gtest/gtest.h>

#include "octseg/phantom.hpp"

namespace octseg {
namespace {

TEST(Phantom, NoiseFreeProfileMatchesTruth) {
  PhantomSpec s;
  s.ilm_amp_y = 5;
  const Phantom p = generate_phantom(s);
  for (std::size_t y = 0; y < s.slices; ++y)
    for (std::size_t x = 0; x < s.width; ++x) {
      auto a = p.volume.ascan(x, y);
      std::size_t first = 0;
      while (a[first] < s.tissue_intensity) ++first;
      EXPECT_EQ(static_cast<double>(first), p.truth.ilm(x, y));
      const double top = p.truth.rpe(x, y) - (s.rpe_thickness - 1) / 2.0;
      EXPECT_EQ(a[static_cast<std::size_t>(top)], s.rpe_intensity);
      EXPECT_EQ(a[static_cast<std::size_t>(top) - 1], s.tissue_intensity);
      EXPECT_EQ(p.truth.rpe_bottom_edge(x, y), top + s.rpe_thickness - 0.5);
      EXPECT_EQ(a[static_cast<std::size_t>(top) + s.rpe_thickness], s.below_intensity);
    }
}

TEST(Phantom, SeededRunsAreBitIdenticalAcrossThreadCounts) {
  PhantomSpec s;
  s.noise_std = 9;
  s.outlier_density = 0.02;
  s.shadow_fraction = 0.02;
  const Phantom a = generate_phantom(s, 1), b = generate_phantom(s, 1), c = generate_phantom(s, 4);
  EXPECT_EQ(a.volume, b.volume);
  EXPECT_EQ(a.volume, c.volume);
  EXPECT_EQ(a.truth.shadow_mask, c.truth.shadow_mask);
  s.seed = 2;
  EXPECT_FALSE(generate_phantom(s).volume == a.volume);
}

TEST(Phantom, ShadowFractionOfLateralGrid) {
  PhantomSpec s;
  s.width = 480;
  s.height = 64;
  s.slices = 100;
  s.ilm_base = 10;
  s.rpe_base = 40;
  s.rpe_amp_x = 4;
  s.shadow_fraction = 0.02;
  const Phantom p = generate_phantom(s);
  std::size_t shadowed = 0, dark = 0;
  for (std::size_t y = 0; y < s.slices; ++y)
    for (std::size_t x = 0; x < s.width; ++x) {
      shadowed += p.truth.shadow_mask(x, y);
      auto a = p.volume.ascan(x, y);
      dark += std::all_of(a.begin(), a.end(), [](auto v) { return v == 0; });
    }
  const double f = static_cast<double>(shadowed) / (s.width * s.slices);
  EXPECT_GE(f, 0.015);
  EXPECT_LE(f, 0.025);
  EXPECT_EQ(dark, shadowed);
}

TEST(Phantom, OutlierPatchesStayAboveBand) {
  PhantomSpec s;
  s.outlier_density = 0.01;
  const Phantom p = generate_phantom(s);
  std::size_t marked = 0;
  for (std::size_t y = 0; y < s.slices; ++y)
    for (std::size_t x = 0; x < s.width; ++x) {
      auto a = p.volume.ascan(x, y);
      const auto top = static_cast<std::size_t>(p.truth.rpe(x, y) - (s.rpe_thickness - 1) / 2.0);
      bool bright = false;
      for (std::size_t z = 0; z < top; ++z) bright |= a[z] == 255;
      EXPECT_EQ(bright, p.truth.outlier_mask(x, y) == 1);
      for (std::size_t z = top; z < s.height; ++z) EXPECT_NE(a[z], 255);
      marked += p.truth.outlier_mask(x, y);
    }
  EXPECT_GT(marked, 0u);
}

TEST(Phantom, SpecValidationNamesField) {
  PhantomSpec s;
  s.noise_std = -1;
  try {
    s.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("noise_std"), std::string::npos);
  }
  PhantomSpec crossing;
  crossing.ilm_base = 95;
  EXPECT_THROW(crossing.validate(), std::invalid_argument);
}

TEST(Phantom, SpecTextRoundTrip) {
  PhantomSpec s;
  s.width = 77;
  s.noise_std = 3.25;
  s.seed = 123456789012345ULL;
  s.rpe_amp_y = 1.5;
  const PhantomSpec back = parse_phantom_spec(encode_phantom_spec(s));
  EXPECT_EQ(encode_phantom_spec(back), encode_phantom_spec(s));
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_THROW(parse_phantom_spec("colour = 3\n"), ParseError);
  EXPECT_THROW(parse_phantom_spec("width = abc\n"), ParseError);
}

TEST(Phantom, ShiftMovesVolumeAndTruth) {
  Phantom p = generate_phantom(PhantomSpec{});
  const Phantom orig = p;
  std::vector<int> shifts(p.volume.width(), 0);
  shifts[5] = 3;
  shift_ascans(p, shifts);
  EXPECT_EQ(p.truth.ilm(5, 0), orig.truth.ilm(5, 0) + 3);
  EXPECT_EQ(p.volume(5, 0, 40), orig.volume(5, 0, 37));
  EXPECT_EQ(p.volume(6, 0, 40), orig.volume(6, 0, 40));
}

// --- metrics --------------------------------------------------------------------

TEST(Metrics, IdentityAndOffset) {
  const Phantom p = generate_phantom(PhantomSpec{});
  const SurfaceMetrics id = surface_error(p.truth.rpe, p.truth.rpe);
  EXPECT_EQ(id.mae, 0.0);
  EXPECT_EQ(id.max_abs, 0.0);
  EXPECT_EQ(id.bias, 0.0);
  EXPECT_EQ(id.defined_fraction, 1.0);
  Surface up = p.truth.rpe;
  for (std::size_t y = 0; y < up.slices(); ++y)
    for (std::size_t x = 0; x < up.width(); ++x) up.set(x, y, up(x, y) + 2);
  const SurfaceMetrics off = surface_error(up, p.truth.rpe);
  EXPECT_EQ(off.mae, 2.0);
  EXPECT_EQ(off.bias, 2.0);
}

TEST(Metrics, HandComputedTable) {
  Surface truth(5, 1, 100, 10.0), det(5, 1, 100);
  const double d[] = {11, 7, 10, 12.5, 9};
  for (std::size_t x = 0; x < 5; ++x) det.set(x, 0, d[x]);
  const SurfaceMetrics m = surface_error(det, truth);
  // |errors| = 1, 3, 0, 2.5, 1; signed = 1, -3, 0, 2.5, -1
  EXPECT_DOUBLE_EQ(m.mae, 7.5 / 5);
  EXPECT_DOUBLE_EQ(m.max_abs, 3.0);
  EXPECT_DOUBLE_EQ(m.bias, -0.5 / 5);
  det.set_undefined(1, 0);
  const SurfaceMetrics partial = surface_error(det, truth);
  EXPECT_EQ(partial.compared, 4u);
  EXPECT_DOUBLE_EQ(partial.defined_fraction, 0.8);
  EXPECT_THROW(surface_error(Surface(5, 1, 100), truth), DegenerateError);
}

}  // namespace
}  // namespace octseg
