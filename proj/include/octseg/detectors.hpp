#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/filters.hpp"
#include "octseg/grid.hpp"
#include "octseg/parallel.hpp"
#include "octseg/volume.hpp"

namespace octseg {

/// Axial band [z - above, z + below] around a surface estimate.
struct BandWidth {
  std::size_t above = 0;
  std::size_t below = 0;
};

namespace detail {

template <typename T>
const T& schedule_at(const std::vector<T>& schedule, std::size_t k) {
  return schedule[std::min(k, schedule.size() - 1)];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RPE

/// Refinement iteration k uses bands[k] and windows[k]; iterations past
/// the end of a schedule repeat its last entry.
struct RpeConfig {
  std::size_t iterations = 3;
  std::vector<BandWidth> bands{{10, 20}, {10, 10}, {5, 5}};
  Kernel2DSpec initial_window{30, 2};
  std::vector<Kernel2DSpec> windows{{30, 2}, {40, 2}, {20, 2}};
  Kernel2DSpec final_window{20, 2};
  std::size_t tophat_size = 5;
  unsigned threads = 1;

  void validate() const {
    if (bands.empty() || windows.empty()) throw std::invalid_argument("rpe schedules must be non-empty");
    initial_window.validate();
    final_window.validate();
    for (const auto& w : windows) w.validate();
    if (tophat_size < 1) throw std::invalid_argument("rpe top-hat size must be >= 1");
  }
};

struct RpeResult {
  Surface surface;
  Surface initial;            // per-column argmax depth
  BinaryImage outlier_mask;   // 1 = flagged as erroneous
  bool mask_degenerate = false;
  std::vector<std::string> warnings;
};

/// RPE surface from per-column intensity maxima.
///
/// 1. Argmax depth of every A-scan.
/// 2. White top-hat of the elevation (M - 1 - z), so estimates pulled up
///    by bright speckle above the RPE stand out as peaks; Otsu on the
///    top-hat flags them.
/// 3. Flagged entries are dropped, refilled from their nearest neighbors
///    and median smoothed.
/// 4. Each refinement re-takes the argmax inside a band around the current
///    estimate and median smooths it. A flat maximum with lower samples on
///    both sides resolves to the middle of its first run; one clipped by
///    the band keeps its first index.
/// 5. A final median smooth.
inline RpeResult detect_rpe(const Volume& volume, const RpeConfig& cfg = {}) {
  cfg.validate();
  if (volume.height() <= 30) throw std::invalid_argument("rpe detection needs M > 30");
  RpeResult r;

  r.initial = max_intensity_depth(volume, cfg.threads);

  const double bottom = static_cast<double>(volume.height() - 1);
  Matrix elevation(volume.width(), volume.slices());
  for (std::size_t y = 0; y < volume.slices(); ++y)
    for (std::size_t x = 0; x < volume.width(); ++x) elevation(x, y) = bottom - r.initial(x, y);
  const Matrix peaks = tophat(elevation, cfg.tophat_size, cfg.tophat_size);
  const OtsuResult otsu = otsu_threshold(peaks);

  Surface estimate = r.initial;
  if (otsu.degenerate) {
    r.mask_degenerate = true;
    r.outlier_mask = BinaryImage(volume.width(), volume.slices(), 0);
    r.warnings.push_back("rpe: top-hat of the position matrix is constant; outlier masking skipped");
  } else {
    r.outlier_mask = binarize(peaks, otsu.threshold);
    for (std::size_t y = 0; y < volume.slices(); ++y)
      for (std::size_t x = 0; x < volume.width(); ++x)
        if (r.outlier_mask(x, y)) estimate.set_undefined(x, y);
    estimate = inpaint_nearest(estimate);
  }
  estimate = median_filter(estimate, cfg.initial_window);

  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const BandWidth& band = detail::schedule_at(cfg.bands, k);
    const BandView view = extract_band(volume, estimate, band.above, band.below);
    Surface next = volume.make_surface();
    parallel_for(volume.slices(), cfg.threads, [&](std::size_t y) {
      for (std::size_t x = 0; x < volume.width(); ++x) {
        auto s = view.samples(x, y);
        const auto best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
        std::size_t run = 1;
        while (best + run < s.size() && s[best + run] == s[best]) ++run;
        const bool bounded = best > 0 && best + run < s.size();
        const double offset = bounded ? (run - 1) / 2.0 : 0.0;
        next.set(x, y, static_cast<double>(view.absolute_z(x, y, best)) + offset);
      }
    });
    estimate = median_filter(next, detail::schedule_at(cfg.windows, k));
  }
  r.surface = median_filter(estimate, cfg.final_window);
  return r;
}

// ---------------------------------------------------------------------------
// ILM

/// Each round smooths the current estimate with its windows (in order),
/// then re-detects inside its band. `iterations` repeats all rounds.
struct IlmRound {
  BandWidth band;
  std::vector<Kernel2DSpec> windows;
};

struct IlmConfig {
  std::size_t noise_rows = 5;
  double zero_fraction = 0.005;
  std::vector<IlmRound> rounds{
      {{15, 30}, {{1, 25}, {25, 1}}},
      {{3, 27}, {{10, 1}}},
  };
  std::size_t iterations = 1;
  unsigned threads = 1;

  void validate() const {
    if (!(zero_fraction > 0.0 && zero_fraction < 1.0))
      throw std::invalid_argument("ilm zero fraction must be in (0, 1)");
    if (noise_rows < 1) throw std::invalid_argument("ilm noise rows must be >= 1");
    if (rounds.empty()) throw std::invalid_argument("ilm schedule must be non-empty");
    for (const auto& r : rounds)
      for (const auto& w : r.windows) w.validate();
  }
};

struct IlmThreshold {
  int value = 0;
  bool saturated = false;  // no threshold within the 8-bit range qualifies
};

/// Smallest T such that at most `zero_fraction` of the noise region (the
/// first `noise_rows` depths of every A-scan) has intensity >= T.
/// Intensities >= T binarize to 0 under the ILM convention, so this bounds
/// the share of noise pixels read as tissue.
inline IlmThreshold ilm_threshold(const Grid2<std::uint8_t>& bscan, const IlmConfig& cfg = {}) {
  cfg.validate();
  if (cfg.noise_rows >= bscan.ny()) throw std::invalid_argument("ilm noise rows must be < M");
  std::array<std::uint64_t, 257> at_least{};
  for (std::size_t z = 0; z < cfg.noise_rows; ++z)
    for (std::size_t x = 0; x < bscan.nx(); ++x) ++at_least[bscan(x, z)];
  for (int t = 254; t >= 0; --t) at_least[t] += at_least[t + 1];
  const double allowed = cfg.zero_fraction * static_cast<double>(cfg.noise_rows * bscan.nx());
  for (int t = 0; t <= 255; ++t)
    if (static_cast<double>(at_least[t]) <= allowed) return {t, false};
  return {256, true};
}

struct IlmResult {
  Surface surface;      // inpainted, fully defined
  Surface raw;          // before inpainting; undefined where no A-scan crossing
  std::vector<IlmThreshold> thresholds;  // per B-scan
  double defined_fraction = 0.0;         // of `raw`
  std::vector<std::string> warnings;
};

/// ILM as the first depth at which each A-scan reaches its B-scan's noise
/// threshold, refined inside bands around successively smoothed estimates.
inline IlmResult detect_ilm(const Volume& volume, const IlmConfig& cfg = {}) {
  cfg.validate();
  if (volume.height() <= 45) throw std::invalid_argument("ilm detection needs M > 45");
  IlmResult r;
  r.thresholds.resize(volume.slices());
  parallel_for(volume.slices(), cfg.threads,
               [&](std::size_t y) { r.thresholds[y] = ilm_threshold(volume.bscan(y), cfg); });
  for (std::size_t y = 0; y < volume.slices(); ++y)
    if (r.thresholds[y].saturated)
      r.warnings.push_back("ilm: noise region of b-scan " + std::to_string(y) + " is saturated");

  // First index in [lo, lo + len) reaching the slice threshold.
  auto first_crossing = [&](Surface& out, std::size_t x, std::size_t y, std::size_t lo, std::size_t len) {
    const int t = r.thresholds[y].value;
    auto a = volume.ascan(x, y).subspan(lo, len);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k] >= t) {
        out.set(x, y, static_cast<double>(lo + k));
        return;
      }
    out.set_undefined(x, y);
  };

  Surface estimate = volume.make_surface();
  parallel_for(volume.slices(), cfg.threads, [&](std::size_t y) {
    for (std::size_t x = 0; x < volume.width(); ++x) first_crossing(estimate, x, y, 0, volume.height());
  });

  for (std::size_t it = 0; it < cfg.iterations; ++it)
    for (const IlmRound& round : cfg.rounds) {
      if (estimate.defined_count() == 0) throw DegenerateError("ilm: no A-scan crosses its threshold");
      Surface guide = estimate;
      for (const auto& w : round.windows) guide = median_filter(guide, w);
      if (!guide.fully_defined()) guide = inpaint_nearest(guide);
      const BandView band = extract_band(volume, guide, round.band.above, round.band.below);
      Surface next = volume.make_surface();
      parallel_for(volume.slices(), cfg.threads, [&](std::size_t y) {
        for (std::size_t x = 0; x < volume.width(); ++x)
          first_crossing(next, x, y, band.start(x, y), band.length(x, y));
      });
      estimate = std::move(next);
    }

  if (estimate.defined_count() == 0) throw DegenerateError("ilm: no A-scan crosses its threshold");
  r.raw = estimate;
  r.defined_fraction = static_cast<double>(estimate.defined_count()) /
                       static_cast<double>(volume.width() * volume.slices());
  r.surface = inpaint_nearest(estimate);
  return r;
}

}  // namespace octseg
