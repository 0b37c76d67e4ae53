#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/grid.hpp"
#include "octseg/io.hpp"
#include "octseg/keyvalue.hpp"
#include "octseg/parallel.hpp"
#include "octseg/volume.hpp"

namespace octseg {

/// Parametric layered retina. Depth profile of each A-scan, top to bottom:
/// background (noise region) above the ILM, tissue from the ILM to the
/// RPE band, the bright RPE band, then the darker region below.
///
/// Both surfaces follow base + amp_x*sin(2*pi*x/period_x) +
/// amp_y*cos(2*pi*y/period_y); a period of 0 means the matching dimension
/// (W for x, N for y).
struct PhantomSpec {
  std::size_t width = 128;   // W
  std::size_t height = 128;  // M
  std::size_t slices = 16;   // N

  double ilm_base = 30, ilm_amp_x = 0, ilm_period_x = 0, ilm_amp_y = 0, ilm_period_y = 0;
  double rpe_base = 90, rpe_amp_x = 8, rpe_period_x = 0, rpe_amp_y = 0, rpe_period_y = 0;
  std::size_t rpe_thickness = 6;

  double background_intensity = 10;
  double tissue_intensity = 100;
  double rpe_intensity = 200;
  double below_intensity = 40;

  double noise_std = 0;
  double outlier_density = 0;  // fraction of A-scans seeding a 3x3 speckle patch
  double outlier_intensity = 255;
  double shadow_fraction = 0;  // fraction of A-scans rendered fully dark
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  Surface ilm;              // first tissue depth
  Surface rpe;              // band centroid depth
  Surface rpe_bottom_edge;  // boundary between the band and the region below
  BinaryImage shadow_mask;  // (x, y) A-scans rendered dark
  BinaryImage outlier_mask; // (x, y) A-scans touched by a speckle patch
};

struct Phantom {
  Volume volume;
  GroundTruth truth;
};

// ---------------------------------------------------------------------------
// Pinned randomness: std::mt19937_64 has a standardized output sequence;
// the distributions below are written out so results do not depend on the
// standard library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class PhantomRng {
 public:
  explicit PhantomRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller (one draw per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// Independent stream for slice y; the mask stream uses kMaskStream.
inline std::uint64_t phantom_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x51ED270B6A3F1C2DULL));
}
inline constexpr std::uint64_t kMaskStream = ~0ULL;

namespace detail {

inline double layer_surface(double base, double ax, double px, double ay, double py, std::size_t x,
                            std::size_t y, std::size_t w, std::size_t n) {
  constexpr double kTwoPi = 6.283185307179586;
  const double ppx = px > 0 ? px : static_cast<double>(w);
  const double ppy = py > 0 ? py : static_cast<double>(n);
  return base + ax * std::sin(kTwoPi * x / ppx) + ay * std::cos(kTwoPi * y / ppy);
}

struct Layers {
  Grid2<long long> ilm, band_top;
};

inline Layers phantom_layers(const PhantomSpec& s) {
  Layers l{Grid2<long long>(s.width, s.slices), Grid2<long long>(s.width, s.slices)};
  const double half = (static_cast<double>(s.rpe_thickness) - 1.0) / 2.0;
  for (std::size_t y = 0; y < s.slices; ++y)
    for (std::size_t x = 0; x < s.width; ++x) {
      l.ilm(x, y) = std::llround(layer_surface(s.ilm_base, s.ilm_amp_x, s.ilm_period_x, s.ilm_amp_y,
                                               s.ilm_period_y, x, y, s.width, s.slices));
      l.band_top(x, y) = std::llround(layer_surface(s.rpe_base, s.rpe_amp_x, s.rpe_period_x, s.rpe_amp_y,
                                                    s.rpe_period_y, x, y, s.width, s.slices) -
                                      half);
    }
  return l;
}

inline void spec_fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("phantom spec: " + field + " " + why);
}

}  // namespace detail

inline void PhantomSpec::validate() const {
  if (width < 1) detail::spec_fail("width", "must be >= 1");
  if (height < 1) detail::spec_fail("height", "must be >= 1");
  if (slices < 1) detail::spec_fail("slices", "must be >= 1");
  if (rpe_thickness < 1) detail::spec_fail("rpe_thickness", "must be >= 1");
  const std::pair<const char*, double> intensities[] = {{"background_intensity", background_intensity},
                                                        {"tissue_intensity", tissue_intensity},
                                                        {"rpe_intensity", rpe_intensity},
                                                        {"below_intensity", below_intensity},
                                                        {"outlier_intensity", outlier_intensity}};
  for (auto [name, v] : intensities)
    if (!(v >= 0 && v <= 255)) detail::spec_fail(name, "must be in [0, 255]");
  if (!(noise_std >= 0)) detail::spec_fail("noise_std", "must be >= 0");
  if (!(outlier_density >= 0 && outlier_density <= 1)) detail::spec_fail("outlier_density", "must be in [0, 1]");
  if (!(shadow_fraction >= 0 && shadow_fraction <= 1)) detail::spec_fail("shadow_fraction", "must be in [0, 1]");
  for (auto [name, v] : {std::pair{"ilm_period_x", ilm_period_x}, std::pair{"ilm_period_y", ilm_period_y},
                         std::pair{"rpe_period_x", rpe_period_x}, std::pair{"rpe_period_y", rpe_period_y}})
    if (!(v >= 0)) detail::spec_fail(name, "must be >= 0");

  const auto layers = detail::phantom_layers(*this);
  const auto m = static_cast<long long>(height);
  for (std::size_t i = 0; i < layers.ilm.size(); ++i) {
    const long long ilm = layers.ilm.data()[i], top = layers.band_top.data()[i];
    if (ilm < 0 || ilm >= m) detail::spec_fail("ilm_base", "places the ILM outside [0, height)");
    if (top < 0 || top + static_cast<long long>(rpe_thickness) > m)
      detail::spec_fail("rpe_base", "places the RPE band outside [0, height)");
    if (ilm >= top) detail::spec_fail("ilm_base", "must keep the ILM strictly above the RPE band");
  }
}

namespace detail {

/// First k entries of a seeded partial Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_distinct(PhantomRng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

}  // namespace detail

/// Deterministic for a fixed spec: slice y draws its noise from stream y,
/// masks come from a separate stream, so any thread count gives the same
/// volume.
inline Phantom generate_phantom(const PhantomSpec& spec, unsigned threads = 1) {
  spec.validate();
  const std::size_t w = spec.width, m = spec.height, n = spec.slices;
  const auto layers = detail::phantom_layers(spec);
  const auto thick = static_cast<long long>(spec.rpe_thickness);

  Phantom p{Volume(w, m, n), {}};
  GroundTruth& t = p.truth;
  t.ilm = Surface(w, n, m);
  t.rpe = Surface(w, n, m);
  t.rpe_bottom_edge = Surface(w, n, m);
  t.shadow_mask = BinaryImage(w, n, 0);
  t.outlier_mask = BinaryImage(w, n, 0);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      t.ilm.set(x, y, static_cast<double>(layers.ilm(x, y)));
      t.rpe.set(x, y, static_cast<double>(layers.band_top(x, y)) + (thick - 1) / 2.0);
      t.rpe_bottom_edge.set(x, y, static_cast<double>(layers.band_top(x, y) + thick) - 0.5);
    }

  parallel_for(n, threads, [&](std::size_t y) {
    PhantomRng rng(phantom_stream_seed(spec.seed, y));
    for (std::size_t x = 0; x < w; ++x) {
      auto a = p.volume.ascan(x, y);
      const long long ilm = layers.ilm(x, y), top = layers.band_top(x, y);
      for (std::size_t zi = 0; zi < m; ++zi) {
        const auto z = static_cast<long long>(zi);
        double v = z < ilm ? spec.background_intensity
                   : z < top ? spec.tissue_intensity
                   : z < top + thick ? spec.rpe_intensity
                                     : spec.below_intensity;
        if (spec.noise_std > 0) v += spec.noise_std * rng.normal();
        a[zi] = static_cast<Volume::value_type>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  });

  PhantomRng mask_rng(phantom_stream_seed(spec.seed, kMaskStream));
  const std::size_t columns = w * n;
  const auto outliers = detail::sample_distinct(
      mask_rng, columns, static_cast<std::size_t>(std::llround(spec.outlier_density * columns)));
  for (std::size_t c : outliers) {
    const std::size_t x = c % w, y = c / w;
    const long long ilm = layers.ilm(x, y), top = layers.band_top(x, y);
    // Patch centre anywhere strictly between the ILM and the band.
    const long long lo = std::min(ilm + 1, top - 2), hi = std::max(lo, top - 2);
    const long long zc = lo + static_cast<long long>(mask_rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    for (long long dx = -1; dx <= 1; ++dx) {
      const long long u = static_cast<long long>(x) + dx;
      if (u < 0 || u >= static_cast<long long>(w)) continue;
      const long long utop = layers.band_top(u, y);
      auto a = p.volume.ascan(u, y);
      bool touched = false;
      for (long long z = zc - 1; z <= zc + 1; ++z)
        if (z >= 0 && z < utop) {
          a[z] = static_cast<Volume::value_type>(std::round(spec.outlier_intensity));
          touched = true;
        }
      if (touched) t.outlier_mask(u, y) = 1;
    }
  }

  const auto shadows = detail::sample_distinct(
      mask_rng, columns, static_cast<std::size_t>(std::llround(spec.shadow_fraction * columns)));
  for (std::size_t c : shadows) {
    const std::size_t x = c % w, y = c / w;
    auto a = p.volume.ascan(x, y);
    std::fill(a.begin(), a.end(), Volume::value_type{0});
    t.shadow_mask(x, y) = 1;
  }
  return p;
}

/// Shifts every A-scan x of every slice axially by shifts[x] (edge
/// replication) and moves the truth surfaces with it, imitating lateral
/// motion between A-scans.
inline void shift_ascans(Phantom& p, const std::vector<int>& shifts) {
  Volume& v = p.volume;
  if (shifts.size() != v.width()) throw std::invalid_argument("one shift per A-scan required");
  const long long m = static_cast<long long>(v.height());
  std::vector<Volume::value_type> col(v.height());
  for (std::size_t y = 0; y < v.slices(); ++y)
    for (std::size_t x = 0; x < v.width(); ++x) {
      auto a = v.ascan(x, y);
      std::copy(a.begin(), a.end(), col.begin());
      for (long long z = 0; z < m; ++z) a[z] = col[std::clamp(z - shifts[x], 0LL, m - 1)];
    }
  const double hi = std::nextafter(static_cast<double>(m), 0.0);
  for (Surface* s : {&p.truth.ilm, &p.truth.rpe, &p.truth.rpe_bottom_edge})
    for (std::size_t y = 0; y < s->slices(); ++y)
      for (std::size_t x = 0; x < s->width(); ++x)
        s->set(x, y, std::clamp((*s)(x, y) + shifts[x], 0.0, hi));
}

// ---------------------------------------------------------------------------
// Spec files

inline std::string encode_phantom_spec(const PhantomSpec& s) {
  std::string out;
  auto put = [&](const char* key, const std::string& v) { out += std::string(key) + " = " + v + "\n"; };
  put("width", std::to_string(s.width));
  put("height", std::to_string(s.height));
  put("slices", std::to_string(s.slices));
  put("ilm_base", format_double(s.ilm_base));
  put("ilm_amp_x", format_double(s.ilm_amp_x));
  put("ilm_period_x", format_double(s.ilm_period_x));
  put("ilm_amp_y", format_double(s.ilm_amp_y));
  put("ilm_period_y", format_double(s.ilm_period_y));
  put("rpe_base", format_double(s.rpe_base));
  put("rpe_amp_x", format_double(s.rpe_amp_x));
  put("rpe_period_x", format_double(s.rpe_period_x));
  put("rpe_amp_y", format_double(s.rpe_amp_y));
  put("rpe_period_y", format_double(s.rpe_period_y));
  put("rpe_thickness", std::to_string(s.rpe_thickness));
  put("background_intensity", format_double(s.background_intensity));
  put("tissue_intensity", format_double(s.tissue_intensity));
  put("rpe_intensity", format_double(s.rpe_intensity));
  put("below_intensity", format_double(s.below_intensity));
  put("noise_std", format_double(s.noise_std));
  put("outlier_density", format_double(s.outlier_density));
  put("outlier_intensity", format_double(s.outlier_intensity));
  put("shadow_fraction", format_double(s.shadow_fraction));
  put("seed", std::to_string(s.seed));
  return out;
}

/// Parses a key = value spec; keys not present keep their defaults.
inline PhantomSpec parse_phantom_spec(std::string_view text, const std::string& name = "<phantom>") {
  PhantomSpec s;
  const std::map<std::string, std::function<void(const KeyValue&)>> fields = {
      {"width", [&](const KeyValue& kv) { s.width = parse_number<std::size_t>(kv, name); }},
      {"height", [&](const KeyValue& kv) { s.height = parse_number<std::size_t>(kv, name); }},
      {"slices", [&](const KeyValue& kv) { s.slices = parse_number<std::size_t>(kv, name); }},
      {"ilm_base", [&](const KeyValue& kv) { s.ilm_base = parse_number<double>(kv, name); }},
      {"ilm_amp_x", [&](const KeyValue& kv) { s.ilm_amp_x = parse_number<double>(kv, name); }},
      {"ilm_period_x", [&](const KeyValue& kv) { s.ilm_period_x = parse_number<double>(kv, name); }},
      {"ilm_amp_y", [&](const KeyValue& kv) { s.ilm_amp_y = parse_number<double>(kv, name); }},
      {"ilm_period_y", [&](const KeyValue& kv) { s.ilm_period_y = parse_number<double>(kv, name); }},
      {"rpe_base", [&](const KeyValue& kv) { s.rpe_base = parse_number<double>(kv, name); }},
      {"rpe_amp_x", [&](const KeyValue& kv) { s.rpe_amp_x = parse_number<double>(kv, name); }},
      {"rpe_period_x", [&](const KeyValue& kv) { s.rpe_period_x = parse_number<double>(kv, name); }},
      {"rpe_amp_y", [&](const KeyValue& kv) { s.rpe_amp_y = parse_number<double>(kv, name); }},
      {"rpe_period_y", [&](const KeyValue& kv) { s.rpe_period_y = parse_number<double>(kv, name); }},
      {"rpe_thickness", [&](const KeyValue& kv) { s.rpe_thickness = parse_number<std::size_t>(kv, name); }},
      {"background_intensity", [&](const KeyValue& kv) { s.background_intensity = parse_number<double>(kv, name); }},
      {"tissue_intensity", [&](const KeyValue& kv) { s.tissue_intensity = parse_number<double>(kv, name); }},
      {"rpe_intensity", [&](const KeyValue& kv) { s.rpe_intensity = parse_number<double>(kv, name); }},
      {"below_intensity", [&](const KeyValue& kv) { s.below_intensity = parse_number<double>(kv, name); }},
      {"noise_std", [&](const KeyValue& kv) { s.noise_std = parse_number<double>(kv, name); }},
      {"outlier_density", [&](const KeyValue& kv) { s.outlier_density = parse_number<double>(kv, name); }},
      {"outlier_intensity", [&](const KeyValue& kv) { s.outlier_intensity = parse_number<double>(kv, name); }},
      {"shadow_fraction", [&](const KeyValue& kv) { s.shadow_fraction = parse_number<double>(kv, name); }},
      {"seed", [&](const KeyValue& kv) { s.seed = parse_number<std::uint64_t>(kv, name); }},
  };
  for (const auto& kv : parse_key_values(text, name)) {
    auto it = fields.find(kv.key);
    if (it == fields.end()) throw ParseError(name, kv.line, "unknown phantom key '" + kv.key + "'");
    it->second(kv);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Metrics

struct SurfaceMetrics {
  double mae = 0.0;
  double max_abs = 0.0;
  double bias = 0.0;              // mean(detected - truth)
  double defined_fraction = 0.0;  // of truth-defined entries, share defined in detected
  std::size_t compared = 0;       // entries defined in both
};

/// Error over entries defined in both surfaces.
inline SurfaceMetrics surface_error(const Surface& detected, const Surface& truth) {
  if (detected.width() != truth.width() || detected.slices() != truth.slices())
    throw std::invalid_argument("surface dimensions differ");
  SurfaceMetrics m;
  std::size_t truth_defined = 0;
  double abs_sum = 0.0, signed_sum = 0.0;
  for (std::size_t y = 0; y < truth.slices(); ++y)
    for (std::size_t x = 0; x < truth.width(); ++x) {
      if (!truth.defined(x, y)) continue;
      ++truth_defined;
      if (!detected.defined(x, y)) continue;
      const double d = detected(x, y) - truth(x, y);
      abs_sum += std::abs(d);
      signed_sum += d;
      m.max_abs = std::max(m.max_abs, std::abs(d));
      ++m.compared;
    }
  if (m.compared == 0) throw DegenerateError("surfaces share no defined entry");
  m.mae = abs_sum / static_cast<double>(m.compared);
  m.bias = signed_sum / static_cast<double>(m.compared);
  m.defined_fraction = static_cast<double>(m.compared) / static_cast<double>(truth_defined);
  return m;
}

inline std::string encode_metrics(const SurfaceMetrics& m) {
  return "mae = " + format_double(m.mae) + "\nmax_abs = " + format_double(m.max_abs) +
         "\nbias = " + format_double(m.bias) + "\ndefined_fraction = " + format_double(m.defined_fraction) +
         "\ncompared = " + std::to_string(m.compared) + "\n";
}

}  // namespace octseg
