#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "octseg/detectors.hpp"
#include "octseg/error.hpp"
#include "octseg/filters.hpp"
#include "octseg/io.hpp"
#include "octseg/keyvalue.hpp"
#include "octseg/morphology.hpp"
#include "octseg/parallel.hpp"
#include "octseg/phantom.hpp"
#include "octseg/tracer.hpp"
#include "octseg/volume.hpp"

namespace octseg {

enum class ZsOp { kThin, kFill, kContour };

struct Preprocessor {
  enum class Kind { kNone, kBinarize, kOtsu, kZhangSuen };
  Kind kind = Kind::kNone;
  double threshold = 0;      // kBinarize
  std::vector<ZsOp> ops;     // kZhangSuen, applied in order after Otsu binarization
  bool thin_across_slices = false;  // thin with the inter-slice pruning pass
};

/// "none", "binarize=<T>", "otsu", "zs=<op>[,<op>...]" with ops
/// thin|fill|contour (also separated by '+').
inline Preprocessor parse_preprocessor(std::string_view text) {
  Preprocessor p;
  if (text == "none") return p;
  if (text == "otsu") {
    p.kind = Preprocessor::Kind::kOtsu;
    return p;
  }
  if (text.starts_with("binarize=")) {
    p.kind = Preprocessor::Kind::kBinarize;
    KeyValue kv{"pre", std::string(text.substr(9)), 0};
    try {
      p.threshold = parse_number<double>(kv, "--pre");
    } catch (const ParseError&) {
      throw std::invalid_argument("bad binarize threshold in '" + std::string(text) + "'");
    }
    return p;
  }
  if (text.starts_with("zs=")) {
    p.kind = Preprocessor::Kind::kZhangSuen;
    std::string_view rest = text.substr(3);
    while (!rest.empty()) {
      const auto cut = rest.find_first_of(",+");
      const auto op = rest.substr(0, cut);
      if (op == "thin") p.ops.push_back(ZsOp::kThin);
      else if (op == "fill") p.ops.push_back(ZsOp::kFill);
      else if (op == "contour") p.ops.push_back(ZsOp::kContour);
      else throw std::invalid_argument("unknown zs op '" + std::string(op) + "'");
      if (cut == std::string_view::npos) break;
      rest = rest.substr(cut + 1);
    }
    if (p.ops.empty()) throw std::invalid_argument("zs preprocessor needs at least one op");
    return p;
  }
  throw std::invalid_argument("unknown preprocessor '" + std::string(text) + "'");
}

enum class DetectorKind { kRpe, kIlm, kBoth, kCanny };

inline DetectorKind parse_detector(std::string_view text) {
  if (text == "rpe") return DetectorKind::kRpe;
  if (text == "ilm") return DetectorKind::kIlm;
  if (text == "both") return DetectorKind::kBoth;
  if (text == "canny") return DetectorKind::kCanny;
  throw std::invalid_argument("unknown detector '" + std::string(text) + "'");
}

struct EmitFlags {
  bool ppm = false;
  bool obj = false;
  bool metrics = false;
};

/// Experiment switches for one run. Exactly one of `input` and `phantom`
/// supplies the volume.
struct PipelineConfig {
  std::optional<fs::path> input;
  std::optional<PhantomSpec> phantom;
  fs::path out = "out";
  Preprocessor pre;
  DetectorKind detector = DetectorKind::kBoth;
  RpeConfig rpe;
  IlmConfig ilm;
  TraceParams trace;
  EmitFlags emit;
  double obj_z_scale = 1.0;
  bool rescale = false;
  std::optional<std::uint64_t> seed;  // overrides the phantom seed
  unsigned threads = 1;
};

/// Applies one `key = value` setting (shared by config files and flags).
inline void apply_setting(PipelineConfig& cfg, const KeyValue& kv, const std::string& source) {
  const std::string& k = kv.key;
  auto flag = [&]() {
    if (kv.value == "1" || kv.value == "true" || kv.value == "on" || kv.value.empty()) return true;
    if (kv.value == "0" || kv.value == "false" || kv.value == "off") return false;
    throw ParseError(source, kv.line, "bad boolean for '" + k + "'");
  };
  try {
    if (k == "input") cfg.input = kv.value;
    else if (k == "out") cfg.out = kv.value;
    else if (k == "phantom") cfg.phantom = parse_phantom_spec(detail::read_file(kv.value), kv.value);
    else if (k == "pre") cfg.pre = parse_preprocessor(kv.value);
    else if (k == "pre_3d") cfg.pre.thin_across_slices = flag();
    else if (k == "detector") cfg.detector = parse_detector(kv.value);
    else if (k == "w1") cfg.trace.weights.canny = parse_number<double>(kv, source);
    else if (k == "w2") cfg.trace.weights.axial = parse_number<double>(kv, source);
    else if (k == "w3") cfg.trace.weights.others = parse_number<double>(kv, source);
    else if (k == "sigma") cfg.trace.smoothing_sigma = parse_number<double>(kv, source);
    else if (k == "canny_sigma") cfg.trace.canny.sigma = parse_number<double>(kv, source);
    else if (k == "canny_low") cfg.trace.canny.low = parse_number<double>(kv, source);
    else if (k == "canny_high") cfg.trace.canny.high = parse_number<double>(kv, source);
    else if (k == "align") cfg.trace.align = flag();
    else if (k == "max_shift") cfg.trace.max_shift = parse_number<int>(kv, source);
    else if (k == "rpe_iterations") cfg.rpe.iterations = parse_number<std::size_t>(kv, source);
    else if (k == "ilm_iterations") cfg.ilm.iterations = parse_number<std::size_t>(kv, source);
    else if (k == "obj_scale") cfg.obj_z_scale = parse_number<double>(kv, source);
    else if (k == "rescale") cfg.rescale = flag();
    else if (k == "threads") cfg.threads = parse_number<unsigned>(kv, source);
    else if (k == "seed") cfg.seed = parse_number<std::uint64_t>(kv, source);
    else if (k == "emit") {
      cfg.emit = {};
      std::string_view rest = kv.value;
      while (!rest.empty()) {
        const auto cut = rest.find(',');
        const auto item = rest.substr(0, cut);
        if (item == "ppm") cfg.emit.ppm = true;
        else if (item == "obj") cfg.emit.obj = true;
        else if (item == "metrics") cfg.emit.metrics = true;
        else if (!item.empty()) throw std::invalid_argument("unknown emit target '" + std::string(item) + "'");
        if (cut == std::string_view::npos) break;
        rest = rest.substr(cut + 1);
      }
    } else {
      throw ParseError(source, kv.line, "unknown setting '" + k + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, kv.line, e.what());
  }
}

inline PipelineConfig parse_pipeline_config(std::string_view text, const std::string& name) {
  PipelineConfig cfg;
  for (const auto& kv : parse_key_values(text, name)) apply_setting(cfg, kv, name);
  return cfg;
}

/// What a failing stage threw, kept so callers can map it to an exit code.
enum class ErrorKind { kUsage, kIo, kDegenerate };

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, ErrorKind kind, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const noexcept { return stage_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  ErrorKind kind_;
};

struct StageTiming {
  std::string name;
  double ms = 0.0;
};

struct RunReport {
  std::vector<StageTiming> stages;
  double total_ms = 0.0;
  std::vector<fs::path> outputs;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, SurfaceMetrics>> metrics;
  std::vector<std::pair<std::string, Surface>> surfaces;

  std::string text() const {
    std::string out;
    for (const auto& s : stages) out += "stage " + s.name + " " + format_double(s.ms) + " ms\n";
    out += "total " + format_double(total_ms) + " ms\n";
    for (const auto& w : warnings) out += "warning " + w + "\n";
    for (const auto& [name, m] : metrics)
      out += "metrics " + name + " mae=" + format_double(m.mae) + " max=" + format_double(m.max_abs) +
             " bias=" + format_double(m.bias) + " defined=" + format_double(m.defined_fraction) + "\n";
    return out;
  }
};

/// Applies a preprocessor slice by slice. Binary results are stored as
/// 0/255 so the detectors see ordinary intensities.
inline Volume preprocess(const Volume& in, const Preprocessor& pre, unsigned threads,
                         std::vector<std::string>* warnings = nullptr) {
  if (pre.kind == Preprocessor::Kind::kNone) return in;
  Volume out = in;
  std::vector<BinaryImage> binary(in.slices());
  std::vector<char> degenerate(in.slices(), 0);
  parallel_for(in.slices(), threads, [&](std::size_t y) {
    const auto image = in.bscan(y);
    if (pre.kind == Preprocessor::Kind::kBinarize) {
      binary[y] = binarize(image, pre.threshold);
    } else {
      const OtsuResult t = otsu_threshold(image);
      degenerate[y] = t.degenerate;
      binary[y] = binarize(image, t.threshold);
    }
    if (pre.kind == Preprocessor::Kind::kZhangSuen)
      for (ZsOp op : pre.ops) {
        if (op == ZsOp::kFill) binary[y] = fill(binary[y]);
        else if (op == ZsOp::kContour) binary[y] = contour(binary[y]);
        else if (!pre.thin_across_slices) binary[y] = zhang_suen_thin(binary[y]);
      }
  });
  if (pre.kind == Preprocessor::Kind::kZhangSuen && pre.thin_across_slices) {
    // Cross-slice pruning couples slices: run the op sequence stack-wide.
    for (std::size_t y = 0; y < in.slices(); ++y) {
      const OtsuResult t = otsu_threshold(in.bscan(y));
      binary[y] = binarize(in.bscan(y), t.threshold);
    }
    for (ZsOp op : pre.ops) {
      if (op == ZsOp::kThin) {
        binary = zhang_suen_thin_stack(binary);
        continue;
      }
      for (auto& b : binary) b = op == ZsOp::kFill ? fill(b) : contour(b);
    }
  }
  for (std::size_t y = 0; y < in.slices(); ++y) {
    if (degenerate[y] && warnings) warnings->push_back("preprocess: b-scan " + std::to_string(y) + " is constant");
    Grid2<std::uint8_t> img(in.width(), in.height());
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = binary[y].data()[i] ? 255 : 0;
    out.set_bscan(y, img);
  }
  return out;
}

/// load -> preprocess -> detect -> export, timing each stage on the wall
/// clock. Output files of a failed run are removed.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
  using clock = std::chrono::steady_clock;
  RunReport report;
  const auto run_start = clock::now();
  std::string stage;
  std::optional<GroundTruth> truth;

  auto timed = [&](const char* name, auto&& body) {
    stage = name;
    const auto t0 = clock::now();
    body();
    report.stages.push_back({name, std::chrono::duration<double, std::milli>(clock::now() - t0).count()});
  };
  auto write = [&](const fs::path& rel, std::string_view bytes) {
    const fs::path path = cfg.out / rel;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string());
    detail::write_file(path, bytes);
    report.outputs.push_back(path);
  };

  try {
    if (cfg.input.has_value() == cfg.phantom.has_value())
      throw std::invalid_argument("exactly one of an input directory and a phantom spec is required");
    if (cfg.emit.metrics && !cfg.phantom) throw std::invalid_argument("metrics need a phantom ground truth");

    Volume volume;
    timed(cfg.phantom ? "phantom" : "load", [&] {
      if (cfg.phantom) {
        PhantomSpec spec = *cfg.phantom;
        if (cfg.seed) spec.seed = *cfg.seed;
        Phantom p = generate_phantom(spec, cfg.threads);
        volume = std::move(p.volume);
        truth = std::move(p.truth);
      } else {
        volume = load_ascan_text(*cfg.input, {std::nullopt, cfg.rescale, cfg.threads});
      }
    });
    timed("preprocess", [&] { volume = preprocess(volume, cfg.pre, cfg.threads, &report.warnings); });

    timed("detect", [&] {
      if (cfg.detector == DetectorKind::kRpe || cfg.detector == DetectorKind::kBoth) {
        RpeConfig rc = cfg.rpe;
        rc.threads = cfg.threads;
        RpeResult r = detect_rpe(volume, rc);
        report.warnings.insert(report.warnings.end(), r.warnings.begin(), r.warnings.end());
        report.surfaces.emplace_back("rpe", std::move(r.surface));
      }
      if (cfg.detector == DetectorKind::kIlm || cfg.detector == DetectorKind::kBoth) {
        IlmConfig ic = cfg.ilm;
        ic.threads = cfg.threads;
        IlmResult r = detect_ilm(volume, ic);
        report.warnings.insert(report.warnings.end(), r.warnings.begin(), r.warnings.end());
        report.surfaces.emplace_back("ilm", std::move(r.surface));
      }
      if (cfg.detector == DetectorKind::kCanny) {
        TraceParams tp = cfg.trace;
        tp.threads = cfg.threads;
        report.surfaces.emplace_back("canny", trace_boundary(volume, tp).surface);
      }
    });

    timed("export", [&] {
      for (const auto& [name, s] : report.surfaces) {
        write(name + "_surface.txt", encode_surface_text(s));
        if (cfg.emit.obj) write(name + ".obj", encode_obj(s, cfg.obj_z_scale));
        if (cfg.emit.metrics) {
          const Surface& t = name == "rpe" ? truth->rpe : name == "ilm" ? truth->ilm : truth->rpe_bottom_edge;
          report.metrics.emplace_back(name, surface_error(s, t));
        }
      }
      if (cfg.emit.metrics) {
        std::string text;
        for (const auto& [name, m] : report.metrics) {
          text += "[" + name + "]\n" + encode_metrics(m);
        }
        write("metrics.txt", text);
      }
      if (cfg.emit.ppm) {
        const OverlayColor colors[] = {OverlayColor::kRed, OverlayColor::kGreen, OverlayColor::kYellow};
        for (std::size_t y = 0; y < volume.slices(); ++y) {
          SliceImage img = SliceImage::from_bscan(volume, y);
          for (std::size_t k = 0; k < report.surfaces.size(); ++k)
            img.mark_surface(report.surfaces[k].second, y, colors[k % 3]);
          std::array<char, 32> name{};
          std::snprintf(name.data(), name.size(), "ppm/slice_%04zu.ppm", y);
          write(name.data(), encode_ppm(img));
        }
      }
    });
  } catch (const std::exception& e) {
    for (const auto& p : report.outputs) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    ErrorKind kind = ErrorKind::kUsage;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e)) kind = ErrorKind::kIo;
    else if (dynamic_cast<const DegenerateError*>(&e)) kind = ErrorKind::kDegenerate;
    else if (!dynamic_cast<const std::invalid_argument*>(&e) && !dynamic_cast<const std::out_of_range*>(&e))
      kind = ErrorKind::kDegenerate;
    throw StageError(stage.empty() ? "config" : stage, kind, e.what());
  }
  report.total_ms = std::chrono::duration<double, std::milli>(clock::now() - run_start).count();
  return report;
}

}  // namespace octseg
