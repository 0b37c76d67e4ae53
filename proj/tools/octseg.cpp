// Command-line front end: convert, segment, phantom, eval.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "octseg/octseg.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kDegenerate = 3 };

int exit_code(octseg::ErrorKind kind) {
  switch (kind) {
    case octseg::ErrorKind::kUsage: return kUsage;
    case octseg::ErrorKind::kIo: return kIo;
    case octseg::ErrorKind::kDegenerate: return kDegenerate;
  }
  return kUsage;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const octseg::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const octseg::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const octseg::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const octseg::DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OCT retinal layer segmentation"};
  app.require_subcommand(1);

  // convert ----------------------------------------------------------------
  auto* convert = app.add_subcommand("convert", "Dump A-scan text volumes as PPM slices");
  std::string conv_in, conv_out = "ppm";
  bool conv_rescale = false;
  unsigned conv_threads = 1;
  convert->add_option("--input", conv_in, "Directory of .txt B-scans")->required();
  convert->add_option("--out", conv_out, "Output directory");
  convert->add_flag("--rescale", conv_rescale, "Map the largest value to 255");
  convert->add_option("--threads", conv_threads)->check(CLI::PositiveNumber);

  // segment ----------------------------------------------------------------
  auto* segment = app.add_subcommand("segment", "Run the detection pipeline");
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> flag_values;
  auto setting = [&](const char* flag, const char* key, const char* help) {
    segment->add_option_function<std::string>(
        flag, [&flag_values, key](const std::string& v) { flag_values.emplace_back(key, v); }, help);
  };
  segment->add_option("--config", config_file, "key = value settings file (flags take precedence)");
  setting("--input", "input", "Directory of .txt B-scans");
  setting("--phantom", "phantom", "Phantom spec file (generate instead of loading)");
  setting("--out", "out", "Output directory");
  setting("--pre", "pre", "none | binarize=<T> | otsu | zs=<thin,fill,contour>");
  setting("--detector", "detector", "rpe | ilm | both | canny");
  setting("--w1", "w1", "Canny edge weight");
  setting("--w2", "w2", "Axial gradient weight");
  setting("--w3", "w3", "Extra cost term weight");
  setting("--sigma", "sigma", "Cross-B-scan smoothing sigma (0 = off)");
  setting("--canny-sigma", "canny_sigma", "Canny blur sigma");
  setting("--canny-low", "canny_low", "Canny low threshold");
  setting("--canny-high", "canny_high", "Canny high threshold");
  setting("--max-shift", "max_shift", "Per-step A-scan alignment bound");
  setting("--seed", "seed", "Phantom seed");
  setting("--threads", "threads", "Worker threads");
  setting("--emit", "emit", "Comma list of ppm, obj, metrics");
  setting("--obj-scale", "obj_scale", "OBJ depth scale");
  segment->add_flag_callback("--align", [&] { flag_values.emplace_back("align", "1"); }, "Align A-scans first");
  segment->add_flag_callback("--rescale", [&] { flag_values.emplace_back("rescale", "1"); },
                             "Map the largest input value to 255");
  segment->add_flag_callback("--pre-3d", [&] { flag_values.emplace_back("pre_3d", "1"); },
                             "Thin with inter-slice pruning");

  // phantom ----------------------------------------------------------------
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic volume with ground truth");
  std::string ph_spec, ph_out = "phantom";
  std::optional<std::uint64_t> ph_seed;
  unsigned ph_threads = 1;
  phantom->add_option("--spec", ph_spec, "Phantom spec file (defaults otherwise)");
  phantom->add_option("--out", ph_out, "Output directory");
  phantom->add_option("--seed", ph_seed, "Override the spec seed");
  phantom->add_option("--threads", ph_threads)->check(CLI::PositiveNumber);

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Compare a detected surface with a truth surface");
  std::string ev_detected, ev_truth, ev_out;
  eval->add_option("--detected", ev_detected)->required();
  eval->add_option("--truth", ev_truth)->required();
  eval->add_option("--out", ev_out, "Write the metrics to this file as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*convert) {
    return guarded([&] {
      const octseg::Volume vol = octseg::load_ascan_text(conv_in, {std::nullopt, conv_rescale, conv_threads});
      octseg::fs::create_directories(conv_out);
      for (std::size_t y = 0; y < vol.slices(); ++y) {
        char name[32];
        std::snprintf(name, sizeof name, "slice_%04zu.ppm", y);
        octseg::write_ppm(octseg::SliceImage::from_bscan(vol, y), octseg::fs::path(conv_out) / name);
      }
      std::cout << "wrote " << vol.slices() << " slices (" << vol.width() << "x" << vol.height() << ") to "
                << conv_out << "\n";
      return int{kOk};
    });
  }

  if (*segment) {
    return guarded([&] {
      octseg::PipelineConfig cfg;
      if (!config_file.empty())
        cfg = octseg::parse_pipeline_config(octseg::detail::read_file(config_file), config_file);
      // A spec file named by a flag is applied before any flag-level seed.
      std::stable_partition(flag_values.begin(), flag_values.end(),
                            [](const auto& kv) { return kv.first == "phantom" || kv.first == "input"; });
      for (const auto& [k, v] : flag_values) {
        if (k == "input") cfg.phantom.reset();
        if (k == "phantom") cfg.input.reset();
        try {
          octseg::apply_setting(cfg, {k, v, 0}, "--" + k);
        } catch (const octseg::ParseError& e) {
          // A bad flag value is a usage error; errors inside named files stay parse errors.
          if (e.file() == "--" + k) throw std::invalid_argument(e.what());
          throw;
        }
      }
      const octseg::RunReport report = octseg::run_pipeline(cfg);
      const std::string text = report.text();
      octseg::detail::write_file(cfg.out / "report.txt", text);
      std::cout << text;
      return int{kOk};
    });
  }

  if (*phantom) {
    return guarded([&] {
      octseg::PhantomSpec spec;
      if (!ph_spec.empty()) spec = octseg::parse_phantom_spec(octseg::detail::read_file(ph_spec), ph_spec);
      if (ph_seed) spec.seed = *ph_seed;
      const octseg::Phantom p = octseg::generate_phantom(spec, ph_threads);
      const octseg::fs::path out = ph_out;
      octseg::write_ascan_text(p.volume, out / "volume");
      octseg::write_surface_text(p.truth.ilm, out / "ilm_truth.txt");
      octseg::write_surface_text(p.truth.rpe, out / "rpe_truth.txt");
      octseg::write_surface_text(p.truth.rpe_bottom_edge, out / "rpe_edge_truth.txt");
      octseg::detail::write_file(out / "phantom.kv", octseg::encode_phantom_spec(spec));
      std::cout << "wrote phantom " << spec.width << "x" << spec.height << "x" << spec.slices << " to "
                << out.string() << "\n";
      return int{kOk};
    });
  }

  if (*eval) {
    return guarded([&] {
      const auto metrics =
          octseg::surface_error(octseg::load_surface_text(ev_detected), octseg::load_surface_text(ev_truth));
      const std::string text = octseg::encode_metrics(metrics);
      if (!ev_out.empty()) octseg::detail::write_file(ev_out, text);
      std::cout << text;
      return int{kOk};
    });
  }
  return kUsage;
}
