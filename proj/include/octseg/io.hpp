#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "octseg/error.hpp"
#include "octseg/grid.hpp"
#include "octseg/parallel.hpp"
#include "octseg/volume.hpp"

namespace octseg {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// "slice2" < "slice10": digit runs compare by numeric value.
inline bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      auto ra = a.substr(i, ie - i), rb = b.substr(j, je - j);
      while (ra.size() > 1 && ra.front() == '0') ra.remove_prefix(1);
      while (rb.size() > 1 && rb.front() == '0') rb.remove_prefix(1);
      if (ra.size() != rb.size()) return ra.size() < rb.size();
      if (ra != rb) return ra < rb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;  // e.g. "01" vs "1": fall back to a total order
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// Splits into lines (LF or CRLF); a final newline does not start a line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && split_ws(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// A-scan text volumes

struct VolumeDims {
  std::size_t width = 0;   // W, lines per file
  std::size_t height = 0;  // M, tokens per line
  std::size_t slices = 0;  // N, files
};

struct LoadOptions {
  std::optional<VolumeDims> expected;
  /// Linearly map the largest value to 255. Without it, values above 255
  /// are a parse error.
  bool rescale = false;
  unsigned threads = 1;
};

/// `.txt` files of a directory in natural filename order.
inline std::vector<fs::path> list_ascan_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return files;
}

/// Loads one B-scan per `.txt` file (natural filename order gives y), one
/// A-scan per line (line order gives x), whitespace-separated non-negative
/// decimal integers per line (token order gives z).
inline Volume load_ascan_text(const fs::path& dir, const LoadOptions& opts = {}) {
  const auto files = list_ascan_files(dir);
  if (files.empty()) throw IoError("no .txt A-scan files in " + dir.string());

  struct Parsed {
    std::size_t lines = 0, tokens = 0;
    std::vector<std::uint32_t> values;
    std::uint32_t max = 0;
    std::size_t max_line = 0;
  };
  std::vector<Parsed> parsed(files.size());
  parallel_for(files.size(), opts.threads, [&](std::size_t f) {
    const std::string name = files[f].string();
    const std::string text = detail::read_file(files[f]);
    const auto lines = detail::split_lines(text);
    if (lines.empty()) throw ParseError(name, 1, "file holds no A-scans");
    Parsed& p = parsed[f];
    p.lines = lines.size();
    for (std::size_t li = 0; li < lines.size(); ++li) {
      const auto tokens = detail::split_ws(lines[li]);
      if (tokens.empty()) throw ParseError(name, li + 1, "empty A-scan line");
      if (li == 0) {
        p.tokens = tokens.size();
        p.values.reserve(p.lines * p.tokens);
      } else if (tokens.size() != p.tokens) {
        throw ParseError(name, li + 1, "expected " + std::to_string(p.tokens) + " values, found " +
                                           std::to_string(tokens.size()));
      }
      for (auto tok : tokens) {
        std::uint32_t v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          throw ParseError(name, li + 1, "not a non-negative integer: '" + std::string(tok) + "'");
        if (v > p.max) {
          p.max = v;
          p.max_line = li + 1;
        }
        p.values.push_back(v);
      }
    }
  });

  const VolumeDims dims{parsed[0].lines, parsed[0].tokens, files.size()};
  std::uint32_t max = 0;
  std::size_t max_file = 0;
  for (std::size_t f = 0; f < parsed.size(); ++f) {
    if (parsed[f].lines != dims.width)
      throw ParseError(files[f].string(), parsed[f].lines,
                       "expected " + std::to_string(dims.width) + " A-scan lines");
    if (parsed[f].tokens != dims.height)
      throw ParseError(files[f].string(), 1, "expected " + std::to_string(dims.height) + " values per line");
    if (parsed[f].max > max) {
      max = parsed[f].max;
      max_file = f;
    }
  }
  if (opts.expected && (opts.expected->width != dims.width || opts.expected->height != dims.height ||
                        opts.expected->slices != dims.slices))
    throw ParseError(dir.string(), 0, "volume dimensions differ from the expected ones");
  if (!opts.rescale && max > static_cast<std::uint32_t>(Volume::kMaxIntensity))
    throw ParseError(files[max_file].string(), parsed[max_file].max_line,
                     "value " + std::to_string(max) + " exceeds the 8-bit range (enable rescaling)");

  Volume vol(dims.width, dims.height, dims.slices);
  for (std::size_t y = 0; y < dims.slices; ++y) {
    const auto& vals = parsed[y].values;
    for (std::size_t x = 0; x < dims.width; ++x) {
      auto a = vol.ascan(x, y);
      for (std::size_t z = 0; z < dims.height; ++z) {
        std::uint64_t v = vals[x * dims.height + z];
        if (opts.rescale && max > 0) v = (v * 255 * 2 + max) / (2ULL * max);
        a[z] = static_cast<Volume::value_type>(v);
      }
    }
  }
  return vol;
}

/// Writes the volume in the layout load_ascan_text reads:
/// `<prefix>NNNN.txt` per B-scan.
inline void write_ascan_text(const Volume& vol, const fs::path& dir, std::string_view prefix = "slice_") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t y = 0; y < vol.slices(); ++y) {
    std::string text;
    text.reserve(vol.width() * vol.height() * 4);
    for (std::size_t x = 0; x < vol.width(); ++x) {
      auto a = vol.ascan(x, y);
      for (std::size_t z = 0; z < a.size(); ++z) {
        if (z) text.push_back(' ');
        text += std::to_string(a[z]);
      }
      text.push_back('\n');
    }
    std::array<char, 16> num{};
    std::snprintf(num.data(), num.size(), "%04zu", y);
    detail::write_file(dir / (std::string(prefix) + num.data() + ".txt"), text);
  }
}

// ---------------------------------------------------------------------------
// PPM

enum class OverlayColor { kRed, kGreen, kBlue, kYellow };

inline std::array<std::uint8_t, 3> overlay_rgb(OverlayColor c) {
  switch (c) {
    case OverlayColor::kRed: return {255, 0, 0};
    case OverlayColor::kGreen: return {0, 255, 0};
    case OverlayColor::kBlue: return {0, 0, 255};
    case OverlayColor::kYellow: return {255, 255, 0};
  }
  return {255, 0, 0};
}

struct OverlayMark {
  std::size_t x = 0;
  std::size_t z = 0;
  OverlayColor color = OverlayColor::kRed;
};

/// One B-scan for rendering: W x M values addressed (x, z). Each value is
/// multiplied by `scale` and rounded before 8-bit encoding.
struct SliceImage {
  Matrix pixels;
  double scale = 1.0;
  std::vector<OverlayMark> marks;

  static SliceImage from_bscan(const Volume& vol, std::size_t y) {
    SliceImage s;
    s.pixels = Matrix(vol.width(), vol.height());
    for (std::size_t x = 0; x < vol.width(); ++x) {
      auto a = vol.ascan(x, y);
      for (std::size_t z = 0; z < vol.height(); ++z) s.pixels(x, z) = a[z];
    }
    return s;
  }

  /// Marks every defined crossing of `surface` with slice y.
  void mark_surface(const Surface& surface, std::size_t y, OverlayColor color) {
    for (std::size_t x = 0; x < surface.width() && x < pixels.nx(); ++x)
      if (surface.defined(x, y)) {
        const auto z = static_cast<std::size_t>(std::floor(surface(x, y) + 0.5));
        if (z < pixels.ny()) marks.push_back({x, z, color});
      }
  }
};

/// Binary PPM: "P6\n<W> <M>\n255\n" then W*M RGB triples, rows top
/// (z = 0) to bottom. Gray values repeat across R, G and B; overlay marks
/// replace the pixel with their color.
inline std::string encode_ppm(const SliceImage& img) {
  const std::size_t w = img.pixels.nx(), h = img.pixels.ny();
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * w * h);
  for (std::size_t z = 0; z < h; ++z)
    for (std::size_t x = 0; x < w; ++x) {
      const double v = std::round(img.pixels(x, z) * img.scale);
      if (!(v >= 0.0 && v <= 255.0)) throw std::invalid_argument("pixel not representable in 8 bits");
      const auto g = static_cast<char>(static_cast<std::uint8_t>(v));
      const std::size_t o = header + 3 * (z * w + x);
      out[o] = out[o + 1] = out[o + 2] = g;
    }
  for (const auto& m : img.marks) {
    if (m.x >= w || m.z >= h) throw std::invalid_argument("overlay mark outside the image");
    const auto rgb = overlay_rgb(m.color);
    const std::size_t o = header + 3 * (m.z * w + m.x);
    for (int c = 0; c < 3; ++c) out[o + c] = static_cast<char>(rgb[c]);
  }
  return out;
}

inline void write_ppm(const SliceImage& img, const fs::path& path) {
  detail::write_file(path, encode_ppm(img));
}

// ---------------------------------------------------------------------------
// OBJ

/// Triangulated height field of a surface: vertex "v x y z*scale" for every
/// defined entry (y outer, x inner; indices 1-based in that order). A grid
/// cell with four defined corners yields two triangles split along its
/// (x, y)-(x+1, y+1) diagonal; a cell with exactly three yields one.
/// Cells with fewer leave a hole.
inline std::string encode_obj(const Surface& s, double z_scale = 1.0) {
  if (s.width() < 2 || s.slices() < 2) throw std::invalid_argument("obj export needs a surface of at least 2x2");
  Grid2<std::size_t> index(s.width(), s.slices(), 0);
  std::string out;
  std::size_t next = 1;
  for (std::size_t y = 0; y < s.slices(); ++y)
    for (std::size_t x = 0; x < s.width(); ++x) {
      if (!s.defined(x, y)) continue;
      index(x, y) = next++;
      out += "v " + std::to_string(x) + " " + std::to_string(y) + " " + format_double(s(x, y) * z_scale) + "\n";
    }
  std::size_t faces = 0;
  for (std::size_t y = 0; y + 1 < s.slices(); ++y)
    for (std::size_t x = 0; x + 1 < s.width(); ++x) {
      const std::array<std::size_t, 4> quad = {index(x, y), index(x + 1, y), index(x + 1, y + 1), index(x, y + 1)};
      const auto defined = std::count_if(quad.begin(), quad.end(), [](std::size_t i) { return i != 0; });
      auto face = [&](std::size_t a, std::size_t b, std::size_t c) {
        out += "f " + std::to_string(a) + " " + std::to_string(b) + " " + std::to_string(c) + "\n";
        ++faces;
      };
      if (defined == 4) {
        face(quad[0], quad[1], quad[2]);
        face(quad[0], quad[2], quad[3]);
      } else if (defined == 3) {
        std::array<std::size_t, 3> tri{};
        std::size_t k = 0;
        for (auto i : quad)
          if (i) tri[k++] = i;
        face(tri[0], tri[1], tri[2]);
      }
    }
  if (faces == 0) throw std::invalid_argument("surface has no three mutually adjacent defined entries");
  return out;
}

inline void export_obj(const Surface& s, const fs::path& path, double z_scale = 1.0) {
  detail::write_file(path, encode_obj(s, z_scale));
}

struct ObjMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<std::size_t, 3>> faces;  // 1-based
};

/// Reads v/f records of an ASCII OBJ; face indices must reference
/// existing vertices.
inline ObjMesh parse_obj(std::string_view text, const std::string& name = "<obj>") {
  ObjMesh mesh;
  const auto lines = detail::split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto tok = detail::split_ws(lines[li]);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok[0] == "v") {
      if (tok.size() != 4) throw ParseError(name, li + 1, "vertex needs 3 coordinates");
      std::array<double, 3> v{};
      for (int k = 0; k < 3; ++k) {
        auto [ptr, ec] = std::from_chars(tok[k + 1].data(), tok[k + 1].data() + tok[k + 1].size(), v[k]);
        if (ec != std::errc() || ptr != tok[k + 1].data() + tok[k + 1].size())
          throw ParseError(name, li + 1, "bad vertex coordinate");
      }
      mesh.vertices.push_back(v);
    } else if (tok[0] == "f") {
      if (tok.size() != 4) throw ParseError(name, li + 1, "face must be a triangle");
      std::array<std::size_t, 3> f{};
      for (int k = 0; k < 3; ++k) {
        auto [ptr, ec] = std::from_chars(tok[k + 1].data(), tok[k + 1].data() + tok[k + 1].size(), f[k]);
        if (ec != std::errc() || ptr != tok[k + 1].data() + tok[k + 1].size())
          throw ParseError(name, li + 1, "bad face index");
        if (f[k] < 1 || f[k] > mesh.vertices.size())
          throw ParseError(name, li + 1, "face references a missing vertex");
      }
      mesh.faces.push_back(f);
    } else {
      throw ParseError(name, li + 1, "unsupported record '" + std::string(tok[0]) + "'");
    }
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Surface grids

/// "# surface <W> <N> <M>" then one line per x holding N depths (one per
/// slice y); undefined entries are written as "nan".
inline std::string encode_surface_text(const Surface& s) {
  std::string out = "# surface " + std::to_string(s.width()) + " " + std::to_string(s.slices()) + " " +
                    std::to_string(s.depth()) + "\n";
  for (std::size_t x = 0; x < s.width(); ++x) {
    for (std::size_t y = 0; y < s.slices(); ++y) {
      if (y) out.push_back(' ');
      out += format_double(s(x, y));
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_surface_text(const Surface& s, const fs::path& path) {
  detail::write_file(path, encode_surface_text(s));
}

inline Surface parse_surface_text(std::string_view text, const std::string& name = "<surface>") {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(name, 1, "empty surface file");
  const auto head = detail::split_ws(lines[0]);
  std::array<std::size_t, 3> dims{};
  if (head.size() != 5 || head[0] != "#" || head[1] != "surface")
    throw ParseError(name, 1, "missing '# surface W N M' header");
  for (int k = 0; k < 3; ++k) {
    auto [ptr, ec] = std::from_chars(head[k + 2].data(), head[k + 2].data() + head[k + 2].size(), dims[k]);
    if (ec != std::errc() || ptr != head[k + 2].data() + head[k + 2].size() || dims[k] == 0)
      throw ParseError(name, 1, "bad surface dimension");
  }
  if (lines.size() - 1 != dims[0]) throw ParseError(name, lines.size(), "line count differs from width");
  Surface s(dims[0], dims[1], dims[2]);
  for (std::size_t x = 0; x < dims[0]; ++x) {
    const auto tok = detail::split_ws(lines[x + 1]);
    if (tok.size() != dims[1]) throw ParseError(name, x + 2, "value count differs from slice count");
    for (std::size_t y = 0; y < dims[1]; ++y) {
      if (tok[y] == "nan") continue;
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok[y].data(), tok[y].data() + tok[y].size(), v);
      if (ec != std::errc() || ptr != tok[y].data() + tok[y].size())
        throw ParseError(name, x + 2, "bad depth value '" + std::string(tok[y]) + "'");
      if (!(v >= 0.0 && v < static_cast<double>(dims[2]))) throw ParseError(name, x + 2, "depth outside [0, M)");
      s.set(x, y, v);
    }
  }
  return s;
}

inline Surface load_surface_text(const fs::path& path) {
  return parse_surface_text(detail::read_file(path), path.string());
}

}  // namespace octseg
