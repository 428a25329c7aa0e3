#pragma once

// Serialization: scene and camera files, PNG and raw float dumps, optimizer
// checkpoints, and the plain-text / CSV report formats used by the CLI.
//
// Scene file:   "skewsplat-scene 1 text <n>" then one line of 18 numbers per
//               primitive (mu[3] quat[4] log_scale[3] mag_raw dir_raw[3]
//               opacity_raw color[3]); or "... binary <n>\n" followed by
//               n * 18 little-endian float64.
// Camera file:  "skewsplat-cameras 1 <n>" then per line the 3x4 world-to-view
//               block (row major), fx fy cx cy width height and
//               pinhole|orthographic.
// Blank lines and lines starting with '#' are skipped in text formats.

#include "skewsplat/camera.hpp"
#include "skewsplat/fit1d.hpp"
#include "skewsplat/image.hpp"
#include "skewsplat/optimizer.hpp"
#include "skewsplat/snkernel.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace skewsplat {

inline constexpr int kSceneVersion = 1;
inline constexpr int kCameraVersion = 1;
inline constexpr int kSceneRecordWidth = 18;

// ---- number formatting ----

/// Shortest representation that parses back to the same double.
inline std::string fmt_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  // from_chars does not accept a leading '+'.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw IoError(where + ": expected a number, got '" + std::string(tok) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view tok, const std::string& where) {
  long long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw IoError(where + ": expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t j = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

// ---- files ----

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void ensure_parent(const std::filesystem::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
}

/// Writes through a temporary file and renames, so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  ensure_parent(path);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

namespace detail {

/// Line cursor that skips comments and remembers 1-based line numbers.
class LineReader {
 public:
  LineReader(std::string_view text, std::string name) : text_(text), name_(std::move(name)) {}

  bool next(std::string_view& line) {
    while (pos_ < text_.size()) {
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      line = text_.substr(pos_, end - pos_);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      pos_ = end + 1;
      ++lineno_;
      const auto toks = split_ws(line);
      if (toks.empty() || toks.front().front() == '#') continue;
      return true;
    }
    return false;
  }

  std::string where() const { return name_ + ":" + std::to_string(lineno_); }
  std::size_t offset() const { return pos_; }

 private:
  std::string_view text_;
  std::string name_;
  std::size_t pos_ = 0;
  int lineno_ = 0;
};

inline std::array<double, kSceneRecordWidth> flatten(const Primitive3D& p) {
  return {p.mu[0],       p.mu[1],       p.mu[2],       p.quat[0],          p.quat[1],
          p.quat[2],     p.quat[3],     p.log_scale[0], p.log_scale[1],    p.log_scale[2],
          p.skew.mag_raw, p.skew.dir_raw[0], p.skew.dir_raw[1], p.skew.dir_raw[2],
          p.opacity_raw, p.color[0],    p.color[1],    p.color[2]};
}

inline Primitive3D unflatten(const double* v) {
  Primitive3D p;
  p.mu = Vec3(v[0], v[1], v[2]);
  p.quat = Vec4(v[3], v[4], v[5], v[6]);
  p.log_scale = Vec3(v[7], v[8], v[9]);
  p.skew.mag_raw = v[10];
  p.skew.dir_raw = Vec3(v[11], v[12], v[13]);
  p.opacity_raw = v[14];
  p.color = Vec3(v[15], v[16], v[17]);
  return p;
}

inline void put_f64_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

// ---- scene files ----

enum class SceneFormat { text, binary };

inline std::string serialize_scene(const std::vector<Primitive3D>& scene,
                                   SceneFormat fmt = SceneFormat::text) {
  std::string out = "skewsplat-scene " + std::to_string(kSceneVersion) +
                    (fmt == SceneFormat::text ? " text " : " binary ") +
                    std::to_string(scene.size()) + "\n";
  for (const auto& p : scene) {
    const auto v = detail::flatten(p);
    if (fmt == SceneFormat::binary) {
      for (double x : v) detail::put_f64_le(out, x);
      continue;
    }
    for (int i = 0; i < kSceneRecordWidth; ++i) {
      if (i) out += ' ';
      out += fmt_double(v[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<Primitive3D> parse_scene(std::string_view text, const std::string& name = "scene") {
  detail::LineReader rd(text, name);
  std::string_view line;
  if (!rd.next(line)) throw IoError(name + ": empty file, missing header");
  const auto head = split_ws(line);
  if (head.size() != 4 || head[0] != "skewsplat-scene") {
    throw IoError(rd.where() + ": bad header, expected 'skewsplat-scene <version> text|binary <count>'");
  }
  if (parse_int(head[1], rd.where()) != kSceneVersion) {
    throw IoError(rd.where() + ": unsupported scene version " + std::string(head[1]));
  }
  const long long count = parse_int(head[3], rd.where());
  if (count < 0) throw IoError(rd.where() + ": negative primitive count");
  std::vector<Primitive3D> scene;
  scene.reserve(static_cast<std::size_t>(count));

  if (head[2] == "binary") {
    const std::size_t need = static_cast<std::size_t>(count) * kSceneRecordWidth * 8;
    const std::size_t start = rd.offset();
    if (start > text.size() || text.size() - start != need) {
      throw IoError(name + ": binary payload has " +
                    std::to_string(start > text.size() ? 0 : text.size() - start) +
                    " bytes, expected " + std::to_string(need));
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(text.data() + start);
    std::array<double, kSceneRecordWidth> v{};
    for (long long r = 0; r < count; ++r) {
      for (int i = 0; i < kSceneRecordWidth; ++i) {
        v[i] = detail::get_f64_le(bytes + (static_cast<std::size_t>(r) * kSceneRecordWidth + i) * 8);
      }
      scene.push_back(detail::unflatten(v.data()));
    }
    return scene;
  }
  if (head[2] != "text") throw IoError(rd.where() + ": unknown scene encoding '" + std::string(head[2]) + "'");

  std::array<double, kSceneRecordWidth> v{};
  while (rd.next(line)) {
    const auto toks = split_ws(line);
    if (toks.size() != kSceneRecordWidth) {
      throw IoError(rd.where() + ": expected 18 values per primitive, got " + std::to_string(toks.size()));
    }
    for (int i = 0; i < kSceneRecordWidth; ++i) v[i] = parse_double(toks[i], rd.where());
    scene.push_back(detail::unflatten(v.data()));
  }
  if (static_cast<long long>(scene.size()) != count) {
    throw IoError(name + ": header declares " + std::to_string(count) + " primitives, found " +
                  std::to_string(scene.size()));
  }
  return scene;
}

inline void write_scene(const std::filesystem::path& path, const std::vector<Primitive3D>& scene,
                        SceneFormat fmt = SceneFormat::text) {
  write_file_atomic(path, serialize_scene(scene, fmt));
}

inline std::vector<Primitive3D> read_scene(const std::filesystem::path& path) {
  return parse_scene(read_file(path), path.string());
}

// ---- camera files ----

inline std::string serialize_cameras(const std::vector<CameraModel>& cams) {
  std::string out = "skewsplat-cameras " + std::to_string(kCameraVersion) + " " +
                    std::to_string(cams.size()) + "\n";
  for (const auto& c : cams) {
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 4; ++k) out += fmt_double(c.world_to_view(r, k)) + " ";
    }
    out += fmt_double(c.fx) + " " + fmt_double(c.fy) + " " + fmt_double(c.cx) + " " +
           fmt_double(c.cy) + " " + std::to_string(c.width) + " " + std::to_string(c.height) + " " +
           (c.mode == ProjectionMode::pinhole ? "pinhole" : "orthographic") + "\n";
  }
  return out;
}

inline std::vector<CameraModel> parse_cameras(std::string_view text, const std::string& name = "cameras") {
  detail::LineReader rd(text, name);
  std::string_view line;
  if (!rd.next(line)) throw IoError(name + ": empty file, missing header");
  const auto head = split_ws(line);
  if (head.size() != 3 || head[0] != "skewsplat-cameras") {
    throw IoError(rd.where() + ": bad header, expected 'skewsplat-cameras <version> <count>'");
  }
  if (parse_int(head[1], rd.where()) != kCameraVersion) {
    throw IoError(rd.where() + ": unsupported camera version " + std::string(head[1]));
  }
  const long long count = parse_int(head[2], rd.where());
  std::vector<CameraModel> cams;
  while (rd.next(line)) {
    const auto t = split_ws(line);
    if (t.size() != 19) {
      throw IoError(rd.where() + ": expected 19 fields per camera, got " + std::to_string(t.size()));
    }
    CameraModel c;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 4; ++k) c.world_to_view(r, k) = parse_double(t[r * 4 + k], rd.where());
    }
    c.fx = parse_double(t[12], rd.where());
    c.fy = parse_double(t[13], rd.where());
    c.cx = parse_double(t[14], rd.where());
    c.cy = parse_double(t[15], rd.where());
    c.width = static_cast<int>(parse_int(t[16], rd.where()));
    c.height = static_cast<int>(parse_int(t[17], rd.where()));
    if (t[18] == "pinhole") {
      c.mode = ProjectionMode::pinhole;
    } else if (t[18] == "orthographic") {
      c.mode = ProjectionMode::orthographic;
    } else {
      throw IoError(rd.where() + ": unknown projection mode '" + std::string(t[18]) + "'");
    }
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw IoError(rd.where() + ": " + e.what());
    }
    cams.push_back(c);
  }
  if (static_cast<long long>(cams.size()) != count) {
    throw IoError(name + ": header declares " + std::to_string(count) + " cameras, found " +
                  std::to_string(cams.size()));
  }
  return cams;
}

inline std::vector<CameraModel> read_cameras(const std::filesystem::path& path) {
  return parse_cameras(read_file(path), path.string());
}

inline void write_cameras(const std::filesystem::path& path, const std::vector<CameraModel>& cams) {
  write_file_atomic(path, serialize_cameras(cams));
}

// ---- images ----

inline std::uint8_t to_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  ensure_parent(path);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  FILE* fp = std::fopen(tmp.c_str(), "wb");
  if (!fp) throw IoError("cannot write '" + path.string() + "'");
  // Declared before setjmp so a longjmp never skips a destructor.
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    std::filesystem::remove(tmp);
    throw IoError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    for (int i = 0; i < img.width * 3; ++i) row[i] = to_u8(img.data[img.index(0, y) + i]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  std::filesystem::rename(tmp, path);
}

/// Reads an 8-bit or 16-bit PNG into [0, 1] RGB (alpha dropped, gray expanded).
inline Image read_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> row;
  Image img;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("'" + path.string() + "' is not a readable PNG");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  row.resize(png_get_rowbytes(png, info));
  img = Image(w, h);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int i = 0; i < w * 3; ++i) img.data[img.index(0, y) + i] = row[i] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

/// Raw planar float32 dump: all R values, then G, then B, little endian, no header.
inline std::string serialize_float_dump(const Image& img) {
  std::string out;
  out.reserve(img.data.size() * 4);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.data[p * 3 + c]));
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  return out;
}

inline Image parse_float_dump(std::string_view bytes, int width, int height) {
  Image img(width, height);
  if (bytes.size() != img.data.size() * 4) throw IoError("float dump size does not match image size");
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      const std::size_t o = (c * img.pixel_count() + p) * 4;
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[o + i]) << (8 * i);
      img.data[p * 3 + c] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

// ---- optimizer checkpoints ----

namespace detail {

inline void put_vec(std::ostringstream& os, const char* key, const std::vector<double>& v) {
  os << key << ' ' << v.size();
  for (double x : v) os << ' ' << fmt_double(x);
  os << '\n';
}

inline std::vector<double> get_vec(LineReader& rd, std::string_view key) {
  std::string_view line;
  if (!rd.next(line)) throw IoError(rd.where() + ": missing '" + std::string(key) + "'");
  const auto t = split_ws(line);
  if (t.size() < 2 || t[0] != key) throw IoError(rd.where() + ": expected '" + std::string(key) + "'");
  const auto n = static_cast<std::size_t>(parse_int(t[1], rd.where()));
  if (t.size() != n + 2) throw IoError(rd.where() + ": '" + std::string(key) + "' length mismatch");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = parse_double(t[i + 2], rd.where());
  return v;
}

}  // namespace detail

inline std::string serialize_train_state(const TrainState& st) {
  std::ostringstream os;
  os << "skewsplat-trainstate 1\n";
  os << "iter " << st.iter << '\n';
  os << "rng_seed " << st.rng_seed << '\n';
  os << "rng " << st.rng << '\n';
  auto slot = [&](const char* name, const AdamSlot& s) {
    os << name << "_steps " << s.steps << '\n';
    detail::put_vec(os, (std::string(name) + "_m").c_str(), s.m);
    detail::put_vec(os, (std::string(name) + "_v").c_str(), s.v);
  };
  slot("quat", st.quat);
  slot("log_scale", st.log_scale);
  slot("mag_raw", st.mag_raw);
  slot("dir_raw", st.dir_raw);
  slot("opacity_raw", st.opacity_raw);
  slot("color", st.color);
  std::vector<double> mom;
  for (const auto& m : st.momentum) mom.insert(mom.end(), {m[0], m[1], m[2]});
  detail::put_vec(os, "momentum", mom);
  return os.str();
}

inline TrainState parse_train_state(std::string_view text, const std::string& name = "state") {
  detail::LineReader rd(text, name);
  std::string_view line;
  auto expect = [&](std::string_view key) {
    if (!rd.next(line)) throw IoError(rd.where() + ": missing '" + std::string(key) + "'");
    const auto t = split_ws(line);
    if (t.empty() || t[0] != key) throw IoError(rd.where() + ": expected '" + std::string(key) + "'");
    return std::string(line.substr(line.find(key) + key.size()));
  };
  auto value = [&](std::string_view key) {
    const auto rest = expect(key);
    const auto t = split_ws(rest);
    if (t.size() != 1) throw IoError(rd.where() + ": expected one value after '" + std::string(key) + "'");
    return std::string(t[0]);
  };
  const auto t0 = split_ws(expect("skewsplat-trainstate"));
  if (t0.size() != 1 || t0[0] != "1") throw IoError(rd.where() + ": unsupported train state version");
  TrainState st;
  st.iter = parse_int(value("iter"), rd.where());
  {
    const auto tok = value("rng_seed");
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), st.rng_seed);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) throw IoError(rd.where() + ": bad rng_seed");
  }
  {
    std::istringstream is(expect("rng"));
    is >> st.rng;
    if (!is) throw IoError(rd.where() + ": bad rng state");
  }
  auto slot = [&](const std::string& n, AdamSlot& s) {
    s.steps = parse_int(value(n + "_steps"), rd.where());
    s.m = detail::get_vec(rd, n + "_m");
    s.v = detail::get_vec(rd, n + "_v");
  };
  slot("quat", st.quat);
  slot("log_scale", st.log_scale);
  slot("mag_raw", st.mag_raw);
  slot("dir_raw", st.dir_raw);
  slot("opacity_raw", st.opacity_raw);
  slot("color", st.color);
  const auto mom = detail::get_vec(rd, "momentum");
  if (mom.size() % 3 != 0) throw IoError(rd.where() + ": momentum length not a multiple of 3");
  for (std::size_t i = 0; i < mom.size(); i += 3) st.momentum.emplace_back(mom[i], mom[i + 1], mom[i + 2]);
  const std::size_t n = st.momentum.size();
  if (st.quat.m.size() != 4 * n || st.log_scale.m.size() != 3 * n || st.mag_raw.m.size() != n ||
      st.dir_raw.m.size() != 3 * n || st.opacity_raw.m.size() != n || st.color.m.size() != 3 * n) {
    throw IoError(name + ": optimizer slot sizes are inconsistent");
  }
  return st;
}

// ---- reports ----

inline std::string format_fit_report(const FitReport& r) {
  std::ostringstream os;
  os << "family " << family_name(r.family) << '\n';
  os << "n_components " << r.n_components << '\n';
  os << "seed " << r.seed << '\n';
  os << "iteration_count " << r.iteration_count << '\n';
  os << "initial_mse " << fmt_double(r.initial_mse) << '\n';
  os << "final_mse " << fmt_double(r.final_mse) << '\n';
  os << "diverged " << (r.diverged ? 1 : 0) << '\n';
  os << "wall_time " << fmt_double(r.wall_time) << '\n';
  for (std::size_t i = 0; i < r.model.components.size(); ++i) {
    const auto& c = r.model.components[i];
    os << "component " << i << " weight " << fmt_double(c.weight) << " mu " << fmt_double(c.mu)
       << " sigma " << fmt_double(c.sigma);
    if (r.family == Family::skew_normal) os << " alpha " << fmt_double(c.alpha);
    if (r.family == Family::half_gaussian) os << " side " << c.side;
    os << '\n';
  }
  return os.str();
}

/// Minimal CSV builder; fields are written as given.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != cols_) throw ConfigError("csv row has the wrong number of fields");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += fields[i];
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_file_atomic(path, text_); }

 private:
  std::size_t cols_;
  std::string text_;
};

/// Target and fitted curves on one sample grid as a small standalone SVG.
inline std::string curves_svg(const std::vector<double>& xs, const std::vector<double>& target,
                              const std::vector<std::pair<std::string, std::vector<double>>>& fits) {
  const double W = 640, H = 320, pad = 30;
  double lo = 0.0, hi = 1.0;
  auto widen = [&](const std::vector<double>& v) {
    for (double y : v) {
      if (std::isfinite(y)) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
    }
  };
  widen(target);
  for (const auto& f : fits) widen(f.second);
  const double x0 = xs.front(), x1 = xs.back();
  auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (W - 2 * pad); };
  auto py = [&](double y) { return H - pad - (y - lo) / (hi - lo) * (H - 2 * pad); };
  auto path = [&](const std::vector<double>& ys, const char* color, double width) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) os << px(xs[i]) << ',' << py(ys[i]) << ' ';
    os << "\"/>\n";
    return os.str();
  };
  static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << path(target, "black", 2.0);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    os << path(fits[i].second, colors[i % 5], 1.5);
    os << "<text x=\"" << pad + 10 << "\" y=\"" << pad + 15 * (i + 1) << "\" font-size=\"12\" fill=\""
       << colors[i % 5] << "\">" << fits[i].first << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace skewsplat
