#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "relpose/geometry.hpp"
#include "relpose/loss.hpp"
#include "relpose/matching.hpp"
#include "relpose/metrics.hpp"
#include "relpose/synth.hpp"

namespace relpose {
namespace io {

namespace detail {

inline std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::invalid_argument,
          "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_binary(const std::string& path,
                         const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::invalid_argument,
          "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  require(out.good(), ErrorCode::invalid_argument,
          "write failed for '" + path + "'");
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len,
                              std::uint32_t seed = 0xffffffffu) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed;
  for (std::size_t i = 0; i < len; ++i)
    c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

inline void put_u16_le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}
inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}
inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back((v >> (8 * i)) & 0xff);
}
inline std::uint16_t get_u16_le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

// ---------------------------------------------------------------------------
// Minimal PNG container for single-channel 8/16-bit images. Pixel data is
// deflated with zlib; 16-bit samples are big-endian per the PNG spec.
// ---------------------------------------------------------------------------

inline void png_append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                             const std::vector<std::uint8_t>& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc = crc32_of(out.data() + crc_start, out.size() - crc_start);
  put_u32_be(out, crc);
}

inline std::vector<std::uint8_t> png_encode_gray(const std::uint16_t* pixels,
                                                 int width, int height,
                                                 int bit_depth) {
  const int bytes_per_sample = bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * bytes_per_sample;
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (row_bytes + 1));
  for (int v = 0; v < height; ++v) {
    raw.push_back(0);  // filter: none
    for (int u = 0; u < width; ++u) {
      std::uint16_t s = pixels[static_cast<std::size_t>(v) * width + u];
      if (bit_depth == 16) {
        raw.push_back((s >> 8) & 0xff);
        raw.push_back(s & 0xff);
      } else {
        raw.push_back(s & 0xff);
      }
    }
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> deflated(bound);
  int rc = compress2(deflated.data(), &bound, raw.data(),
                     static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, ErrorCode::invariant_violation, "png: deflate failed");
  deflated.resize(bound);

  std::vector<std::uint8_t> out = {137, 'P', 'N', 'G', 13, 10, 26, 10};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace
  png_append_chunk(out, "IHDR", ihdr);
  png_append_chunk(out, "IDAT", deflated);
  png_append_chunk(out, "IEND", {});
  return out;
}

struct PngGray {
  int width = 0, height = 0, bit_depth = 0;
  std::vector<std::uint16_t> pixels;
};

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

inline PngGray png_decode_gray(const std::vector<std::uint8_t>& file,
                               const std::string& path) {
  static const std::uint8_t sig[8] = {137, 'P', 'N', 'G', 13, 10, 26, 10};
  require(file.size() >= 8 && std::memcmp(file.data(), sig, 8) == 0,
          ErrorCode::malformed_header, path + ": not a PNG file");

  PngGray img;
  std::vector<std::uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;
  std::size_t pos = 8;
  while (pos + 8 <= file.size() && !saw_iend) {
    std::uint32_t len = get_u32_be(file.data() + pos);
    require(pos + 12 + len <= file.size(), ErrorCode::malformed_header,
            path + ": truncated chunk");
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    std::uint32_t stored_crc = get_u32_be(file.data() + pos + 8 + len);
    std::uint32_t actual_crc = crc32_of(file.data() + pos + 4, 4 + len);
    require(stored_crc == actual_crc, ErrorCode::checksum_failure,
            path + ": chunk '" + std::string(type, 4) + "' CRC mismatch");
    const std::uint8_t* data = file.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, ErrorCode::malformed_header, path + ": bad IHDR size");
      img.width = static_cast<int>(get_u32_be(data));
      img.height = static_cast<int>(get_u32_be(data + 4));
      img.bit_depth = data[8];
      require(img.width > 0 && img.height > 0, ErrorCode::malformed_header,
              path + ": bad dimensions");
      require(data[9] == 0, ErrorCode::malformed_header,
              path + ": expected grayscale (color type 0)");
      require(img.bit_depth == 8 || img.bit_depth == 16,
              ErrorCode::malformed_header, path + ": expected 8/16-bit depth");
      require(data[12] == 0, ErrorCode::malformed_header,
              path + ": interlaced PNG not supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  require(saw_ihdr && saw_iend && !idat.empty(), ErrorCode::malformed_header,
          path + ": missing IHDR/IDAT/IEND");

  const int bps = img.bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * bps;
  const std::size_t raw_size = static_cast<std::size_t>(img.height) * (row_bytes + 1);
  std::vector<std::uint8_t> raw(raw_size);
  uLongf dest_len = static_cast<uLongf>(raw_size);
  int rc = uncompress(raw.data(), &dest_len, idat.data(),
                      static_cast<uLong>(idat.size()));
  require(rc == Z_OK && dest_len == raw_size, ErrorCode::malformed_header,
          path + ": corrupt image data stream");

  // Undo per-row filtering (all five filter types).
  std::vector<std::uint8_t> cur(row_bytes), prev(row_bytes, 0);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int v = 0; v < img.height; ++v) {
    const std::uint8_t* row = raw.data() + static_cast<std::size_t>(v) * (row_bytes + 1);
    std::uint8_t filter = row[0];
    require(filter <= 4, ErrorCode::malformed_header,
            path + ": unknown filter type");
    for (std::size_t i = 0; i < row_bytes; ++i) {
      int x = row[1 + i];
      int a = i >= static_cast<std::size_t>(bps) ? cur[i - bps] : 0;
      int b = prev[i];
      int c = i >= static_cast<std::size_t>(bps) ? prev[i - bps] : 0;
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += paeth(a, b, c); break;
      }
      cur[i] = static_cast<std::uint8_t>(x & 0xff);
    }
    for (int u = 0; u < img.width; ++u) {
      std::uint16_t s = img.bit_depth == 16
                            ? static_cast<std::uint16_t>((cur[2 * u] << 8) | cur[2 * u + 1])
                            : cur[u];
      img.pixels[static_cast<std::size_t>(v) * img.width + u] = s;
    }
    std::swap(cur, prev);
  }
  return img;
}

inline nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::invalid_argument, "cannot open '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::malformed_header, path + ": " + std::string(e.what()));
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::invalid_argument, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorCode::invalid_argument, "write failed for '" + path + "'");
}

template <typename T>
T json_field(const nlohmann::json& j, const std::string& key,
             const std::string& path) {
  require(j.contains(key), ErrorCode::malformed_header,
          path + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::malformed_header, path + ": bad type for field '" + key + "'");
  }
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Depth: 16-bit grayscale PNG, value = millimeters, 0 = invalid.
// ---------------------------------------------------------------------------

inline void save_depth_png(const std::string& path, const DepthMap& depth) {
  std::vector<std::uint16_t> mm(depth.values.size());
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    double v = depth.values[i] <= 0.0 ? 0.0 : depth.values[i] * 1000.0;
    mm[i] = static_cast<std::uint16_t>(
        std::clamp<long>(std::lround(v), 0, 65535));
  }
  detail::write_binary(
      path, detail::png_encode_gray(mm.data(), depth.width, depth.height, 16));
}

inline DepthMap load_depth_png(const std::string& path) {
  auto img = detail::png_decode_gray(detail::read_binary(path), path);
  require(img.bit_depth == 16, ErrorCode::malformed_header,
          path + ": depth PNG must be 16-bit");
  DepthMap depth(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    depth.values[i] = img.pixels[i] / 1000.0;
  return depth;
}

// ---------------------------------------------------------------------------
// Mask: 8-bit grayscale PNG, nonzero = object.
// ---------------------------------------------------------------------------

inline void save_mask_png(const std::string& path, const Mask& mask) {
  std::vector<std::uint16_t> px(mask.values.size());
  for (std::size_t i = 0; i < mask.values.size(); ++i)
    px[i] = mask.values[i] ? 255 : 0;
  detail::write_binary(
      path, detail::png_encode_gray(px.data(), mask.width, mask.height, 8));
}

inline Mask load_mask_png(const std::string& path) {
  auto img = detail::png_decode_gray(detail::read_binary(path), path);
  require(img.bit_depth == 8, ErrorCode::malformed_header,
          path + ": mask PNG must be 8-bit");
  Mask mask(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    mask.values[i] = img.pixels[i] != 0 ? 1 : 0;
  return mask;
}

// ---------------------------------------------------------------------------
// FeatureMap: "FMAP" magic, u16 LE version, u32 LE H/W/F, then H*W*F 32-bit
// LE floats row-major (v, u, channel), trailing CRC32 of the float payload.
// ---------------------------------------------------------------------------

inline void save_feature_map(const std::string& path, const FeatureMap& fmap) {
  std::vector<std::uint8_t> out;
  out.reserve(18 + fmap.data.size() * 4);
  out.insert(out.end(), {'F', 'M', 'A', 'P'});
  detail::put_u16_le(out, 1);
  detail::put_u32_le(out, static_cast<std::uint32_t>(fmap.height));
  detail::put_u32_le(out, static_cast<std::uint32_t>(fmap.width));
  detail::put_u32_le(out, static_cast<std::uint32_t>(fmap.dim));
  std::size_t payload_start = out.size();
  for (double d : fmap.data)
    detail::put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
  std::uint32_t crc =
      detail::crc32_of(out.data() + payload_start, out.size() - payload_start);
  detail::put_u32_le(out, crc);
  detail::write_binary(path, out);
}

inline FeatureMap load_feature_map(const std::string& path) {
  auto file = detail::read_binary(path);
  require(file.size() >= 18, ErrorCode::malformed_header,
          path + ": file too short for FMAP header");
  require(std::memcmp(file.data(), "FMAP", 4) == 0, ErrorCode::malformed_header,
          path + ": bad magic, expected FMAP");
  std::uint16_t version = detail::get_u16_le(file.data() + 4);
  require(version == 1, ErrorCode::malformed_header,
          path + ": unsupported FMAP version " + std::to_string(version));
  std::uint32_t h = detail::get_u32_le(file.data() + 6);
  std::uint32_t w = detail::get_u32_le(file.data() + 10);
  std::uint32_t f = detail::get_u32_le(file.data() + 14);
  require(h > 0 && w > 0 && f > 0, ErrorCode::malformed_header,
          path + ": zero dimension in header");
  std::size_t count = static_cast<std::size_t>(h) * w * f;
  require(file.size() == 18 + count * 4 + 4, ErrorCode::malformed_header,
          path + ": payload size does not match header dimensions");
  std::uint32_t stored = detail::get_u32_le(file.data() + 18 + count * 4);
  std::uint32_t actual = detail::crc32_of(file.data() + 18, count * 4);
  require(stored == actual, ErrorCode::checksum_failure,
          path + ": payload CRC mismatch");
  FeatureMap fmap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(f));
  for (std::size_t i = 0; i < count; ++i) {
    float v = std::bit_cast<float>(detail::get_u32_le(file.data() + 18 + i * 4));
    require(std::isfinite(v), ErrorCode::malformed_header,
            path + ": non-finite value in payload");
    fmap.data[i] = v;
  }
  return fmap;
}

// ---------------------------------------------------------------------------
// Intrinsics: JSON {"fx","fy","cx","cy","width","height"}.
// ---------------------------------------------------------------------------

inline void save_intrinsics(const std::string& path, const CameraIntrinsics& k) {
  nlohmann::json j = {{"fx", k.fx},       {"fy", k.fy},
                      {"cx", k.cx},       {"cy", k.cy},
                      {"width", k.width}, {"height", k.height}};
  detail::write_text(path, j.dump(2) + "\n");
}

inline CameraIntrinsics load_intrinsics(const std::string& path) {
  auto j = detail::parse_json_file(path);
  CameraIntrinsics k{detail::json_field<double>(j, "fx", path),
                     detail::json_field<double>(j, "fy", path),
                     detail::json_field<double>(j, "cx", path),
                     detail::json_field<double>(j, "cy", path),
                     detail::json_field<int>(j, "width", path),
                     detail::json_field<int>(j, "height", path)};
  try {
    k.validate();
  } catch (const Error& e) {
    fail(ErrorCode::malformed_header, path + ": " + e.what());
  }
  return k;
}

// ---------------------------------------------------------------------------
// Pose: JSON {"rotation": 9 row-major, "translation": 3, "frame": str}.
// ---------------------------------------------------------------------------

inline void save_pose(const std::string& path, const RigidTransform& t,
                      const std::string& frame = "A_to_Q") {
  nlohmann::json j;
  j["rotation"] = t.rotation.m;
  j["translation"] = {t.translation.x, t.translation.y, t.translation.z};
  j["frame"] = frame;
  detail::write_text(path, j.dump(2) + "\n");
}

struct LoadedPose {
  RigidTransform transform;
  std::string frame;
};

inline LoadedPose load_pose(const std::string& path) {
  auto j = detail::parse_json_file(path);
  auto rot = detail::json_field<std::array<double, 9>>(j, "rotation", path);
  auto tr = detail::json_field<std::array<double, 3>>(j, "translation", path);
  LoadedPose out;
  out.transform.rotation.m = rot;
  out.transform.translation = {tr[0], tr[1], tr[2]};
  out.frame = detail::json_field<std::string>(j, "frame", path);
  require(out.transform.is_valid(1e-6), ErrorCode::malformed_header,
          path + ": field 'rotation' is not orthonormal with det +1");
  return out;
}

// ---------------------------------------------------------------------------
// MatchSet: CSV "uA,vA,uQ,vQ,dist", distances to 6 decimals.
// ---------------------------------------------------------------------------

inline void save_matches_csv(const std::string& path, const MatchSet& matches) {
  std::string text = "uA,vA,uQ,vQ,dist\n";
  char line[128];
  for (const Match& m : matches.pairs) {
    std::snprintf(line, sizeof(line), "%d,%d,%d,%d,%.6f\n", m.a.u, m.a.v, m.q.u,
                  m.q.v, m.distance);
    text += line;
  }
  detail::write_text(path, text);
}

inline MatchSet load_matches_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::invalid_argument, "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::malformed_header,
          path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "uA,vA,uQ,vQ,dist", ErrorCode::malformed_header,
          path + ": expected header 'uA,vA,uQ,vQ,dist'");
  MatchSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Match m;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf", &m.a.u, &m.a.v, &m.q.u,
                    &m.q.v, &m.distance) != 5)
      fail(ErrorCode::malformed_header,
           path + ": bad row at line " + std::to_string(line_no));
    out.pairs.push_back(m);
  }
  out.capacity = out.pairs.size();
  return out;
}

// ---------------------------------------------------------------------------
// Ground-truth matches: CSV "uA,vA,uQ,vQ" with continuous coordinates.
// ---------------------------------------------------------------------------

inline void save_supervision_csv(const std::string& path,
                                 const MatchSupervision& sup) {
  std::string text = "uA,vA,uQ,vQ\n";
  for (const auto& p : sup.pairs) {
    text += detail::format_double(p.u_a) + "," + detail::format_double(p.v_a) +
            "," + detail::format_double(p.u_q) + "," +
            detail::format_double(p.v_q) + "\n";
  }
  detail::write_text(path, text);
}

inline MatchSupervision load_supervision_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::invalid_argument, "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::malformed_header,
          path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "uA,vA,uQ,vQ", ErrorCode::malformed_header,
          path + ": expected header 'uA,vA,uQ,vQ'");
  MatchSupervision out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    MatchSupervision::Pair p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &p.u_a, &p.v_a, &p.u_q,
                    &p.v_q) != 4)
      fail(ErrorCode::malformed_header,
           path + ": bad row at line " + std::to_string(line_no));
    out.pairs.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ObjectModel: JSON {"points_path","diameter","symmetries"}, points as an
// XYZ text file in meters, symmetries as 9-number rotation matrices.
// ---------------------------------------------------------------------------

inline void save_object_model(const std::string& json_path,
                              const std::string& points_filename,
                              const ObjectModel& model) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(json_path).parent_path();
  std::string xyz;
  for (const Vec3& p : model.points.points)
    xyz += detail::format_double(p.x) + " " + detail::format_double(p.y) + " " +
           detail::format_double(p.z) + "\n";
  detail::write_text((dir / points_filename).string(), xyz);

  nlohmann::json j;
  j["points_path"] = points_filename;
  j["diameter"] = model.diameter;
  auto& syms = j["symmetries"] = nlohmann::json::array();
  for (const RigidTransform& s : model.symmetries) syms.push_back(s.rotation.m);
  detail::write_text(json_path, j.dump(2) + "\n");
}

inline ObjectModel load_object_model(const std::string& json_path) {
  namespace fs = std::filesystem;
  auto j = detail::parse_json_file(json_path);
  ObjectModel model;
  model.diameter = detail::json_field<double>(j, "diameter", json_path);
  auto rel = detail::json_field<std::string>(j, "points_path", json_path);
  fs::path points_path = fs::path(json_path).parent_path() / rel;

  std::ifstream in(points_path);
  require(in.good(), ErrorCode::invalid_argument,
          json_path + ": points_path '" + points_path.string() + "' not readable");
  double x, y, z;
  while (in >> x >> y >> z) model.points.points.push_back({x, y, z});
  require(!model.points.points.empty(), ErrorCode::malformed_header,
          points_path.string() + ": no points parsed");

  require(j.contains("symmetries"), ErrorCode::malformed_header,
          json_path + ": missing field 'symmetries'");
  model.symmetries.clear();
  for (const auto& s : j.at("symmetries")) {
    RigidTransform t;
    try {
      t.rotation.m = s.get<std::array<double, 9>>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::malformed_header,
           json_path + ": symmetry entries must be 9-number rotation matrices");
    }
    require(t.is_valid(1e-6), ErrorCode::malformed_header,
            json_path + ": symmetry is not a rotation matrix");
    model.symmetries.push_back(t);
  }
  require(!model.symmetries.empty(), ErrorCode::malformed_header,
          json_path + ": empty symmetry list (identity required)");
  bool has_identity = false;
  for (const auto& s : model.symmetries)
    has_identity |= s.rotation.max_abs_diff(Mat3::identity()) <= 1e-9;
  require(has_identity, ErrorCode::malformed_header,
          json_path + ": symmetry list must contain the identity");
  require(model.diameter > 0.0, ErrorCode::malformed_header,
          json_path + ": field 'diameter' must be positive");
  return model;
}

// ---------------------------------------------------------------------------
// Scene-pair manifest.
// ---------------------------------------------------------------------------

struct LoadedScenePair {
  DepthMap depth_a, depth_q;
  Mask mask_a, mask_q;
  FeatureMap fmap_a, fmap_q;
  CameraIntrinsics intrinsics_a, intrinsics_q;
  ObjectModel model;
  std::optional<RigidTransform> gt_pose;  // A -> Q
  std::optional<MatchSupervision> gt_matches;
  std::optional<RigidTransform> object_pose_a, object_pose_q;  // model -> cam
};

inline std::string save_scene_pair(const std::string& dir_path,
                                   const ScenePair& pair) {
  namespace fs = std::filesystem;
  fs::create_directories(dir_path);
  fs::path dir(dir_path);

  save_depth_png((dir / "depth_a.png").string(), pair.depth_a);
  save_depth_png((dir / "depth_q.png").string(), pair.depth_q);
  save_mask_png((dir / "mask_a.png").string(), pair.mask_a);
  save_mask_png((dir / "mask_q.png").string(), pair.mask_q);
  save_feature_map((dir / "features_a.fmap").string(), pair.fmap_a);
  save_feature_map((dir / "features_q.fmap").string(), pair.fmap_q);
  save_intrinsics((dir / "intrinsics_a.json").string(), pair.intrinsics_a);
  save_intrinsics((dir / "intrinsics_q.json").string(), pair.intrinsics_q);
  save_object_model((dir / "model.json").string(), "model_points.xyz", pair.model);
  save_pose((dir / "pose_gt.json").string(), pair.gt_pose, "A_to_Q");
  save_pose((dir / "object_pose_a.json").string(), pair.object_pose_a, "model_to_A");
  save_pose((dir / "object_pose_q.json").string(), pair.object_pose_q, "model_to_Q");
  save_supervision_csv((dir / "gt_matches.csv").string(), pair.gt_matches);

  nlohmann::json manifest = {
      {"depth_a", "depth_a.png"},         {"depth_q", "depth_q.png"},
      {"mask_a", "mask_a.png"},           {"mask_q", "mask_q.png"},
      {"features_a", "features_a.fmap"},  {"features_q", "features_q.fmap"},
      {"intrinsics_a", "intrinsics_a.json"},
      {"intrinsics_q", "intrinsics_q.json"},
      {"object_model", "model.json"},     {"gt_pose", "pose_gt.json"},
      {"object_pose_a", "object_pose_a.json"},
      {"object_pose_q", "object_pose_q.json"},
      {"gt_matches", "gt_matches.csv"},
  };
  std::string manifest_path = (dir / "manifest.json").string();
  detail::write_text(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

inline LoadedScenePair load_scene_pair(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  auto j = detail::parse_json_file(manifest_path);
  fs::path dir = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& key) {
    return (dir / detail::json_field<std::string>(j, key, manifest_path)).string();
  };

  LoadedScenePair out;
  out.depth_a = load_depth_png(resolve("depth_a"));
  out.depth_q = load_depth_png(resolve("depth_q"));
  out.mask_a = load_mask_png(resolve("mask_a"));
  out.mask_q = load_mask_png(resolve("mask_q"));
  out.fmap_a = load_feature_map(resolve("features_a"));
  out.fmap_q = load_feature_map(resolve("features_q"));
  out.intrinsics_a = load_intrinsics(resolve("intrinsics_a"));
  out.intrinsics_q = load_intrinsics(resolve("intrinsics_q"));
  out.model = load_object_model(resolve("object_model"));

  auto check_dims = [&](const std::string& what, int w, int h,
                        const CameraIntrinsics& k) {
    require(w == k.width && h == k.height, ErrorCode::dimension_mismatch,
            manifest_path + ": '" + what + "' dimensions " + std::to_string(w) +
                "x" + std::to_string(h) + " differ from intrinsics " +
                std::to_string(k.width) + "x" + std::to_string(k.height));
  };
  check_dims("depth_a", out.depth_a.width, out.depth_a.height, out.intrinsics_a);
  check_dims("depth_q", out.depth_q.width, out.depth_q.height, out.intrinsics_q);
  check_dims("mask_a", out.mask_a.width, out.mask_a.height, out.intrinsics_a);
  check_dims("mask_q", out.mask_q.width, out.mask_q.height, out.intrinsics_q);
  check_dims("features_a", out.fmap_a.width, out.fmap_a.height, out.intrinsics_a);
  check_dims("features_q", out.fmap_q.width, out.fmap_q.height, out.intrinsics_q);

  auto load_optional_pose = [&](const std::string& key,
                                const std::string& expected_frame)
      -> std::optional<RigidTransform> {
    if (!j.contains(key)) return std::nullopt;
    LoadedPose p = load_pose(resolve(key));
    require(p.frame == expected_frame, ErrorCode::malformed_header,
            manifest_path + ": '" + key + "' has frame '" + p.frame +
                "', expected '" + expected_frame + "'");
    return p.transform;
  };
  out.gt_pose = load_optional_pose("gt_pose", "A_to_Q");
  out.object_pose_a = load_optional_pose("object_pose_a", "model_to_A");
  out.object_pose_q = load_optional_pose("object_pose_q", "model_to_Q");
  if (j.contains("gt_matches"))
    out.gt_matches = load_supervision_csv(resolve("gt_matches"));
  return out;
}

}  // namespace io
}  // namespace relpose
