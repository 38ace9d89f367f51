#pragma once

// SMFX v1 feature files.
//
//   bytes 0-3   magic "SMFX"
//   u32 LE      version (1)
//   u32 LE      n
//   u32 LE      d
//   n x 4 f32   bbox rows (x1, y1, x2, y2), little endian
//   n x d f32   feature rows, little endian

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "swapmix/domain.hpp"
#include "swapmix/io.hpp"

namespace swapmix {

inline constexpr std::uint32_t kSmfxVersion = 1;

struct FeatureFile {
  FeatureMatrix features;
  std::vector<DetectedObject> detections;

  std::vector<BoundingBox> boxes() const {
    std::vector<BoundingBox> out;
    out.reserve(detections.size());
    for (const auto& d : detections) out.push_back(d.bbox);
    return out;
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline std::uint32_t get_u32(std::string_view bytes, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
  return v;
}

inline float get_f32(std::string_view bytes, std::size_t off) {
  return std::bit_cast<float>(get_u32(bytes, off));
}

}  // namespace detail

inline std::string encode_smfx(const FeatureMatrix& v, std::span<const BoundingBox> boxes) {
  if (boxes.size() != v.rows())
    throw Error(ErrorKind::DimensionMismatch, "bbox count differs from feature row count");
  std::string out = "SMFX";
  out.reserve(16 + 16 * v.rows() + 4 * v.rows() * v.cols());
  detail::put_u32(out, kSmfxVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(v.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(v.cols()));
  for (const auto& b : boxes) {
    detail::put_f32(out, static_cast<float>(b.x1));
    detail::put_f32(out, static_cast<float>(b.y1));
    detail::put_f32(out, static_cast<float>(b.x2));
    detail::put_f32(out, static_cast<float>(b.y2));
  }
  for (float f : v.data()) detail::put_f32(out, f);
  return out;
}

inline FeatureFile decode_smfx(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "SMFX")
    throw Error(ErrorKind::BadMagic, "not an SMFX file");
  if (bytes.size() < 16) throw Error(ErrorKind::TruncatedFile, "SMFX header is incomplete");
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kSmfxVersion)
    throw Error(ErrorKind::VersionUnsupported, "SMFX version " + std::to_string(version));
  const std::uint64_t n = detail::get_u32(bytes, 8);
  const std::uint64_t d = detail::get_u32(bytes, 12);
  const std::uint64_t expected = 16 + 16 * n + 4 * n * d;
  if (bytes.size() < expected)
    throw Error(ErrorKind::TruncatedFile, "SMFX declares n=" + std::to_string(n) +
                                              " d=" + std::to_string(d) + " but holds " +
                                              std::to_string(bytes.size()) + " bytes");
  if (bytes.size() > expected)
    throw Error(ErrorKind::MalformedInput, "SMFX has trailing bytes");
  std::vector<DetectedObject> dets;
  dets.reserve(n);
  std::size_t off = 16;
  for (std::size_t i = 0; i < n; ++i, off += 16) {
    BoundingBox b{detail::get_f32(bytes, off), detail::get_f32(bytes, off + 4),
                  detail::get_f32(bytes, off + 8), detail::get_f32(bytes, off + 12)};
    dets.push_back({i, b, std::nullopt});
  }
  std::vector<float> data(n * d);
  for (auto& f : data) {
    f = detail::get_f32(bytes, off);
    off += 4;
  }
  return {FeatureMatrix(n, d, std::move(data)), std::move(dets)};
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& v,
                               std::span<const BoundingBox> boxes) {
  write_file_atomic(path, encode_smfx(v, boxes));
}

inline FeatureFile read_feature_file(const std::filesystem::path& path) {
  return decode_smfx(read_file(path));
}

}  // namespace swapmix
