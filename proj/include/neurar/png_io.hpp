#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "neurar/common.hpp"
#include "neurar/image.hpp"

namespace neurar {
namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32_be(out, crc);
}

inline std::vector<std::uint8_t> png_encode(int width, int height, int bit_depth, int color_type,
                                            const std::vector<std::uint8_t>& raw_rows) {
  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(static_cast<std::uint8_t>(color_type));
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  png_chunk(png, "IHDR", ihdr);

  uLongf bound = compressBound(static_cast<uLong>(raw_rows.size()));
  std::vector<std::uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw_rows.data(), static_cast<uLong>(raw_rows.size()), 6) !=
      Z_OK)
    throw Fault("png: zlib compression failed");
  idat.resize(bound);
  png_chunk(png, "IDAT", idat);
  png_chunk(png, "IEND", {});
  return png;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Fault("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Fault("write failed: " + path);
}

}  // namespace detail

/// 8-bit RGB PNG from [0,1] channel values (row-major, 3 per pixel).
inline void write_png_rgb8(const std::string& path, int width, int height,
                           const std::vector<double>& rgb01) {
  std::vector<std::uint8_t> rows;
  rows.reserve(static_cast<std::size_t>(height) * (1 + 3u * width));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);  // filter: none
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = clamp01(rgb01[3u * (static_cast<std::size_t>(y) * width + x) + c]);
        rows.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
  }
  detail::write_file(path, detail::png_encode(width, height, 8, 2, rows));
}

/// 8-bit grayscale PNG from [0,1] values.
inline void write_png_gray8(const std::string& path, int width, int height,
                            const std::vector<double>& gray01) {
  std::vector<std::uint8_t> rows;
  rows.reserve(static_cast<std::size_t>(height) * (1 + 1u * width));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);
    for (int x = 0; x < width; ++x) {
      double v = clamp01(gray01[static_cast<std::size_t>(y) * width + x]);
      rows.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  detail::write_file(path, detail::png_encode(width, height, 8, 0, rows));
}

/// 16-bit grayscale PNG storing depth in millimeters (clamped to 65535).
inline void write_png_depth16(const std::string& path, int width, int height,
                              const std::vector<double>& depth_m) {
  std::vector<std::uint8_t> rows;
  rows.reserve(static_cast<std::size_t>(height) * (1 + 2u * width));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);
    for (int x = 0; x < width; ++x) {
      double mm = std::max(0.0, depth_m[static_cast<std::size_t>(y) * width + x]) * 1000.0;
      std::uint16_t v = static_cast<std::uint16_t>(std::min(65535.0, std::lround(mm)));
      rows.push_back(static_cast<std::uint8_t>(v >> 8));
      rows.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
  }
  detail::write_file(path, detail::png_encode(width, height, 16, 0, rows));
}

/// Raw float32 raster: magic "NRVR", u32 width, u32 height, u8 endian tag
/// (1 = little endian), then width*height little-endian float32 row-major.
inline void write_float_raster(const std::string& path, int width, int height,
                               const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes;
  bytes.insert(bytes.end(), {'N', 'R', 'V', 'R'});
  auto put_u32_le = [&bytes](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u32_le(static_cast<std::uint32_t>(width));
  put_u32_le(static_cast<std::uint32_t>(height));
  bytes.push_back(1);
  for (double d : values) {
    float f = static_cast<float>(d);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32_le(u);
  }
  detail::write_file(path, bytes);
}

inline void export_rgbd_png(const RgbdImage& img, const std::string& color_path,
                            const std::string& depth_path) {
  write_png_rgb8(color_path, img.width, img.height, img.color);
  write_png_depth16(depth_path, img.width, img.height, img.depth);
}

}  // namespace neurar
