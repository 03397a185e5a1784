#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "csrecon/error.hpp"
#include "csrecon/transforms.hpp"

namespace csrecon {

/// Grayscale raster, row-major, nominal range [0, 255].
struct Image {
  RowMatrix<double> pixels;
  /// Bit depth of the file the image was read from (8 or 24); used when
  /// writing a reconstruction back in the input's format.
  int source_bits = 8;

  Image() = default;
  explicit Image(RowMatrix<double> p, int bits = 8) : pixels(std::move(p)), source_bits(bits) {}
  Image(Index height, Index width, double value = 0.0)
      : pixels(RowMatrix<double>::Constant(height, width, value)) {}

  Index height() const { return pixels.rows(); }
  Index width() const { return pixels.cols(); }
  Index size() const { return pixels.size(); }
};

inline Image clamp_pixels(Image image) {
  image.pixels = image.pixels.cwiseMax(0.0).cwiseMin(255.0);
  return image;
}

inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

namespace detail {

inline std::uint32_t read_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
inline std::uint16_t read_u16(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xFF));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

/// Decodes an uncompressed 8-bit paletted or 24-bit BMP held in memory.
/// Colour pixels are reduced with 0.299 R + 0.587 G + 0.114 B.
inline Image decode_bmp(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M') {
    throw IoError("not a BMP file (missing 'BM' signature)");
  }
  const std::uint32_t data_offset = detail::read_u32(bytes, 10);
  const std::uint32_t header_size = detail::read_u32(bytes, 14);
  if (header_size < 40) throw IoError("unsupported BMP header (OS/2 core headers are not supported)");
  const auto width = static_cast<std::int32_t>(detail::read_u32(bytes, 18));
  const auto raw_height = static_cast<std::int32_t>(detail::read_u32(bytes, 22));
  const std::uint16_t bits = detail::read_u16(bytes, 28);
  const std::uint32_t compression = detail::read_u32(bytes, 30);
  std::uint32_t colors_used = detail::read_u32(bytes, 46);

  if (compression != 0) throw IoError("unsupported BMP: compressed pixel data (compression " +
                                      std::to_string(compression) + ")");
  if (bits != 8 && bits != 24) throw IoError("unsupported BMP bit depth " + std::to_string(bits) +
                                             " (only 8-bit paletted and 24-bit are read)");
  if (width <= 0 || raw_height == 0) throw IoError("BMP has empty dimensions");
  const bool top_down = raw_height < 0;
  const std::int64_t height = top_down ? -static_cast<std::int64_t>(raw_height) : raw_height;

  std::array<double, 256> palette{};
  if (bits == 8) {
    if (colors_used == 0) colors_used = 256;
    if (colors_used > 256) throw IoError("BMP palette larger than 256 entries");
    const std::size_t palette_at = 14 + header_size;
    if (palette_at + 4 * colors_used > bytes.size()) throw IoError("truncated BMP palette");
    for (std::uint32_t i = 0; i < colors_used; ++i) {
      const std::size_t at = palette_at + 4 * i;
      const double b = bytes[at], g = bytes[at + 1], r = bytes[at + 2];
      palette[i] = (r == g && g == b) ? r : luma(r, g, b);
    }
  }

  const std::size_t bytes_per_pixel = bits / 8;
  const std::size_t stride = (static_cast<std::size_t>(width) * bytes_per_pixel + 3) & ~std::size_t{3};
  if (data_offset + stride * static_cast<std::size_t>(height) > bytes.size()) {
    throw IoError("truncated BMP pixel data");
  }

  Image image(static_cast<Index>(height), static_cast<Index>(width));
  image.source_bits = bits;
  for (std::int64_t row = 0; row < height; ++row) {
    const std::int64_t target = top_down ? row : height - 1 - row;
    const std::size_t line = data_offset + stride * static_cast<std::size_t>(row);
    for (std::int32_t col = 0; col < width; ++col) {
      const std::size_t at = line + bytes_per_pixel * static_cast<std::size_t>(col);
      double value;
      if (bits == 8) {
        if (bytes[at] >= colors_used) throw IoError("BMP pixel references a missing palette entry");
        value = palette[bytes[at]];
      } else {
        value = luma(bytes[at + 2], bytes[at + 1], bytes[at]);
      }
      image.pixels(static_cast<Index>(target), col) = value;
    }
  }
  return image;
}

inline Image load_grayscale(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_bmp(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Encodes an image as a bottom-up BMP, rounding and clamping to 8 bits.
/// bits = 8 writes a grayscale palette, bits = 24 writes R = G = B.
inline std::vector<unsigned char> encode_bmp(const Image& image, int bits = 8) {
  if (bits != 8 && bits != 24) throw InvalidArgument("encode_bmp: bits must be 8 or 24");
  if (image.height() < 1 || image.width() < 1) throw InvalidArgument("encode_bmp: empty image");
  const auto width = static_cast<std::uint32_t>(image.width());
  const auto height = static_cast<std::uint32_t>(image.height());
  const std::uint32_t bytes_per_pixel = static_cast<std::uint32_t>(bits) / 8;
  const std::uint32_t stride = (width * bytes_per_pixel + 3) & ~3u;
  const std::uint32_t palette_bytes = bits == 8 ? 256 * 4 : 0;
  const std::uint32_t offset = 14 + 40 + palette_bytes;
  const std::uint32_t data_bytes = stride * height;

  std::vector<unsigned char> out;
  out.reserve(offset + data_bytes);
  out.push_back('B');
  out.push_back('M');
  detail::put_u32(out, offset + data_bytes);
  detail::put_u32(out, 0);
  detail::put_u32(out, offset);
  detail::put_u32(out, 40);
  detail::put_u32(out, width);
  detail::put_u32(out, height);
  detail::put_u16(out, 1);
  detail::put_u16(out, static_cast<std::uint16_t>(bits));
  detail::put_u32(out, 0);
  detail::put_u32(out, data_bytes);
  detail::put_u32(out, 2835);  // 72 dpi
  detail::put_u32(out, 2835);
  detail::put_u32(out, bits == 8 ? 256 : 0);
  detail::put_u32(out, 0);
  if (bits == 8) {
    for (int i = 0; i < 256; ++i) {
      const auto v = static_cast<unsigned char>(i);
      out.insert(out.end(), {v, v, v, 0});
    }
  }
  for (std::uint32_t row = 0; row < height; ++row) {
    const Index source = static_cast<Index>(height - 1 - row);
    std::size_t written = 0;
    for (std::uint32_t col = 0; col < width; ++col) {
      const double v = std::clamp(std::round(image.pixels(source, col)), 0.0, 255.0);
      const auto byte = static_cast<unsigned char>(v);
      for (std::uint32_t k = 0; k < bytes_per_pixel; ++k) out.push_back(byte);
      written += bytes_per_pixel;
    }
    for (; written < stride; ++written) out.push_back(0);
  }
  return out;
}

inline void save_bmp(const std::filesystem::path& path, const Image& image, int bits = 8) {
  const std::vector<unsigned char> bytes = encode_bmp(image, bits);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

/// Peak signal-to-noise ratio in dB against a peak of 255. Identical images
/// give +infinity.
inline double psnr(const Image& reference, const Image& test) {
  if (reference.height() != test.height() || reference.width() != test.width()) {
    throw DimensionError("psnr: image dimensions differ");
  }
  if (reference.size() == 0) throw DimensionError("psnr: empty images");
  const double mse = (reference.pixels - test.pixels).array().square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace csrecon
