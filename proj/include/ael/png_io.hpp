#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ael/core_types.hpp"

namespace ael::png {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void write_rows(const std::filesystem::path& path, int height, int width, int color_type,
                       int channels, const std::vector<std::uint8_t>& bytes) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png write failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

inline Decoded read_rows(const std::filesystem::path& path, int want_channels) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw Error("cannot open: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png read failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  Decoded out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("expected 8-bit png: " + path.string());
  }
  const int expected_type = want_channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (color_type != expected_type) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unexpected png color type: " + path.string());
  }
  out.channels = want_channels;
  out.bytes.resize(static_cast<std::size_t>(out.height) * out.width * want_channels);
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, out.bytes.data() + static_cast<std::size_t>(y) * out.width * want_channels,
                 nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace detail

/// 8-bit RGB. Values are rounded to the nearest of 256 levels, so images
/// whose values are already k/255 round-trip exactly.
inline void write_image(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.values()[i], 0.0, 1.0) * 255.0));
  }
  detail::write_rows(path, img.height(), img.width(), PNG_COLOR_TYPE_RGB, 3, bytes);
}

inline Image read_image(const std::filesystem::path& path) {
  auto decoded = detail::read_rows(path, 3);
  Image img(decoded.height, decoded.width);
  for (std::size_t i = 0; i < decoded.bytes.size(); ++i) img.values()[i] = decoded.bytes[i] / 255.0;
  return img;
}

/// 8-bit grayscale; IGNORE is stored as 255.
inline void write_mask(const std::filesystem::path& path, const LabelMask& mask) {
  detail::write_rows(path, mask.height(), mask.width(), PNG_COLOR_TYPE_GRAY, 1, mask.values());
}

inline LabelMask read_mask(const std::filesystem::path& path) {
  auto decoded = detail::read_rows(path, 1);
  LabelMask mask(decoded.height, decoded.width);
  mask.values() = std::move(decoded.bytes);
  return mask;
}

}  // namespace ael::png
