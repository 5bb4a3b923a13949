#pragma once

// Minimal libpng wrappers: 8-bit (or lower) grayscale and paletted decoding,
// grayscale and RGB encoding.

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "morphcp/error.hpp"
#include "morphcp/io/file.hpp"

namespace morphcp::io {

inline bool is_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

namespace detail {

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

inline void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->pos + length > src->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, src->bytes.data() + src->pos, length);
  src->pos += length;
}

inline void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void png_flush_noop(png_structp) {}

[[noreturn]] inline void png_raise(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

inline void png_warn_ignore(png_structp, png_const_charp) {}

}  // namespace detail

/// Grayscale values are expanded to 8 bits; paletted images yield palette
/// indices. Colour, alpha and 16-bit images are rejected.
inline GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  if (!is_png(bytes)) throw DataError("not a PNG file");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_raise, detail::png_warn_ignore);
  if (!png) throw DataError("cannot allocate PNG reader");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("cannot allocate PNG reader");
  }
  detail::PngReadSource src{bytes, 0};
  GrayImage img;
  std::string reject;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG decode failed: " + message);
  }
  png_set_read_fn(png, &src, detail::png_read_from_span);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth > 8) {
    reject = "bit depth " + std::to_string(bit_depth) + " above 8 is not supported";
  } else if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
    reject = "multi-channel PNG (colour type " + std::to_string(color_type) + ") is not a single-channel image";
  }
  if (reject.empty()) {
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE && bit_depth < 8) png_set_packing(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(img.width)) {
      reject = "unexpected PNG row layout";
    } else {
      img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
      rows.resize(static_cast<std::size_t>(img.height));
      for (int r = 0; r < img.height; ++r) rows[r] = img.pixels.data() + static_cast<std::size_t>(r) * img.width;
      png_read_image(png, rows.data());
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!reject.empty()) throw DataError(reject);
  return img;
}

namespace detail {

inline std::vector<std::uint8_t> encode_png(int width, int height, int color_type, int channels,
                                            std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ContractError("encode_png: pixel buffer size mismatch");
  }
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_raise, png_warn_ignore);
  if (!png) throw DataError("cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("cannot allocate PNG writer");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG encode failed: " + message);
  }
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r) {
    rows[r] = const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png_gray(const GrayImage& img) {
  return detail::encode_png(img.width, img.height, PNG_COLOR_TYPE_GRAY, 1, img.pixels);
}

/// `rgb` holds width*height*3 bytes.
inline std::vector<std::uint8_t> encode_png_rgb(int width, int height, std::span<const std::uint8_t> rgb) {
  return detail::encode_png(width, height, PNG_COLOR_TYPE_RGB, 3, rgb);
}

}  // namespace morphcp::io
