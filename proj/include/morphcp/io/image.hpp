#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/error.hpp"
#include "morphcp/io/file.hpp"
#include "morphcp/io/netpbm.hpp"
#include "morphcp/io/png.hpp"

namespace morphcp::io {

namespace detail {

template <class Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline GrayImage decode_gray(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_pfm(bytes)) throw DataError("float map (PFM) where an 8-bit image was expected");
  return decode_pgm(bytes);
}

inline bool wants_png(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

}  // namespace detail

/// Loads a PGM or PNG mask; any nonzero value is foreground.
inline BinaryMask load_mask(const std::filesystem::path& path) {
  return detail::with_path(path, [&] {
    const GrayImage img = detail::decode_gray(read_file(path));
    return BinaryMask::from_bytes(img.width, img.height, img.pixels);
  });
}

/// Writes 0/255 bytes; PNG when the extension is .png, binary PGM otherwise.
inline void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  GrayImage img{mask.width(), mask.height(), mask.to_bytes()};
  write_file(path, detail::wants_png(path) ? encode_png_gray(img) : encode_pgm(img));
}

/// Loads a PFM map, or an 8-bit image read as value / 255. Values outside
/// [0, 1] are clamped and reported through `clamped`.
inline SoftScoreMap load_softmap(const std::filesystem::path& path, bool* clamped = nullptr) {
  return detail::with_path(path, [&] {
    const auto bytes = read_file(path);
    bool any_clamped = false;
    std::vector<float> values;
    int width = 0;
    int height = 0;
    if (is_pfm(bytes)) {
      FloatImage img = decode_pfm(bytes);
      width = img.width;
      height = img.height;
      values = std::move(img.pixels);
      for (float& v : values) {
        const float c = std::clamp(v, 0.0f, 1.0f);
        if (c != v) any_clamped = true;
        v = c;
      }
    } else {
      const GrayImage img = detail::decode_gray(bytes);
      width = img.width;
      height = img.height;
      values.reserve(img.pixels.size());
      for (std::uint8_t b : img.pixels) values.push_back(static_cast<float>(b) / 255.0f);
    }
    if (clamped) *clamped = any_clamped;
    return SoftScoreMap(width, height, std::move(values));
  });
}

inline void save_softmap(const SoftScoreMap& soft, const std::filesystem::path& path) {
  write_file(path, encode_pfm(FloatImage{soft.width(), soft.height(), soft.values()}));
}

}  // namespace morphcp::io
