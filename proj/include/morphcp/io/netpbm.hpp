#pragma once

// PGM (P2 ASCII, P5 binary; maxval <= 255) and single-channel PFM ("Pf").

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "morphcp/error.hpp"
#include "morphcp/io/file.hpp"

namespace morphcp::io {

namespace detail {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) throw DataError("truncated header");
    return out;
  }

  long long integer(const char* what) {
    const std::string t = token();
    long long v = 0;
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) throw DataError(std::string("malformed ") + what);
      v = v * 10 + (ch - '0');
      if (v > std::numeric_limits<int>::max()) throw DataError(std::string(what) + " out of range");
    }
    return v;
  }

  /// Consumes the single whitespace byte that ends a binary header.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw DataError("malformed header terminator");
    ++pos_;
  }

  std::size_t position() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline bool is_pgm(std::span<const std::uint8_t> b) {
  return b.size() >= 2 && b[0] == 'P' && (b[1] == '2' || b[1] == '5');
}
inline bool is_pfm(std::span<const std::uint8_t> b) {
  return b.size() >= 2 && b[0] == 'P' && (b[1] == 'f' || b[1] == 'F');
}

inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError("not a Netpbm file");
  if (bytes[1] == '3' || bytes[1] == '6') throw DataError("multi-channel image (PPM) is not a mask");
  if (bytes[1] != '2' && bytes[1] != '5') throw DataError("unsupported Netpbm variant P" + std::string(1, bytes[1]));
  const bool ascii = bytes[1] == '2';
  detail::HeaderReader h(bytes.subspan(2));
  GrayImage img;
  img.width = static_cast<int>(h.integer("width"));
  img.height = static_cast<int>(h.integer("height"));
  const long long maxval = h.integer("maxval");
  if (img.width < 1 || img.height < 1) throw DataError("image dimensions must be positive");
  if (maxval < 1) throw DataError("maxval must be positive");
  if (maxval > 255) throw DataError("bit depth above 8 (maxval " + std::to_string(maxval) + ") is not supported");
  const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(count);
  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      const long long v = h.integer("pixel value");
      if (v > maxval) throw DataError("pixel value exceeds maxval");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  } else {
    h.end_of_header();
    const std::size_t start = 2 + h.position();
    if (bytes.size() < start + count) throw DataError("truncated raster");
    std::memcpy(img.pixels.data(), bytes.data() + start, count);
  }
  return img;
}

/// Binary P5 with maxval 255.
inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

/// Single-channel float raster, row-major top to bottom.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;
};

/// Decodes a "Pf" map. Rows are stored bottom-to-top; a negative scale means
/// little-endian samples. NaN or infinite samples are rejected.
inline FloatImage decode_pfm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError("not a PFM file");
  if (bytes[1] == 'F') throw DataError("multi-channel PFM (PF) is not a soft-score map");
  if (bytes[1] != 'f') throw DataError("not a PFM file");
  detail::HeaderReader h(bytes.subspan(2));
  FloatImage img;
  img.width = static_cast<int>(h.integer("width"));
  img.height = static_cast<int>(h.integer("height"));
  if (img.width < 1 || img.height < 1) throw DataError("image dimensions must be positive");
  const std::string scale_text = h.token();
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_text, &used);
    if (used != scale_text.size()) throw DataError("malformed scale");
  } catch (const std::logic_error&) {
    throw DataError("malformed scale '" + scale_text + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw DataError("scale must be finite and nonzero");
  const bool little = scale < 0.0;
  h.end_of_header();
  const std::size_t start = 2 + h.position();
  const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (bytes.size() < start + 4 * count) throw DataError("truncated raster");
  img.pixels.resize(count);
  for (int fr = 0; fr < img.height; ++fr) {
    const int r = img.height - 1 - fr;
    for (int c = 0; c < img.width; ++c) {
      const std::uint8_t* p = bytes.data() + start + 4 * (static_cast<std::size_t>(fr) * img.width + c);
      std::uint32_t u = little ? (std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                                  std::uint32_t{p[3]} << 24)
                               : (std::uint32_t{p[3]} | std::uint32_t{p[2]} << 8 | std::uint32_t{p[1]} << 16 |
                                  std::uint32_t{p[0]} << 24);
      const float v = std::bit_cast<float>(u);
      const std::size_t index = static_cast<std::size_t>(r) * img.width + c;
      if (!std::isfinite(v)) {
        throw DataError("non-finite value at pixel index " + std::to_string(index) + " (row " + std::to_string(r) +
                        ", col " + std::to_string(c) + ")");
      }
      img.pixels[index] = v;
    }
  }
  return img;
}

/// Little-endian "Pf" with scale -1.
inline std::vector<std::uint8_t> encode_pfm(const FloatImage& img) {
  const std::string header = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * img.pixels.size());
  for (int fr = 0; fr < img.height; ++fr) {
    const int r = img.height - 1 - fr;
    for (int c = 0; c < img.width; ++c) {
      const auto u = std::bit_cast<std::uint32_t>(img.pixels[static_cast<std::size_t>(r) * img.width + c]);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
    }
  }
  return out;
}

}  // namespace morphcp::io
