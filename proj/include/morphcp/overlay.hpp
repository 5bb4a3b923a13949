#pragma once

// Colour rendering of a prediction set against the truth.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "morphcp/binary_mask.hpp"

namespace morphcp {

using Rgb = std::array<std::uint8_t, 3>;

struct OverlayPalette {
  Rgb background{255, 255, 255};
  Rgb prediction{112, 48, 160};
  Rgb margin{135, 206, 250};     // set \ (pred ∪ truth)
  Rgb recovered{220, 20, 60};    // (set \ pred) ∩ truth
  Rgb missed{255, 165, 0};       // truth \ set
};

/// Interleaved RGB, row-major. Without a truth mask only the prediction and
/// margin colours appear.
inline std::vector<std::uint8_t> render_overlay(const BinaryMask& pred, const BinaryMask& set,
                                                const std::optional<BinaryMask>& truth,
                                                const OverlayPalette& palette = {}) {
  pred.require_same_shape(set, "overlay");
  if (truth) truth->require_same_shape(pred, "overlay");
  std::vector<std::uint8_t> rgb;
  rgb.reserve(pred.pixel_count() * 3);
  for (int r = 0; r < pred.height(); ++r) {
    for (int c = 0; c < pred.width(); ++c) {
      const bool in_truth = truth && truth->test(r, c);
      const Rgb* colour = &palette.background;
      if (pred.test(r, c)) {
        colour = &palette.prediction;
      } else if (set.test(r, c)) {
        colour = in_truth ? &palette.recovered : &palette.margin;
      } else if (in_truth) {
        colour = &palette.missed;
      }
      rgb.insert(rgb.end(), colour->begin(), colour->end());
    }
  }
  return rgb;
}

}  // namespace morphcp
