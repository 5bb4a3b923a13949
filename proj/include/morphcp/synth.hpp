#pragma once

// Synthetic (truth, prediction, soft map) triples with a controlled,
// exchangeable degradation process.
//
// Each sample draws its degradation magnitude i.i.d. from a categorical
// distribution. In translate mode the prediction is the truth moved by an
// offset of L1 length d, and blobs stay d pixels away from the border, so
// the cross-family score at τ = 1 is exactly d.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/data.hpp"
#include "morphcp/detail/parallel.hpp"
#include "morphcp/error.hpp"
#include "morphcp/io/file.hpp"
#include "morphcp/io/image.hpp"
#include "morphcp/morphology.hpp"
#include "morphcp/random.hpp"

namespace morphcp::synth {

enum class DegradeMode { kTranslate, kErode, kDrop };

inline std::string_view to_string(DegradeMode m) {
  switch (m) {
    case DegradeMode::kTranslate: return "translate";
    case DegradeMode::kErode: return "erode";
    case DegradeMode::kDrop: return "drop";
  }
  return "?";
}

inline std::optional<DegradeMode> parse_mode(std::string_view s) {
  if (s == "translate") return DegradeMode::kTranslate;
  if (s == "erode") return DegradeMode::kErode;
  if (s == "drop") return DegradeMode::kDrop;
  return std::nullopt;
}

/// Which mask the soft map is built around.
enum class SoftSource { kPrediction, kTruth };

/// Categorical distribution over nonnegative integer magnitudes.
struct MagnitudeDistribution {
  std::vector<int> values;
  std::vector<double> weights;

  static MagnitudeDistribution uniform(int lo, int hi) {
    MagnitudeDistribution d;
    for (int v = lo; v <= hi; ++v) {
      d.values.push_back(v);
      d.weights.push_back(1.0);
    }
    return d;
  }

  void validate() const {
    if (values.empty() || values.size() != weights.size()) {
      throw ConfigError("magnitude distribution needs matching, nonempty value and weight lists");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] < 0) throw ConfigError("magnitudes must be nonnegative");
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw ConfigError("weights must be finite and >= 0");
      total += weights[i];
    }
    if (!(total > 0.0)) throw ConfigError("magnitude weights sum to zero");
  }

  int max() const { return *std::max_element(values.begin(), values.end()); }

  int sample(Rng& rng) const {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (u < weights[i]) return values[i];
      u -= weights[i];
    }
    for (std::size_t i = values.size(); i > 0; --i) {
      if (weights[i - 1] > 0.0) return values[i - 1];
    }
    return values.back();
  }
};

struct SynthConfig {
  int width = 96;
  int height = 96;
  std::size_t count = 100;
  int blobs_min = 1;
  int blobs_max = 3;
  int radius_min = 3;
  int radius_max = 8;
  DegradeMode mode = DegradeMode::kTranslate;
  MagnitudeDistribution magnitudes = MagnitudeDistribution::uniform(0, 8);
  bool soft_maps = true;
  SoftSource soft_source = SoftSource::kPrediction;
  double soft_scale = 1.0;  // sigmoid width, pixels
  double soft_noise = 0.0;  // amplitude of uniform noise added in the far field
  int far_field = 4;        // L1 distance from the source mask where the far field starts
  std::uint64_t seed = 0;

  /// Distance blobs keep from the border.
  int border_margin() const { return mode == DegradeMode::kTranslate ? magnitudes.max() : 0; }

  void validate() const {
    if (count == 0) throw ConfigError("synthetic dataset needs at least one image");
    if (width < 1 || height < 1) throw ConfigError("image size must be positive");
    if (blobs_min < 1 || blobs_max < blobs_min) throw ConfigError("blob count range must satisfy 1 <= min <= max");
    if (radius_min < 0 || radius_max < radius_min) throw ConfigError("blob radius range must satisfy 0 <= min <= max");
    magnitudes.validate();
    if (mode == DegradeMode::kDrop && magnitudes.max() > 100) throw ConfigError("drop magnitudes are percentages");
    if (!(soft_scale > 0.0)) throw ConfigError("soft scale must be positive");
    if (!(soft_noise >= 0.0 && soft_noise <= 1.0)) throw ConfigError("soft noise must lie in [0, 1]");
    if (far_field < 0) throw ConfigError("far-field distance must be nonnegative");
    const int span = 2 * border_margin() + 2 * radius_max + 1;
    if (span > width || span > height) {
      throw ConfigError("unsatisfiable geometry: blobs of radius " + std::to_string(radius_max) + " with border margin " +
                        std::to_string(border_margin()) + " do not fit a " + std::to_string(width) + "x" +
                        std::to_string(height) + " canvas");
    }
  }
};

/// Union of random discs, each at least `border_margin` pixels from the border.
inline BinaryMask gen_truth(const SynthConfig& cfg, Rng& rng) {
  const int margin = cfg.border_margin();
  BinaryMask m(cfg.width, cfg.height);
  const int blobs = uniform_int(rng, cfg.blobs_min, cfg.blobs_max);
  for (int b = 0; b < blobs; ++b) {
    const int rad = uniform_int(rng, cfg.radius_min, cfg.radius_max);
    const int lo = margin + rad;
    const int cr = uniform_int(rng, lo, cfg.height - 1 - lo);
    const int cc = uniform_int(rng, lo, cfg.width - 1 - lo);
    for (int dr = -rad; dr <= rad; ++dr) {
      for (int dc = -rad; dc <= rad; ++dc) {
        if (dr * dr + dc * dc <= rad * rad) m.set(cr + dr, cc + dc);
      }
    }
  }
  return m;
}

/// translate: move by a random offset of L1 length `magnitude` (the mask must
/// keep that much clearance from the border); erode: `magnitude` erosions by
/// the cross; drop: clear each pixel with probability magnitude / 100.
inline BinaryMask degrade(const BinaryMask& truth, DegradeMode mode, int magnitude, Rng& rng) {
  if (magnitude < 0) throw ConfigError("degradation magnitude must be nonnegative");
  switch (mode) {
    case DegradeMode::kTranslate: {
      int top = truth.height(), left = truth.width(), bottom = -1, right = -1;
      for (const Pixel& p : truth.pixels()) {
        top = std::min(top, p.row);
        bottom = std::max(bottom, p.row);
        left = std::min(left, p.col);
        right = std::max(right, p.col);
      }
      if (bottom >= 0) {
        const int clearance = std::min({top, left, truth.height() - 1 - bottom, truth.width() - 1 - right});
        if (magnitude > clearance) {
          throw ConfigError("translation by " + std::to_string(magnitude) + " exceeds the mask's border clearance of " +
                            std::to_string(clearance));
        }
      }
      const int dr = uniform_int(rng, -magnitude, magnitude);
      const int rest = magnitude - std::abs(dr);
      const int dc = rest == 0 ? 0 : (uniform_below(rng, 2) == 0 ? rest : -rest);
      return shifted(truth, dr, dc);
    }
    case DegradeMode::kErode: {
      BinaryMask out = truth;
      const auto cross = StructuringElement::cross();
      for (int i = 0; i < magnitude && out.any(); ++i) out = erode(out, cross);
      return out;
    }
    case DegradeMode::kDrop: {
      BinaryMask out = truth;
      const double p = magnitude / 100.0;
      for (const Pixel& px : truth.pixels()) {
        if (uniform01(rng) < p) out.set(px, false);
      }
      return out;
    }
  }
  throw ContractError("unknown degradation mode");
}

/// Sigmoid of the signed L1 distance to `source` (>= 0.5 inside), plus
/// uniform noise of amplitude `soft_noise` where the distance exceeds
/// `far_field`.
inline SoftScoreMap gen_softmap(const BinaryMask& source, const SynthConfig& cfg, Rng& rng) {
  const DistanceMap outside = distance_map(source, Metric::kL1);
  const DistanceMap inside = distance_map(source.complement(), Metric::kL1);
  std::vector<float> values(source.pixel_count());
  for (int r = 0; r < source.height(); ++r) {
    for (int c = 0; c < source.width(); ++c) {
      const std::int32_t dout = outside.at(r, c);
      double base = 0.0;
      if (source.test(r, c)) {
        const std::int32_t din = inside.finite(inside.at(r, c)) ? inside.at(r, c) : source.width() + source.height();
        base = 1.0 / (1.0 + std::exp(-din / cfg.soft_scale));
      } else if (outside.finite(dout)) {
        base = 1.0 / (1.0 + std::exp(dout / cfg.soft_scale));
      }
      double v = base;
      if (cfg.soft_noise > 0.0 && dout > cfg.far_field) v += cfg.soft_noise * uniform01(rng);
      values[static_cast<std::size_t>(r) * source.width() + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return SoftScoreMap(source.width(), source.height(), std::move(values));
}

struct SynthSample {
  BinaryMask truth;
  BinaryMask pred;
  std::optional<SoftScoreMap> soft;
  int magnitude = 0;
};

/// Sample `index`, drawn from its own stream so generation order and
/// parallelism never change the output.
inline SynthSample generate_sample(const SynthConfig& cfg, std::size_t index) {
  Rng rng = make_rng(cfg.seed, Stream::kSynth, index);
  BinaryMask truth = gen_truth(cfg, rng);
  const int magnitude = cfg.magnitudes.sample(rng);
  BinaryMask pred = degrade(truth, cfg.mode, magnitude, rng);
  std::optional<SoftScoreMap> soft;
  if (cfg.soft_maps) soft = gen_softmap(cfg.soft_source == SoftSource::kTruth ? truth : pred, cfg, rng);
  return {std::move(truth), std::move(pred), std::move(soft), magnitude};
}

inline std::vector<SynthSample> generate(const SynthConfig& cfg, int jobs = 1) {
  cfg.validate();
  std::vector<std::optional<SynthSample>> slots(cfg.count);
  detail::parallel_for(cfg.count, jobs, [&](std::size_t i) { slots[i] = generate_sample(cfg, i); });
  std::vector<SynthSample> out;
  out.reserve(cfg.count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%05zu", index);
  return buf;
}

/// In-memory dataset with the same ids `gen_dataset` writes.
inline std::vector<Sample> to_samples(std::vector<SynthSample> generated) {
  std::vector<Sample> out;
  out.reserve(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    auto& g = generated[i];
    out.push_back(Sample{sample_id(i), std::move(g.truth), std::move(g.pred), std::move(g.soft)});
  }
  return out;
}

struct GeneratedDataset {
  std::filesystem::path manifest;
  std::filesystem::path sidecar;
  std::vector<int> magnitudes;
};

inline constexpr const char* kSidecarFormat = "morphcp.synth-magnitudes";

/// Writes truth/, pred/ and soft/ rasters, manifest.json, and a
/// magnitudes.json sidecar with each sample's drawn magnitude.
inline GeneratedDataset gen_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir, int jobs = 1) {
  auto samples = generate(cfg, jobs);
  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.dimensions = DimensionPolicy::kUniform;
  nlohmann::json mags = nlohmann::json::object();
  GeneratedDataset result;
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string id = sample_id(i);
    ManifestEntry e{id, std::filesystem::path("truth") / (id + ".pgm"), std::filesystem::path("pred") / (id + ".pgm"),
                    std::nullopt};
    io::save_mask(samples[i].truth, out_dir / *e.truth);
    io::save_mask(samples[i].pred, out_dir / e.pred);
    if (samples[i].soft) {
      e.soft = std::filesystem::path("soft") / (id + ".pfm");
      io::save_softmap(*samples[i].soft, out_dir / *e.soft);
    }
    manifest.entries.push_back(std::move(e));
    mags[id] = samples[i].magnitude;
    result.magnitudes.push_back(samples[i].magnitude);
  }
  result.manifest = out_dir / "manifest.json";
  result.sidecar = out_dir / "magnitudes.json";
  save_manifest(manifest, result.manifest);
  const nlohmann::json sidecar{{"format", kSidecarFormat},
                               {"version", 1},
                               {"mode", std::string(to_string(cfg.mode))},
                               {"seed", cfg.seed},
                               {"magnitudes", std::move(mags)}};
  io::write_text(result.sidecar, sidecar.dump(2) + "\n");
  return result;
}

}  // namespace morphcp::synth
