#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphcp/binary_mask.hpp"
#include "morphcp/conformal.hpp"
#include "morphcp/detail/parallel.hpp"
#include "morphcp/error.hpp"
#include "morphcp/io/file.hpp"
#include "morphcp/io/image.hpp"
#include "morphcp/random.hpp"

namespace morphcp {

inline constexpr const char* kManifestFormat = "morphcp.manifest";
inline constexpr int kManifestVersion = 1;

enum class DimensionPolicy { kPerImage, kUniform };

struct ManifestEntry {
  std::string id;
  std::optional<std::filesystem::path> truth;
  std::filesystem::path pred;
  std::optional<std::filesystem::path> soft;
  bool operator==(const ManifestEntry&) const = default;
};

/// A list of (truth, prediction[, soft map]) files. Relative paths resolve
/// against `root`.
struct DatasetManifest {
  std::filesystem::path root;
  DimensionPolicy dimensions = DimensionPolicy::kPerImage;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }
  std::size_t size() const noexcept { return entries.size(); }
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const ManifestEntry& e : m.entries) {
    nlohmann::json j{{"id", e.id}, {"pred", e.pred.generic_string()}};
    if (e.truth) j["truth"] = e.truth->generic_string();
    if (e.soft) j["soft"] = e.soft->generic_string();
    entries.push_back(std::move(j));
  }
  return {{"format", kManifestFormat},
          {"version", kManifestVersion},
          {"dimensions", m.dimensions == DimensionPolicy::kUniform ? "uniform" : "per-image"},
          {"entries", std::move(entries)}};
}

/// Parses a manifest document. Relative "root" values resolve against `base`.
inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  try {
    if (j.at("format").get<std::string>() != kManifestFormat) throw DataError("not a manifest document");
    if (j.at("version").get<int>() != kManifestVersion) {
      throw DataError("unsupported manifest version " + j.at("version").dump());
    }
    DatasetManifest m;
    m.root = base;
    if (j.contains("root")) {
      std::filesystem::path root = j.at("root").get<std::string>();
      m.root = root.is_absolute() ? root : base / root;
    }
    const std::string dims = j.value("dimensions", std::string("per-image"));
    if (dims == "uniform") {
      m.dimensions = DimensionPolicy::kUniform;
    } else if (dims != "per-image") {
      throw DataError("dimensions must be \"uniform\" or \"per-image\"");
    }
    std::set<std::string> seen;
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.id = e.at("id").get<std::string>();
      if (entry.id.empty()) throw DataError("entry with an empty id");
      if (!seen.insert(entry.id).second) throw DataError("duplicate entry id '" + entry.id + "'");
      entry.pred = e.at("pred").get<std::string>();
      if (e.contains("truth")) entry.truth = e.at("truth").get<std::string>();
      if (e.contains("soft")) entry.soft = e.at("soft").get<std::string>();
      m.entries.push_back(std::move(entry));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

/// Loads a manifest and checks that every listed file exists.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed JSON: " + e.what());
  }
  DatasetManifest m;
  try {
    m = manifest_from_json(j, path.parent_path());
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  for (const ManifestEntry& e : m.entries) {
    for (const auto* p : {&e.truth, &e.soft}) {
      if (*p && !std::filesystem::exists(m.resolve(**p))) {
        throw DataError(path.string() + ": entry '" + e.id + "': missing file " + m.resolve(**p).string());
      }
    }
    if (!std::filesystem::exists(m.resolve(e.pred))) {
      throw DataError(path.string() + ": entry '" + e.id + "': missing file " + m.resolve(e.pred).string());
    }
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  io::write_text(path, manifest_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Loaded data

struct Sample {
  std::string id;
  std::optional<BinaryMask> truth;
  BinaryMask pred;
  std::optional<SoftScoreMap> soft;
};

struct LoadOptions {
  bool require_truth = true;
  bool require_soft = false;
  int jobs = 1;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
  std::size_t size() const noexcept { return samples.size(); }
};

inline Dataset load_dataset(const DatasetManifest& m, const LoadOptions& opts = {}) {
  Dataset ds;
  std::vector<std::optional<Sample>> slots(m.entries.size());
  std::vector<std::string> warn(m.entries.size());
  detail::parallel_for(m.entries.size(), opts.jobs, [&](std::size_t i) {
    const ManifestEntry& e = m.entries[i];
    const std::string where = "entry '" + e.id + "': ";
    if (opts.require_truth && !e.truth) throw DataError(where + "no truth mask listed");
    if (opts.require_soft && !e.soft) throw DataError(where + "no soft map listed");
    Sample s{e.id, std::nullopt, io::load_mask(m.resolve(e.pred)), std::nullopt};
    if (e.truth) {
      s.truth = io::load_mask(m.resolve(*e.truth));
      if (!s.truth->same_shape(s.pred)) throw DataError(where + "truth and prediction dimensions differ");
    }
    if (e.soft) {
      bool clamped = false;
      s.soft = io::load_softmap(m.resolve(*e.soft), &clamped);
      if (!s.soft->same_shape(s.pred)) throw DataError(where + "soft map and prediction dimensions differ");
      if (clamped) warn[i] = where + "soft map values clamped to [0, 1]";
    }
    slots[i] = std::move(s);
  });
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (m.dimensions == DimensionPolicy::kUniform && i > 0 && !slots[i]->pred.same_shape(slots[0]->pred)) {
      throw DataError("entry '" + slots[i]->id + "': dimensions differ from the first entry under the uniform policy");
    }
    if (!warn[i].empty()) ds.warnings.push_back(warn[i]);
    ds.samples.push_back(std::move(*slots[i]));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

/// Seeded calibration/test partitioning repeated over `run_count` runs.
struct SplitPlan {
  std::uint64_t seed = 0;
  double calibration_fraction = 0.5;
  std::size_t run_count = 1;

  void validate() const {
    if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
      throw ConfigError("calibration fraction must lie in (0, 1)");
    }
    if (run_count < 1) throw ConfigError("run count must be at least 1");
  }
};

struct Split {
  std::vector<std::size_t> calibration;  // ascending entry indices
  std::vector<std::size_t> test;
};

inline std::size_t calibration_size(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

/// Shuffles 0..n-1 with Fisher-Yates driven by mt19937_64 seeded with
/// derive_seed(seed, Stream::kSplit, run_index); the first
/// ⌈fraction * n⌉ indices form the calibration part.
inline Split split_indices(std::size_t n, const SplitPlan& plan, std::size_t run_index) {
  plan.validate();
  if (run_index >= plan.run_count) throw ContractError("run index beyond the plan's run count");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = make_rng(plan.seed, Stream::kSplit, run_index);
  shuffle(perm, rng);
  const std::size_t k = std::min(n, calibration_size(n, plan.calibration_fraction));
  Split s;
  s.calibration.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(k), perm.end());
  std::sort(s.calibration.begin(), s.calibration.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct SplitIds {
  std::vector<std::string> calibration;
  std::vector<std::string> test;
};

inline SplitIds split(const DatasetManifest& m, const SplitPlan& plan, std::size_t run_index) {
  const Split s = split_indices(m.size(), plan, run_index);
  SplitIds ids;
  for (std::size_t i : s.calibration) ids.calibration.push_back(m.entries[i].id);
  for (std::size_t i : s.test) ids.test.push_back(m.entries[i].id);
  return ids;
}

/// Warning text when the calibration part is too small for `alpha`.
inline std::optional<std::string> split_feasibility_warning(std::size_t n, const SplitPlan& plan, RiskLevel alpha) {
  const std::size_t k = calibration_size(n, plan.calibration_fraction);
  const std::size_t need = min_calibration_size(alpha);
  if (k >= need) return std::nullopt;
  return "calibration split holds " + std::to_string(k) + " pairs but alpha=" + std::to_string(alpha.value()) +
         " needs at least " + std::to_string(need);
}

}  // namespace morphcp
