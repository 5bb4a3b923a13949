// morphcp: calibrate, apply and evaluate conformal margins for binary
// segmentation from the command line.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "morphcp/morphcp.hpp"

namespace fs = std::filesystem;
using namespace morphcp;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfigExit = 2,
  kDataExit = 3,
  kFeasibilityExit = 4,
  kContractExit = 5,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kConfigExit;
    case ErrorKind::kData: return kDataExit;
    case ErrorKind::kFeasibility: return kFeasibilityExit;
    case ErrorKind::kContract: return kContractExit;
  }
  return kInternal;
}

int fail(const char* kind, const std::string& message, int code) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::fprintf(stderr, "morphcp: error[%s]: %s\n", kind, line.c_str());
  return code;
}

void warn(const std::string& message) { std::fprintf(stderr, "morphcp: warning: %s\n", message.c_str()); }

struct Options {
  fs::path manifest;
  fs::path out;
  fs::path calibration;
  std::vector<double> alphas{0.1};
  std::vector<double> taus{1.0};
  std::string se;
  std::string grow;
  bool threshold = false;
  std::uint64_t seed = 0;
  std::size_t runs = 36;
  double calib_frac = 0.5;
  bool overlays = false;
  int jobs = 1;
};

struct FamilyFlags {
  CLI::Option* se = nullptr;
  CLI::Option* grow = nullptr;
  CLI::Option* threshold = nullptr;
  bool given() const { return se->count() + grow->count() + threshold->count() > 0; }
};

FamilyFlags add_family(CLI::App* cmd, Options& o) {
  FamilyFlags f;
  f.se = cmd->add_option("--se", o.se, "Iterated structuring element: cross, square or file:PATH (default cross)");
  f.grow = cmd->add_option("--grow", o.grow, "Growing ball family: l1, l2 or linf");
  f.threshold = cmd->add_flag("--threshold", o.threshold, "Soft-score thresholding family");
  f.se->excludes(f.grow)->excludes(f.threshold);
  f.grow->excludes(f.threshold);
  return f;
}

NestedFamilySpec resolve_family(const Options& o) {
  if (o.threshold) return SoftThreshold{};
  if (!o.grow.empty()) {
    auto shape = parse_grow_shape(o.grow);
    if (!shape) throw ConfigError("--grow expects l1, l2 or linf, got '" + o.grow + "'");
    return GrowingSE{*shape};
  }
  if (o.se.empty() || o.se == "cross") return IteratedSE{StructuringElement::cross()};
  if (o.se == "square") return IteratedSE{StructuringElement::square()};
  if (o.se.rfind("file:", 0) == 0) {
    const fs::path path = o.se.substr(5);
    std::string text;
    try {
      text = io::read_text(path);
    } catch (const DataError& e) {
      throw ConfigError(std::string("--se: ") + e.what());
    }
    try {
      return IteratedSE{StructuringElement(parse_offsets(text))};
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  throw ConfigError("--se expects cross, square or file:PATH, got '" + o.se + "'");
}

void add_jobs(CLI::App* cmd, Options& o) {
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::Range(1, 1024));
}

void add_protocol(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.alphas, "Risk level(s) in (0, 1); repeatable")->expected(1, -1);
  cmd->add_option("--tau", o.taus, "Coverage ratio(s) in [0, 1]; repeatable")->expected(1, -1);
  cmd->add_option("--seed", o.seed, "Split seed");
  cmd->add_option("--runs", o.runs, "Number of calibration/test splits")->check(CLI::PositiveNumber);
  cmd->add_option("--calib-frac", o.calib_frac, "Calibration fraction in (0, 1)");
}

Dataset load(const Options& o, bool require_truth, bool require_soft) {
  const DatasetManifest m = load_manifest(o.manifest);
  Dataset ds = load_dataset(m, {require_truth, require_soft, o.jobs});
  for (const auto& w : ds.warnings) warn(w);
  return ds;
}

// ---------------------------------------------------------------------------
// Reports

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

/// Key over everything that determines a report: the command, the protocol
/// parameters and the manifest contents. Thread count is excluded because it
/// never changes results.
std::string config_hash(const std::string& command, const Options& o, const NestedFamilySpec& family) {
  const std::string manifest = io::read_text(o.manifest);
  const nlohmann::json key{{"command", command},
                           {"family", family_to_json(family)},
                           {"alphas", o.alphas},
                           {"taus", o.taus},
                           {"seed", o.seed},
                           {"runs", o.runs},
                           {"calibration_fraction", o.calib_frac},
                           {"manifest_fnv1a", hex64(fnv1a(manifest))}};
  return hex64(fnv1a(key.dump()));
}

/// First free "<stem>.json" / "<stem>.N.json" in `dir`; earlier reports are
/// never overwritten.
fs::path next_report_path(const fs::path& dir, const std::string& stem) {
  fs::path p = dir / (stem + ".json");
  for (int n = 1; fs::exists(p) || fs::exists(fs::path(p).replace_extension(".txt")); ++n) {
    p = dir / (stem + "." + std::to_string(n) + ".json");
  }
  return p;
}

void write_report(const fs::path& json_path, const nlohmann::json& doc, const std::string& table) {
  io::write_text(json_path, doc.dump(2) + "\n");
  io::write_text(fs::path(json_path).replace_extension(".txt"), table);
  std::cout << table << "report: " << json_path.string() << "\n";
}

EvaluationConfig evaluation_config(const Options& o, NestedFamilySpec family) {
  EvaluationConfig cfg;
  cfg.family = std::move(family);
  cfg.alphas = o.alphas;
  cfg.taus = o.taus;
  cfg.plan = {o.seed, o.calib_frac, o.runs};
  cfg.jobs = o.jobs;
  for (double a : cfg.alphas) RiskLevel{a};
  for (double t : cfg.taus) CoverageRatio{t};
  cfg.plan.validate();
  return cfg;
}

void warn_split_feasibility(std::size_t n, const EvaluationConfig& cfg) {
  for (double a : cfg.alphas) {
    if (auto w = split_feasibility_warning(n, cfg.plan, RiskLevel(a))) warn(*w);
  }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_calibrate(const Options& o) {
  if (o.alphas.size() != 1 || o.taus.size() != 1) throw ConfigError("calibrate takes exactly one --alpha and one --tau");
  const RiskLevel alpha(o.alphas[0]);
  const CoverageRatio tau(o.taus[0]);
  const NestedFamilySpec family = resolve_family(o);
  const bool thresh = !is_morphological(family);
  const Dataset ds = load(o, true, thresh);
  quantile_rank(ds.size(), alpha);

  nlohmann::json doc;
  std::string lambda_text;
  std::size_t n = 0, k = 0;
  std::vector<std::pair<std::string, std::size_t>> histogram;
  if (thresh) {
    struct Pair {
      BinaryMask truth;
      SoftScoreMap soft;
    };
    std::vector<Pair> pairs;
    for (const Sample& s : ds.samples) pairs.push_back({*s.truth, *s.soft});
    const auto c = calibrate_threshold(pairs, tau, alpha, o.jobs);
    doc = calibration_to_json(c);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", c.lambda_hat);
    lambda_text = buf;
    n = c.n;
    k = c.k;
  } else {
    std::vector<SegmentationPair> pairs;
    for (const Sample& s : ds.samples) pairs.push_back({*s.truth, s.pred});
    const auto c = calibrate(pairs, family, tau, alpha, o.jobs);
    doc = calibration_to_json(c);
    lambda_text = c.lambda_hat.to_string();
    n = c.n;
    k = c.k;
  }
  for (const auto& bin : doc.at("score_histogram")) {
    histogram.emplace_back(bin.at(0).is_string() ? bin.at(0).get<std::string>() : bin.at(0).dump(),
                           bin.at(1).get<std::size_t>());
  }
  const fs::path path = o.out / "calibration.json";
  io::write_text(path, doc.dump(2) + "\n");

  std::printf("family: %s\nalpha: %g\ntau: %g\nn: %zu\nk: %zu\nlambda_hat: %s\nscore histogram:\n",
              describe(family).c_str(), alpha.value(), tau.value(), n, k, lambda_text.c_str());
  for (const auto& [score, count] : histogram) std::printf("  %12s  %zu\n", score.c_str(), count);
  std::printf("calibration: %s\n", path.string().c_str());
  if (doc.at("infeasible").get<bool>()) {
    warn("the calibrated margin is INFEASIBLE; predictions will be full-image sets");
  }
  return kOk;
}

int cmd_predict(const Options& o, const FamilyFlags& flags) {
  const AnyCalibration calib = calibration_from_json([&] {
    try {
      return nlohmann::json::parse(io::read_text(o.calibration));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(o.calibration.string() + ": malformed JSON: " + e.what());
    }
  }());
  const NestedFamilySpec family = std::visit([](const auto& c) { return c.family; }, calib);
  if (flags.given()) {
    const NestedFamilySpec requested = resolve_family(o);
    if (!(requested == family)) {
      throw ConfigError("the calibration was fitted for " + describe(family) + " but the flags select " +
                        describe(requested));
    }
  }
  const bool thresh = !is_morphological(family);
  const DatasetManifest manifest = load_manifest(o.manifest);
  Dataset ds = load_dataset(manifest, {false, thresh, o.jobs});
  for (const auto& w : ds.warnings) warn(w);

  const auto* morph = std::get_if<CalibrationResult>(&calib);
  if (morph && morph->infeasible()) {
    warn("the calibrated margin is INFEASIBLE; emitting full-image prediction sets");
  }
  fs::create_directories(o.out);
  detail::parallel_for(ds.size(), o.jobs, [&](std::size_t i) {
    const Sample& s = ds.samples[i];
    const BinaryMask set = morph ? predict_set(s.pred, *morph).mask
                                 : predict_threshold_set(*s.soft, std::get<ThresholdCalibration>(calib));
    const bool png = io::detail::wants_png(manifest.entries[i].pred);
    io::save_mask(set, o.out / (s.id + (png ? ".png" : ".pgm")));
    if (o.overlays) {
      const auto rgb = render_overlay(s.pred, set, s.truth);
      io::write_file(o.out / (s.id + "_overlay.png"), io::encode_png_rgb(set.width(), set.height(), rgb));
    }
  });
  std::printf("wrote %zu prediction set%s to %s\n", ds.size(), ds.size() == 1 ? "" : "s", o.out.string().c_str());
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const NestedFamilySpec family = resolve_family(o);
  const EvaluationConfig cfg = evaluation_config(o, family);
  const Dataset ds = load(o, true, !is_morphological(family));
  warn_split_feasibility(ds.size(), cfg);
  const EvaluationReport r = evaluate(ds.samples, cfg);
  nlohmann::json doc = evaluation_to_json(r);
  const std::string hash = config_hash("evaluate", o, family);
  doc["config_hash"] = hash;
  write_report(next_report_path(o.out, "evaluate-" + hash), doc,
               "family: " + r.family + "\n" + format_table(r.rows));
  return kOk;
}

int cmd_compare(const Options& o) {
  const NestedFamilySpec family = resolve_family(o);
  if (!is_morphological(family)) throw ConfigError("compare needs a morphological family (--se or --grow)");
  const EvaluationConfig cfg = evaluation_config(o, family);
  const Dataset ds = load(o, true, true);
  warn_split_feasibility(ds.size(), cfg);
  const ComparisonReport r = compare(ds.samples, cfg);
  nlohmann::json doc = comparison_to_json(r);
  const std::string hash = config_hash("compare", o, family);
  doc["config_hash"] = hash;
  write_report(next_report_path(o.out, "compare-" + hash), doc,
               "family: " + r.family + " vs threshold\n" + format_comparison(r));
  return kOk;
}

struct SynthOptions {
  synth::SynthConfig cfg;
  std::string mode = "translate";
  std::string soft_source = "prediction";
  int mag_min = 0;
  int mag_max = 8;
  bool no_soft = false;
};

int cmd_synth(const Options& o, SynthOptions s) {
  auto mode = synth::parse_mode(s.mode);
  if (!mode) throw ConfigError("--mode expects translate, erode or drop, got '" + s.mode + "'");
  if (s.soft_source != "prediction" && s.soft_source != "truth") {
    throw ConfigError("--soft-source expects prediction or truth, got '" + s.soft_source + "'");
  }
  if (s.mag_min > s.mag_max) throw ConfigError("--mag-min exceeds --mag-max");
  s.cfg.mode = *mode;
  s.cfg.soft_source = s.soft_source == "truth" ? synth::SoftSource::kTruth : synth::SoftSource::kPrediction;
  s.cfg.magnitudes = synth::MagnitudeDistribution::uniform(s.mag_min, s.mag_max);
  s.cfg.soft_maps = !s.no_soft;
  s.cfg.seed = o.seed;
  const auto g = synth::gen_dataset(s.cfg, o.out, o.jobs);
  std::printf("wrote %zu pairs to %s\nmanifest: %s\nmagnitudes: %s\n", g.magnitudes.size(), o.out.string().c_str(),
              g.manifest.string().c_str(), g.sidecar.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal margins for binary segmentation by morphological dilation"};
  app.name("morphcp");
  app.require_subcommand(1);
  Options o;
  SynthOptions so;

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit a margin on a calibration manifest");
  calibrate_cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  calibrate_cmd->add_option("--out", o.out, "Output directory")->required();
  calibrate_cmd->add_option("--alpha", o.alphas, "Risk level in (0, 1)")->expected(1);
  calibrate_cmd->add_option("--tau", o.taus, "Coverage ratio in [0, 1]")->expected(1);
  add_family(calibrate_cmd, o);
  add_jobs(calibrate_cmd, o);

  auto* predict_cmd = app.add_subcommand("predict", "Apply a calibrated margin to predicted masks");
  predict_cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  predict_cmd->add_option("--calibration", o.calibration, "calibration.json written by calibrate")->required();
  predict_cmd->add_option("--out", o.out, "Output directory")->required();
  predict_cmd->add_flag("--overlays", o.overlays, "Also write colour overlays");
  const FamilyFlags predict_family = add_family(predict_cmd, o);
  add_jobs(predict_cmd, o);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Repeated split/calibrate/test evaluation");
  evaluate_cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  evaluate_cmd->add_option("--out", o.out, "Report directory")->required();
  add_protocol(evaluate_cmd, o);
  add_family(evaluate_cmd, o);
  add_jobs(evaluate_cmd, o);

  auto* compare_cmd = app.add_subcommand("compare", "Morphological vs threshold margins on identical splits");
  compare_cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  compare_cmd->add_option("--out", o.out, "Report directory")->required();
  add_protocol(compare_cmd, o);
  add_family(compare_cmd, o);
  add_jobs(compare_cmd, o);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--out", o.out, "Output directory")->required();
  synth_cmd->add_option("--count", so.cfg.count, "Number of pairs");
  synth_cmd->add_option("--width", so.cfg.width, "Image width");
  synth_cmd->add_option("--height", so.cfg.height, "Image height");
  synth_cmd->add_option("--mode", so.mode, "Degradation: translate, erode or drop");
  synth_cmd->add_option("--mag-min", so.mag_min, "Smallest degradation magnitude");
  synth_cmd->add_option("--mag-max", so.mag_max, "Largest degradation magnitude (uniform over the range)");
  synth_cmd->add_option("--blobs-min", so.cfg.blobs_min, "Fewest blobs per image");
  synth_cmd->add_option("--blobs-max", so.cfg.blobs_max, "Most blobs per image");
  synth_cmd->add_option("--radius-min", so.cfg.radius_min, "Smallest blob radius");
  synth_cmd->add_option("--radius-max", so.cfg.radius_max, "Largest blob radius");
  synth_cmd->add_option("--soft-noise", so.cfg.soft_noise, "Far-field noise amplitude in [0, 1]");
  synth_cmd->add_option("--soft-scale", so.cfg.soft_scale, "Sigmoid width in pixels");
  synth_cmd->add_option("--far-field", so.cfg.far_field, "Distance beyond which noise is added");
  synth_cmd->add_option("--soft-source", so.soft_source, "Mask the soft map is built around: prediction or truth");
  synth_cmd->add_flag("--no-soft", so.no_soft, "Skip soft maps");
  synth_cmd->add_option("--seed", o.seed, "Generator seed");
  add_jobs(synth_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), kConfigExit);
  }

  try {
    if (*calibrate_cmd) return cmd_calibrate(o);
    if (*predict_cmd) return cmd_predict(o, predict_family);
    if (*evaluate_cmd) return cmd_evaluate(o);
    if (*compare_cmd) return cmd_compare(o);
    if (*synth_cmd) return cmd_synth(o, so);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return fail("data", e.what(), kDataExit);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kInternal);
  }
  return kInternal;
}
