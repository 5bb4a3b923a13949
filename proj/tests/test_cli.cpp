#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "morphcp/morphcp.hpp"
#include "tempdir.hpp"

using namespace morphcp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(const TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(MORPHCP_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_text(out);
  r.err = io::read_text(err);
  return r;
}

std::string path(const TempDir& dir, const std::string& rel) { return (dir / rel).string(); }

/// Synthetic translate-mode dataset under dir/data.
std::string make_dataset(const TempDir& dir, int count, int seed, const std::string& extra = "") {
  const Result r = run(dir, "synth --out " + path(dir, "data") + " --count " + std::to_string(count) + " --seed " +
                                std::to_string(seed) + " --width 48 --height 48 --radius-min 2 --radius-max 6 " + extra);
  EXPECT_EQ(r.code, 0) << r.err;
  return path(dir, "data/manifest.json");
}

/// Manifest whose predictions are the truth masks.
std::string perfect_manifest(const TempDir& dir, const std::string& manifest) {
  auto j = nlohmann::json::parse(io::read_text(manifest));
  for (auto& e : j["entries"]) e["pred"] = e["truth"];
  const std::string p = path(dir, "data/perfect.json");
  io::write_text(p, j.dump());
  return p;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, ErrorsAreSingleLinesWithDistinctExitCodes) {
  TempDir dir;
  const std::string m = make_dataset(dir, 5, 1);
  Result r = run(dir, "calibrate --manifest " + m + " --out " + path(dir, "cal") + " --alpha 0.1");
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(lines(r.err), 1u);
  EXPECT_EQ(r.err.rfind("morphcp: error[feasibility]: ", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("the sample size must be"), std::string::npos);
  EXPECT_NE(r.err.find("n >= 9"), std::string::npos);

  r = run(dir, "calibrate --manifest " + m + " --out " + path(dir, "cal") + " --alpha 1.5");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("morphcp: error[config]: ", 0), 0u) << r.err;
  r = run(dir, "evaluate --manifest " + m + " --out x --se cross --threshold");
  EXPECT_EQ(r.code, 2);
  r = run(dir, "evaluate --manifest " + m + " --out x --grow l7");
  EXPECT_EQ(r.code, 2);
  r = run(dir, "evaluate --manifest " + m + " --out x --runs 0");
  EXPECT_EQ(r.code, 2);
  r = run(dir, "frobnicate");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lines(r.err), 1u);

  r = run(dir, "calibrate --manifest " + path(dir, "absent.json") + " --out x");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("morphcp: error[data]: ", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("absent.json"), std::string::npos);

  r = run(dir, "synth --out " + path(dir, "none") + " --count 0");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run(dir, "--help").code, 0);
}

TEST(Cli, CalibrateMatchesSidecarOracle) {
  TempDir dir;
  const std::string m = make_dataset(dir, 60, 7, "--mag-max 9");
  const Result r = run(dir, "calibrate --manifest " + m + " --out " + path(dir, "cal") + " --alpha 0.1 --tau 1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto side = nlohmann::json::parse(io::read_text(path(dir, "data/magnitudes.json")));
  std::vector<int> mags;
  for (const auto& [id, v] : side.at("magnitudes").items()) mags.push_back(v.get<int>());
  std::sort(mags.begin(), mags.end());
  const std::size_t k = 55;  // ceil(61 * 0.9)
  const auto cal = nlohmann::json::parse(io::read_text(path(dir, "cal/calibration.json")));
  EXPECT_EQ(cal.at("k"), k);
  EXPECT_EQ(cal.at("lambda_hat"), mags[k - 1]);
  EXPECT_NE(r.out.find("lambda_hat: " + std::to_string(mags[k - 1])), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n: 60"), std::string::npos);
  EXPECT_NE(r.out.find("score histogram"), std::string::npos);
}

TEST(Cli, PerfectPredictionsCalibrateToZeroAndPredictIdentically) {
  TempDir dir;
  const std::string perfect = perfect_manifest(dir, make_dataset(dir, 12, 2));
  Result r = run(dir, "calibrate --manifest " + perfect + " --out " + path(dir, "cal") + " --alpha 0.1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(io::read_text(path(dir, "cal/calibration.json"))).at("lambda_hat"), 0);
  r = run(dir, "predict --manifest " + perfect + " --calibration " + path(dir, "cal/calibration.json") + " --out " +
                   path(dir, "pred"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 12; ++i) {
    const std::string id = morphcp::synth::sample_id(i);
    EXPECT_EQ(io::read_file(path(dir, "pred/" + id + ".pgm")), io::read_file(path(dir, "data/truth/" + id + ".pgm")));
  }
}

TEST(Cli, PredictMarginsHugThePrediction) {
  TempDir dir;
  const std::string m = make_dataset(dir, 20, 3);
  ASSERT_EQ(run(dir, "calibrate --manifest " + m + " --out " + path(dir, "cal") + " --alpha 0.1").code, 0);
  const auto cal = std::get<CalibrationResult>(
      calibration_from_json(nlohmann::json::parse(io::read_text(path(dir, "cal/calibration.json")))));
  ASSERT_FALSE(cal.infeasible());
  const int lambda = cal.lambda_hat.value();
  const Result r = run(dir, "predict --manifest " + m + " --calibration " + path(dir, "cal/calibration.json") +
                                " --out " + path(dir, "pred") + " --overlays --jobs 3");
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 20; ++i) {
    const std::string id = morphcp::synth::sample_id(i);
    const BinaryMask pred = io::load_mask(path(dir, "data/pred/" + id + ".pgm"));
    const BinaryMask truth = io::load_mask(path(dir, "data/truth/" + id + ".pgm"));
    const BinaryMask set = io::load_mask(path(dir, "pred/" + id + ".pgm"));
    const DistanceMap dm = distance_map(pred, Metric::kL1);
    const BinaryMask mu = margin(pred, set);
    for (const Pixel& p : mu.pixels()) ASSERT_LE(dm.at(p.row, p.col), lambda);
    EXPECT_EQ(set, dm.within(lambda));

    const auto bytes = io::read_file(path(dir, "pred/" + id + "_overlay.png"));
    ASSERT_TRUE(io::is_png(bytes));
    const auto expected = io::encode_png_rgb(set.width(), set.height(), render_overlay(pred, set, truth));
    EXPECT_EQ(bytes, expected);
  }
}

TEST(Cli, InfeasibleModelGivesFullImagesAndWarning) {
  TempDir dir;
  const std::string m = make_dataset(dir, 9, 4);
  auto j = nlohmann::json::parse(io::read_text(m));
  const std::string empty = path(dir, "data/empty.pgm");
  io::save_mask(BinaryMask(48, 48), empty);
  for (auto& e : j["entries"]) e["pred"] = empty;
  io::write_text(path(dir, "data/empty.json"), j.dump());
  Result r = run(dir, "calibrate --manifest " + path(dir, "data/empty.json") + " --out " + path(dir, "cal"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("INFEASIBLE"), std::string::npos);
  r = run(dir, "predict --manifest " + m + " --calibration " + path(dir, "cal/calibration.json") + " --out " +
                   path(dir, "pred"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_NE(r.err.find("INFEASIBLE"), std::string::npos);
  EXPECT_EQ(io::load_mask(path(dir, "pred/img00000.pgm")), BinaryMask::filled(48, 48));
}

TEST(Cli, PredictRejectsMismatchedFamilyFlags) {
  TempDir dir;
  const std::string m = make_dataset(dir, 10, 5);
  ASSERT_EQ(run(dir, "calibrate --manifest " + m + " --out " + path(dir, "cal") + " --se square").code, 0);
  const std::string cal = path(dir, "cal/calibration.json");
  EXPECT_EQ(run(dir, "predict --manifest " + m + " --calibration " + cal + " --out " + path(dir, "o") + " --se cross").code, 2);
  EXPECT_EQ(run(dir, "predict --manifest " + m + " --calibration " + cal + " --out " + path(dir, "o") +
                         " --se square").code,
            0);
}

TEST(Cli, CustomElementFromFile) {
  TempDir dir;
  const std::string m = make_dataset(dir, 10, 6);
  io::write_text(path(dir, "plus.txt"), "# plus\n0 0\n1 0\n-1 0\n0 1\n0 -1\n");
  Result r = run(dir, "calibrate --manifest " + m + " --out " + path(dir, "a") + " --se file:" + path(dir, "plus.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(run(dir, "calibrate --manifest " + m + " --out " + path(dir, "b")).code, 0);
  auto a = nlohmann::json::parse(io::read_text(path(dir, "a/calibration.json")));
  auto b = nlohmann::json::parse(io::read_text(path(dir, "b/calibration.json")));
  EXPECT_EQ(a.at("score_histogram"), b.at("score_histogram"));
  io::write_text(path(dir, "bad.txt"), "1 1\n");
  r = run(dir, "calibrate --manifest " + m + " --out " + path(dir, "c") + " --se file:" + path(dir, "bad.txt"));
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, EvaluatePerfectPredictorSingleRun) {
  TempDir dir;
  const std::string perfect = perfect_manifest(dir, make_dataset(dir, 20, 8));
  const Result r = run(dir, "evaluate --manifest " + perfect + " --out " + path(dir, "rep") + " --runs 1");
  ASSERT_EQ(r.code, 0) << r.err;
  fs::path json;
  for (const auto& e : fs::directory_iterator(path(dir, "rep"))) {
    if (e.path().extension() == ".json") json = e.path();
  }
  ASSERT_FALSE(json.empty());
  EXPECT_EQ(json.filename().string().rfind("evaluate-", 0), 0u);
  const auto text = io::read_text(json);
  const EvaluationReport report = evaluation_from_json(nlohmann::json::parse(text));
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].coverage.mean, 1.0);
  EXPECT_EQ(report.rows[0].stretch.mean, 1.0);
  EXPECT_EQ(report.rows[0].lambda_hat.mean, 0.0);
  EXPECT_EQ(evaluation_to_json(report).at("rows"), nlohmann::json::parse(text).at("rows"));
  EXPECT_TRUE(fs::exists(fs::path(json).replace_extension(".txt")));
  EXPECT_NE(r.out.find("avg lambda"), std::string::npos);
}

TEST(Cli, ReportsAreDeterministicAndAppendOnly) {
  TempDir dir;
  const std::string m = make_dataset(dir, 30, 9);
  const std::string args = "evaluate --manifest " + m + " --out " + path(dir, "rep") + " --runs 4 --tau 0.9 --tau 1";
  ASSERT_EQ(run(dir, args + " --jobs 1").code, 0);
  ASSERT_EQ(run(dir, args + " --jobs 4").code, 0);
  std::vector<fs::path> reports;
  for (const auto& e : fs::directory_iterator(path(dir, "rep"))) {
    if (e.path().extension() == ".json") reports.push_back(e.path());
  }
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(io::read_file(reports[0]), io::read_file(reports[1]));
  ASSERT_EQ(run(dir, args + " --seed 1").code, 0);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(path(dir, "rep"))) n += e.path().extension() == ".json";
  EXPECT_EQ(n, 3u);
}

TEST(Cli, CompareRequiresSoftMaps) {
  TempDir dir;
  const std::string m = make_dataset(dir, 20, 10, "--no-soft");
  const Result r = run(dir, "compare --manifest " + m + " --out " + path(dir, "rep") + " --runs 2 --alpha 0.2");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("soft"), std::string::npos);
}

TEST(Cli, CompareWritesTableLayout) {
  TempDir dir;
  const std::string m = make_dataset(dir, 30, 11, "--soft-noise 0.3");
  const Result r = run(dir, "compare --manifest " + m + " --out " + path(dir, "rep") + " --runs 3 --alpha 0.2 --tau 0.99");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* col : {"1-alpha", "tau", "phi_morphology", "phi_thresholding", "Cov_morphology"}) {
    EXPECT_NE(r.out.find(col), std::string::npos) << r.out;
  }
}

TEST(Cli, SynthIsReproducible) {
  TempDir a, b;
  make_dataset(a, 8, 12);
  make_dataset(b, 8, 12);
  for (const auto& e : fs::recursive_directory_iterator(path(a, "data"))) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a / "data");
    EXPECT_EQ(io::read_file(e.path()), io::read_file(b / "data" / rel.string())) << rel;
  }
}
