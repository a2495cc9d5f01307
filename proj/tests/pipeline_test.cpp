#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "edecoh/errors.hpp"
#include "edecoh/image_io.hpp"
#include "edecoh/pipeline.hpp"

using namespace edecoh;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("edecoh_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ScenarioConfig small(const std::string& preset) {
  auto c = preset_config(preset);
  c.numerics.trajectories = 3000;
  c.bins.count = 3;
  c.resistivity_band.reset();
  return c;
}

double relative_spread(const CoherenceCurve& curve) {
  double lo = curve.points.front().l_coh, hi = lo;
  for (const auto& p : curve.points) {
    lo = std::min(lo, p.l_coh);
    hi = std::max(hi, p.l_coh);
  }
  return (hi - lo) / hi;
}

}  // namespace

TEST(Config, DefaultsParseAndValidate) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.model, ModelId::Zurek);
  EXPECT_EQ(c.bins.count, 21);
  EXPECT_NEAR(c.beam.kinetic_energy_ev, 1670.0, 1e-9);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(parse_config(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"beam": {"kinetic_energy_evv": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"beam": {"kinetic_energy_ev": "fast"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"beam": {"kinetic_energy_ev": -5}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"model": {"id": "nonsense"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"grating": {"open_fraction": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_config("not json"), ConfigError);
  try {
    parse_config(R"({"geometry": {"slit_separation": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("slit_separation"), std::string::npos) << e.what();
  }
}

TEST(Config, ResolvedJsonRoundTrips) {
  for (const char* name : {"silicon", "gold", "baseline"}) {
    const auto c = preset_config(name);
    const auto text = config_to_json(c);
    const auto back = parse_config(text);
    EXPECT_EQ(config_to_json(back), text) << name;
    EXPECT_EQ(config_hash(back), config_hash(c)) << name;
  }
}

TEST(Config, HashTracksResultsNotOutputs) {
  auto a = preset_config("silicon");
  auto b = a;
  b.outputs.directory = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.numerics.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, PresetsAndUnknownPreset) {
  EXPECT_FALSE(preset_config("baseline").surface_present);
  EXPECT_NEAR(preset_config("gold").material.resistivity, 2.2e-8, 1e-20);
  EXPECT_TRUE(preset_config("gold").material.fermi_wavevector.has_value());
  EXPECT_TRUE(preset_config("silicon").resistivity_band.has_value());
  EXPECT_THROW(preset_config("copper"), ConfigError);
  EXPECT_EQ(parse_config(R"({"preset": "gold"})").name, "gold");
}

#ifdef EDECOH_SOURCE_DIR
TEST(Config, ShippedScenariosLoad) {
  const fs::path dir = fs::path(EDECOH_SOURCE_DIR) / "configs";
  EXPECT_EQ(load_config(dir / "silicon.json").material.resistivity, 0.1);
  EXPECT_EQ(load_config(dir / "gold.json").model, ModelId::Howie);
  EXPECT_FALSE(load_config(dir / "baseline.json").surface_present);
}
#endif

TEST(ModelsTable, ColumnsAgreeWithTheModels) {
  auto si = preset_config("silicon");
  si.material = MaterialSpec::silicon(1.5);
  auto gold = preset_config("gold");
  const auto si_rows = models_table(si, {2e-6}, {600e-9});
  const auto au_rows = models_table(gold, {2e-6}, {600e-9});
  ASSERT_EQ(si_rows.size(), 5u);
  auto find = [](const std::vector<ModelsTableRow>& rows, ModelId m) {
    return *std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.model == m; });
  };
  EXPECT_EQ(find(si_rows, ModelId::None).gamma, 0.0);
  EXPECT_GE(find(si_rows, ModelId::Zurek).gamma, 10.0 * find(si_rows, ModelId::Howie).gamma);
  // Howie P goes as rho at fixed geometry.
  const double ratio = find(au_rows, ModelId::Howie).gamma / find(si_rows, ModelId::Howie).gamma;
  EXPECT_NEAR(ratio, gold.material.resistivity / si.material.resistivity, 1e-9 * ratio);
  EXPECT_FALSE(find(si_rows, ModelId::Machnikowski).error.empty());
  EXPECT_NE(models_table_csv(si_rows).find("model,y_m,dx_m,tau_s,probability,gamma,error\n"),
            std::string::npos);
}

TEST(Scenario, SameSeedGivesIdenticalCsv) {
  const auto c = small("silicon");
  const auto a = run_scenario(c, false);
  const auto b = run_scenario(c, false);
  EXPECT_EQ(curve_csv(a.curve), curve_csv(b.curve));
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_NEAR(a.transmitted_fraction, 1.0 / 3.0, 0.01);
}

TEST(Scenario, NoDecoherenceIsFlat) {
  auto c = small("silicon");
  c.model = ModelId::None;
  const auto r = run_scenario(c, false);
  ASSERT_EQ(r.curve.points.size(), 3u);
  EXPECT_LT(relative_spread(r.curve), 0.01);
}

TEST(Scenario, BaselineIgnoresTheModel) {
  auto c = small("baseline");
  c.model = ModelId::Zurek;
  const auto r = run_scenario(c, false);
  EXPECT_FALSE(r.curve.warnings.empty());
  for (const auto& p : r.curve.points) EXPECT_EQ(p.gamma_ref, 0.0);
}

TEST(Scenario, ZurekBelowHowieNearTheSurface) {
  auto c = small("silicon");
  c.material = MaterialSpec::silicon(1.5);
  const auto prepared = prepare_ensemble(c);
  const auto zurek = compute_curve(c, prepared, ModelId::Zurek, c.material);
  const auto howie = compute_curve(c, prepared, ModelId::Howie, c.material);
  ASSERT_FALSE(zurek.points.empty());
  EXPECT_LT(zurek.points.front().l_coh, howie.points.front().l_coh);
  EXPECT_GT(zurek.points.front().gamma_ref, howie.points.front().gamma_ref);
}

TEST(Scenario, WritesArtifactsAndManifestReingests) {
  auto c = small("gold");
  const auto dir = scratch("artifacts");
  c.outputs.directory = dir.string();
  const auto r = run_scenario(c, true);
  for (const char* name : {"curve.csv", "curve.svg", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  const auto again = load_config(dir / "manifest.json");
  EXPECT_EQ(config_hash(again), r.config_hash);
  const auto rerun = run_scenario(again, false);
  EXPECT_EQ(curve_csv(rerun.curve), read_text_file(dir / "curve.csv"));
}

TEST(Scenario, UnwritableOutputIsAnIoError) {
  auto c = small("baseline");
  const auto dir = scratch("blocked");
  write_text_file(dir / "file", "x");
  c.outputs.directory = (dir / "file" / "sub").string();
  try {
    run_scenario(c, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Io);
  }
}

TEST(Synth, ImageRoundTripRecoversTheSimulatedSpacing) {
  auto c = small("baseline");
  const auto curve = run_scenario(c, false).curve;
  SynthOptions options;
  options.pixel_x = 0.25e-6;
  const auto image = synth_image(c, options);
  const auto lines = extract_lineouts(image, 0.0, c.geometry.detector_bin_width);
  ASSERT_FALSE(lines.empty());
  for (const auto& line : lines) {
    const auto fit = fit_lineout(line);
    EXPECT_NEAR(fit.params.spacing, curve.points.front().spacing,
                0.01 * curve.points.front().spacing);
  }
}

TEST(Synth, SkewIsUndoneAtTheMatchingSlant) {
  auto c = small("baseline");
  SynthOptions options;
  options.skew = 0.2;
  const auto image = synth_image(c, options);
  const auto lines = extract_lineouts(image, options.skew, 0.4e-6);
  auto argmax = [](const LineOut& l) {
    return l.x[std::max_element(l.counts.begin(), l.counts.end()) - l.counts.begin()];
  };
  const double ref = argmax(lines.front());
  for (const auto& l : lines) EXPECT_NEAR(argmax(l), ref, 1.01 * options.pixel_x);
}

TEST(Synth, NoiseIsSeeded) {
  auto c = small("baseline");
  SynthOptions options;
  options.noise = 1.0;
  options.haze = 0.05;
  const auto a = synth_image(c, options);
  const auto b = synth_image(c, options);
  EXPECT_EQ(a.pixels, b.pixels);
  options.seed = 2;
  EXPECT_NE(synth_image(c, options).pixels, a.pixels);
}

TEST(ImageIo, GraymapAndCsvRoundTrips) {
  DetectorImage image;
  image.width = 7;
  image.height = 3;
  image.pixel_x = 2e-6;
  image.pixel_y = 0.5e-6;
  image.origin_x = -3e-6;
  for (std::size_t i = 0; i < 21; ++i) image.pixels.push_back(static_cast<double>(i * 1000));
  const auto dir = scratch("io");
  for (auto enc : {GraymapEncoding::Plain, GraymapEncoding::Binary}) {
    write_pgm(image, dir / "a.pgm", enc);
    write_sidecar(image, dir / "a.pgm");
    const auto back = read_detector_image(dir / "a.pgm");
    EXPECT_EQ(back.pixels, image.pixels);
    EXPECT_EQ(back.width, 7u);
    EXPECT_DOUBLE_EQ(back.pixel_x, 2e-6);
    EXPECT_DOUBLE_EQ(back.origin_x, -3e-6);
  }
  write_csv_matrix(image, dir / "a.csv");
  EXPECT_EQ(read_detector_image(dir / "a.csv").pixels, image.pixels);
  EXPECT_THROW(read_detector_image(dir / "missing.pgm"), IoError);
}

TEST(ImageIo, LineoutCsvRoundTrip) {
  LineOut line{{0.0, 1e-6, 2e-6}, {1.0, 5.5, 2.25}, 0.0};
  const auto dir = scratch("lineout");
  write_lineout_csv(line, dir / "l.csv");
  const auto back = read_lineout_csv(dir / "l.csv");
  EXPECT_EQ(back.x, line.x);
  EXPECT_EQ(back.counts, line.counts);
}

#ifdef EDECOH_CLI_PATH
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(EDECOH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  write_text_file(dir / "bad.json", R"({"bogus": true})");
  write_text_file(dir / "starved.json",
                  R"({"preset": "baseline", "numerics": {"trajectories": 500, "n_states": 3,
                      "auto_states": false}, "bins": {"count": 1}})");
  write_text_file(dir / "ok.json",
                  R"({"preset": "baseline", "numerics": {"trajectories": 500},
                      "bins": {"count": 1}})");
  write_text_file(dir / "file", "x");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("models-table"), 0);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --no-such-flag"), 2);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "starved.json").string() + " --out " +
                    (dir / "o1").string()),
            3);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "ok.json").string() + " --out " +
                    (dir / "file" / "sub").string()),
            4);
  EXPECT_EQ(run_cli("fit --input " + (dir / "missing.pgm").string()), 4);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "ok.json").string() + " --out " +
                    (dir / "o2").string() + " --format csv"),
            0);
  EXPECT_TRUE(fs::exists(dir / "o2" / "curve.csv"));
}
#endif
