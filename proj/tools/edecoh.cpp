// Command-line front end: simulate, models-table, fit, diffractogram,
// synth-image. Exit codes: 0 ok, 2 config, 3 numerical, 4 I/O.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edecoh/analysis.hpp"
#include "edecoh/config.hpp"
#include "edecoh/errors.hpp"
#include "edecoh/image_io.hpp"
#include "edecoh/pipeline.hpp"
#include "edecoh/svg.hpp"

namespace fs = std::filesystem;
using namespace edecoh;

namespace {

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Numerical: return 3;
    case ErrorCategory::Io: return 4;
  }
  return 3;
}

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
  std::vector<std::string> formats;
};

ScenarioConfig resolve(const Common& c) {
  ScenarioConfig cfg = !c.config.empty() ? load_config(c.config)
                       : !c.preset.empty() ? preset_config(c.preset)
                                           : ScenarioConfig{};
  if (c.seed) cfg.numerics.seed = *c.seed;
  if (!c.out.empty()) cfg.outputs.directory = c.out;
  if (!c.model.empty()) cfg.model = parse_model_id(c.model);
  if (!c.formats.empty()) {
    cfg.outputs.csv = cfg.outputs.json = cfg.outputs.svg = false;
    for (const auto& f : c.formats) {
      if (f == "csv") cfg.outputs.csv = true;
      else if (f == "json") cfg.outputs.json = true;
      else if (f == "svg") cfg.outputs.svg = true;
    }
  }
  cfg.validate();
  return cfg;
}

bool wants(const std::vector<std::string>& formats, const std::string& f, bool fallback) {
  if (formats.empty()) return fallback;
  return std::find(formats.begin(), formats.end(), f) != formats.end();
}

fs::path ensure_dir(const std::string& dir) {
  const fs::path p = dir.empty() ? fs::path("out") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
  return p;
}

bool is_lineout_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  return first.rfind("x_m", 0) == 0;
}

int run_simulate(const Common& c) {
  const auto cfg = resolve(c);
  const auto result = run_scenario(cfg, true);
  std::printf("scenario %s  model %s  material %s  config %s\n", cfg.name.c_str(),
              std::string(to_string(result.curve.model)).c_str(),
              result.curve.material_label.c_str(), result.config_hash.c_str());
  if (cfg.surface_present)
    std::printf("surface height %.4g um, transmitted fraction %.4f\n",
                result.surface_height * 1e6, result.transmitted_fraction);
  std::printf("%10s %12s %12s %12s %12s %8s\n", "Y_um", "L_coh_nm", "w_fwhm_um", "d_um",
              "gamma_ref", "paths");
  for (const auto& p : result.curve.points)
    std::printf("%10.3f %12.2f %12.3f %12.3f %12.4g %8zu\n", p.y * 1e6, p.l_coh * 1e9,
                p.w_fwhm * 1e6, p.spacing * 1e6, p.gamma_ref, p.trajectories);
  for (const auto& w : result.curve.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& a : result.artifacts) std::printf("wrote %s\n", a.string().c_str());
  return 0;
}

int run_models_table(const Common& c, std::vector<double> ys, std::vector<double> dxs) {
  const auto cfg = resolve(c);
  if (ys.empty()) ys = {1e-6, 2e-6, 5e-6, 10e-6, 20e-6};
  if (dxs.empty()) dxs = {100e-9, 600e-9};
  const auto rows = models_table(cfg, ys, dxs);
  const std::string csv = models_table_csv(rows);
  if (c.out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    const auto dir = ensure_dir(c.out);
    write_text_file(dir / "models_table.csv", csv);
    std::printf("wrote %s\n", (dir / "models_table.csv").string().c_str());
  }
  return 0;
}

struct ImageArgs {
  std::string input;
  double slant = 0.0;
  double bin_height = 4.8e-6;
  double pixel_x = 1e-6;
  double pixel_y = 1e-6;
  int n_max = 4;
  double period = 100e-9;
  bool global_d = false;
};

std::vector<LineOut> load_lineouts(const ImageArgs& a) {
  if (is_lineout_csv(a.input)) return {read_lineout_csv(a.input)};
  PixelGeometry g;
  g.pixel_x = a.pixel_x;
  g.pixel_y = a.pixel_y;
  const auto image = read_detector_image(a.input, g);
  return extract_lineouts(image, a.slant, a.bin_height);
}

int run_fit(const Common& c, const ImageArgs& a) {
  const auto lines = load_lineouts(a);
  FitOptions options;
  options.n_max = a.n_max;
  options.grating_period = a.period;
  const auto batch = fit_lineouts(lines, options, a.global_d);
  for (const auto& m : batch.messages) std::fprintf(stderr, "warning: %s\n", m.c_str());
  const auto dir = ensure_dir(c.out);
  if (wants(c.formats, "json", true)) {
    std::string text = "[\n";
    bool first = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!batch.fits[i]) continue;
      text += (first ? "" : ",\n") + fit_result_json(*batch.fits[i], lines[i].y);
      first = false;
    }
    text += "\n]\n";
    write_text_file(dir / "fits.json", text);
    std::printf("wrote %s\n", (dir / "fits.json").string().c_str());
  }
  if (wants(c.formats, "csv", false)) {
    std::ostringstream out;
    out.precision(12);
    out << "Y_m,L_coh_m,w_fwhm_m,d_m,residual_norm,converged\n";
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!batch.fits[i]) continue;
      const auto& f = *batch.fits[i];
      out << lines[i].y << ',' << f.l_coh << ',' << f.w_fwhm << ',' << f.params.spacing << ','
          << f.residual_norm << ',' << (f.converged ? 1 : 0) << '\n';
    }
    write_text_file(dir / "fits.csv", out.str());
    std::printf("wrote %s\n", (dir / "fits.csv").string().c_str());
  }
  std::size_t ok = 0;
  for (const auto& f : batch.fits) ok += f.has_value();
  if (ok == 0) throw NumericalError("no line-out could be fitted");
  return 0;
}

int run_diffractogram(const Common& c, const ImageArgs& a) {
  const auto lines = load_lineouts(a);
  FitOptions options;
  options.n_max = a.n_max;
  options.grating_period = a.period;
  const auto batch = fit_lineouts(lines, options, a.global_d);
  for (const auto& m : batch.messages) std::fprintf(stderr, "warning: %s\n", m.c_str());
  const auto gram = build_diffractogram(lines, batch.fits);
  for (const auto& w : gram.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto dir = ensure_dir(c.out);
  if (wants(c.formats, "csv", true)) {
    write_diffractogram_csv(gram, dir / "diffractogram.csv");
    std::printf("wrote %s\n", (dir / "diffractogram.csv").string().c_str());
  }
  if (wants(c.formats, "svg", true)) {
    write_text_file(dir / "diffractogram.svg", svg_heatmap(gram, "diffractogram"));
    std::printf("wrote %s\n", (dir / "diffractogram.svg").string().c_str());
  }
  return 0;
}

int run_synth(const Common& c, const SynthOptions& s) {
  const auto cfg = resolve(c);
  const auto image = synth_image(cfg, s);
  const auto dir = ensure_dir(c.out.empty() ? cfg.outputs.directory : c.out);
  write_pgm(image, dir / "image.pgm");
  write_sidecar(image, dir / "image.pgm");
  std::printf("wrote %s (%zux%zu)\n", (dir / "image.pgm").string().c_str(), image.width,
              image.height);
  if (wants(c.formats, "csv", false)) {
    write_csv_matrix(image, dir / "image.csv");
    write_sidecar(image, dir / "image.csv");
    std::printf("wrote %s\n", (dir / "image.csv").string().c_str());
  }
  return 0;
}

void add_common(CLI::App* cmd, Common& c, bool scenario) {
  if (scenario) {
    cmd->add_option("--config", c.config, "Scenario JSON (or a run manifest)");
    cmd->add_option("--preset", c.preset, "silicon | gold | baseline");
    cmd->add_option("--seed", c.seed, "Random seed (u64)");
    cmd->add_option("--model", c.model, "none | zurek | buhmann | howie | machnikowski");
  }
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--format", c.formats, "csv | json | svg (repeatable)")
      ->check(CLI::IsMember({"csv", "json", "svg"}));
}

void add_image(CLI::App* cmd, ImageArgs& a) {
  cmd->add_option("--input", a.input, "PGM (P2/P5), CSV matrix or x_m,counts line-out")
      ->required();
  cmd->add_option("--slant", a.slant, "Line-out slant (rad)");
  cmd->add_option("--bin-height", a.bin_height, "Integrated height per line-out (m)");
  cmd->add_option("--pixel-x", a.pixel_x, "Pixel width when no sidecar exists (m)");
  cmd->add_option("--pixel-y", a.pixel_y, "Pixel height when no sidecar exists (m)");
  cmd->add_option("--n-max", a.n_max, "Highest diffraction order in the model");
  cmd->add_option("--period", a.period, "Grating period (m)");
  cmd->add_flag("--global-d", a.global_d, "Refit every row with the median spacing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electron matter-wave decoherence simulation and diffraction analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(EDECOH_CLI_VERSION));

  Common common;
  ImageArgs image;
  SynthOptions synth;
  std::vector<double> ys, dxs;

  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write the L_coh(Y) curve");
  add_common(simulate, common, true);

  auto* table = app.add_subcommand("models-table", "Tabulate tau, P and Gamma for every model");
  add_common(table, common, true);
  table->add_option("--y", ys, "Heights above the surface (m)");
  table->add_option("--dx", dxs, "Path separations (m)");

  auto* fit = app.add_subcommand("fit", "Fit line-outs of an image or a line-out CSV");
  add_common(fit, common, false);
  add_image(fit, image);

  auto* gram = app.add_subcommand("diffractogram", "Normalized diffractogram of an image");
  add_common(gram, common, false);
  add_image(gram, image);

  auto* synthesize = app.add_subcommand("synth-image", "Render a synthetic detector image");
  add_common(synthesize, common, true);
  synthesize->add_option("--skew", synth.skew, "Image skew (rad)");
  synthesize->add_option("--noise", synth.noise, "Shot-noise scale (0 disables)");
  synthesize->add_option("--haze", synth.haze, "Background haze as a fraction of peak");
  synthesize->add_option("--pixel-x", synth.pixel_x, "Pixel width (m)");
  synthesize->add_option("--pixel-y", synth.pixel_y, "Pixel height (m)");
  synthesize->add_option("--peak-counts", synth.peak_counts, "Counts at the brightest pixel");
  synthesize->add_option("--noise-seed", synth.seed, "Seed of the noise generator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return run_simulate(common);
    if (*table) return run_models_table(common, ys, dxs);
    if (*fit) return run_fit(common, image);
    if (*gram) return run_diffractogram(common, image);
    if (*synthesize) return run_synth(common, synth);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
