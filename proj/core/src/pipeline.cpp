#include "edecoh/pipeline.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "edecoh/constants.hpp"
#include "edecoh/errors.hpp"
#include "edecoh/image_io.hpp"
#include "edecoh/svg.hpp"
#include "json.hpp"
#include "random.hpp"

#ifndef EDECOH_VERSION
#define EDECOH_VERSION "0.0.0"
#endif

namespace edecoh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runs f, re-raising library errors with the stage name attached.
template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.category(), e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, ErrorCategory::Numerical, e.what());
  }
}

double expected_spacing(const ScenarioConfig& config) {
  return config.beam.de_broglie_wavelength() * config.effective_camera_length() /
         config.grating.period;
}

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

double interpolate(const FarFieldPattern& p, double x) {
  const double u = (x - p.x.start) / p.x.step;
  if (u < 0.0 || u > static_cast<double>(p.x.size - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(u);
  if (i + 1 >= p.x.size) return p.intensity.back();
  const double f = u - static_cast<double>(i);
  return (1.0 - f) * p.intensity[i] + f * p.intensity[i + 1];
}

CoherenceNumerics coherence_numerics(const ScenarioConfig& config) {
  CoherenceNumerics numerics = config.numerics.coherence;
  numerics.far_field.camera_length = config.effective_camera_length();
  numerics.model_options = config.model_options;
  return numerics;
}

}  // namespace

PreparedEnsemble prepare_ensemble(const ScenarioConfig& config) {
  return in_stage("trajectory", [&] {
    config.validate();
    PreparedEnsemble prepared;
    prepared.geometry = config.geometry;
    const auto states = sample_initial_conditions(config.beam, config.geometry,
                                                  config.numerics.trajectories,
                                                  config.numerics.seed);
    if (!config.surface_present) {
      prepared.geometry.surface_height.reset();
    } else if (!prepared.geometry.surface_height) {
      prepared.geometry.surface_height =
          find_cut_height(states, prepared.geometry, config.beam, config.image_charge,
                          config.transmitted_fraction, config.numerics.integrator);
    }
    prepared.ensemble = build_ensemble(states, prepared.geometry, config.beam,
                                       config.image_charge && config.surface_present,
                                       config.numerics.integrator, config.numerics.seed);
    return prepared;
  });
}

FitResult fit_pattern(const FarFieldPattern& pattern, const ScenarioConfig& config, double y,
                      std::vector<std::string>* warnings) {
  const double d = expected_spacing(config);
  const double half = (config.numerics.fit_n_max + 0.5) * d;
  LineOut line;
  line.y = y;
  for (std::size_t i = 0; i < pattern.x.size; ++i) {
    const double x = pattern.x.at(i);
    if (std::abs(x) > half) continue;
    line.x.push_back(x);
    line.counts.push_back(std::max(0.0, pattern.intensity[i]));
  }
  FitOptions options;
  options.n_max = config.numerics.fit_n_max;
  options.grating_period = config.grating.period;
  auto note = [&](const std::string& message) {
    if (warnings) warnings->push_back(message);
  };
  auto geometric_guess = [&] {
    FitParams p;
    p.n_max = options.n_max;
    p.spacing = d;
    p.alpha = constants::pi * config.grating.open_fraction / d;
    p.amplitude = *std::max_element(line.counts.begin(), line.counts.end());
    double m0 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < line.x.size(); ++i) {
      if (std::abs(line.x[i]) > 0.5 * d) continue;
      m0 += line.counts[i];
      m2 += line.counts[i] * line.x[i] * line.x[i];
    }
    const double sigma = m0 > 0.0 ? std::sqrt(m2 / m0) : 0.1 * d;
    p.mixture = 0.5;
    p.width1 = 0.85 * sigma;
    p.width2 = 1.5 * sigma;
    p.background = 0.0;
    p.background_width = half;
    return p;
  };
  FitParams start;
  try {
    start = initial_guess(line, options);
    if (std::abs(start.spacing - d) > options.spacing_window * d) {
      std::ostringstream msg;
      msg << "detected spacing " << start.spacing << " m is outside the window around "
          << d << " m; fitted from the geometric initial guess";
      note(msg.str());
      start = geometric_guess();
      options.fixed_spacing = d;
    }
  } catch (const InsufficientStructureError& e) {
    // Peaks merged: start from the grating geometry instead.
    note(std::string(e.what()) + "; fitted from the geometric initial guess");
    start = geometric_guess();
    options.fixed_spacing = d;
  }
  try {
    return fit_lineout(line, start, options);
  } catch (const FitError& e) {
    note(std::string(e.what()) + "; best-so-far parameters used");
    return e.best();
  }
}

CoherenceCurve compute_curve(const ScenarioConfig& config, const PreparedEnsemble& prepared,
                             ModelId model, const MaterialSpec& material) {
  CoherenceCurve curve;
  curve.model = model;
  curve.material_label = material.label;
  curve.resistivity = material.resistivity;
  if (!config.surface_present && model != ModelId::None) {
    curve.warnings.push_back("no surface in the beam: decoherence model ignored");
    model = ModelId::None;
  }
  const auto numerics = coherence_numerics(config);
  const double bin = config.geometry.detector_bin_width;
  for (double y : config.bins.centers()) {
    const auto result = in_stage("coherence", [&] {
      return pattern_for_height(y, bin, prepared.ensemble, model, material, config.beam,
                                config.grating, numerics);
    });
    if (!result.has_data) {
      curve.empty_bins.push_back(y);
      std::ostringstream msg;
      msg << "bin Y=" << y << " m holds no transmitted trajectories";
      curve.warnings.push_back(msg.str());
      continue;
    }
    for (const auto& w : result.warnings) {
      std::ostringstream msg;
      msg << "bin Y=" << y << " m: " << w;
      curve.warnings.push_back(msg.str());
    }
    std::vector<std::string> fit_warnings;
    const FitResult fit =
        in_stage("analysis", [&] { return fit_pattern(result.pattern, config, y, &fit_warnings); });
    for (auto& w : fit_warnings) curve.warnings.push_back(std::move(w));

    CurvePoint point;
    point.y = y;
    point.l_coh = fit.l_coh;
    point.w_fwhm = fit.w_fwhm;
    point.spacing = fit.params.spacing;
    point.trajectories = result.trajectories;
    point.mean_height = result.mean_height;
    point.sigma_final = result.sigma_final;
    point.n_states = result.n_states;
    point.fit_converged = fit.converged;
    point.gamma_ref = in_stage("coherence", [&] {
      const auto used = subsample_paths(paths_in_bin(prepared.ensemble, y, bin),
                                        numerics.max_bin_trajectories);
      return bin_gamma(model, used, material, config.beam, numerics)(config.bins.reference_dx);
    });
    curve.points.push_back(point);
  }
  return curve;
}

std::string curve_csv(const CoherenceCurve& curve) {
  std::ostringstream out;
  out << "Y_m,L_coh_m,w_fwhm_m,d_m,gamma_ref\n";
  for (const auto& p : curve.points)
    out << fmt_double(p.y) << ',' << fmt_double(p.l_coh) << ',' << fmt_double(p.w_fwhm) << ','
        << fmt_double(p.spacing) << ',' << fmt_double(p.gamma_ref) << '\n';
  return out.str();
}

std::string manifest_json(const ScenarioConfig& config, const ScenarioResult& result) {
  json j;
  j["manifest_version"] = 1;
  j["tool"] = "edecoh";
  j["version"] = EDECOH_VERSION;
  j["config_hash"] = result.config_hash;
  j["seed"] = config.numerics.seed;
  j["config"] = json::parse(config_to_json(config));
  j["libraries"] = {{"fftw", std::string(fftw_version)},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION}};
  j["surface_height_m"] = config.surface_present ? json(result.surface_height) : json(nullptr);
  j["transmitted_fraction"] = result.transmitted_fraction;
  auto describe = [](const CoherenceCurve& c) {
    json points = json::array();
    for (const auto& p : c.points)
      points.push_back({{"y_m", p.y},
                        {"trajectories", p.trajectories},
                        {"mean_height_m", p.mean_height},
                        {"sigma_final_m", p.sigma_final},
                        {"n_states", p.n_states},
                        {"fit_converged", p.fit_converged}});
    return json{{"model", std::string(to_string(c.model))},
                {"material", c.material_label},
                {"resistivity_ohm_m", c.resistivity},
                {"empty_bins_m", c.empty_bins},
                {"bins", points},
                {"warnings", c.warnings}};
  };
  j["curve"] = describe(result.curve);
  if (result.band_low) j["band_low"] = describe(*result.band_low);
  if (result.band_high) j["band_high"] = describe(*result.band_high);
  json artifacts = json::array();
  for (const auto& a : result.artifacts) artifacts.push_back(a.filename().string());
  j["artifacts"] = artifacts;
  return j.dump(2) + "\n";
}

ScenarioResult run_scenario(const ScenarioConfig& config, bool write_outputs) {
  in_stage("config", [&] { config.validate(); });
  ScenarioResult result;
  result.config_hash = config_hash(config);
  const auto prepared = prepare_ensemble(config);
  result.surface_height = prepared.geometry.surface_height.value_or(0.0);
  result.transmitted_fraction = prepared.ensemble.transmitted_fraction;
  result.curve = compute_curve(config, prepared, config.model, config.material);
  if (config.resistivity_band && config.model != ModelId::None) {
    MaterialSpec low = config.material, high = config.material;
    low.resistivity = config.resistivity_band->first;
    high.resistivity = config.resistivity_band->second;
    result.band_low = compute_curve(config, prepared, config.model, low);
    result.band_high = compute_curve(config, prepared, config.model, high);
  }
  if (!write_outputs) return result;

  in_stage("output", [&] {
    const fs::path dir = config.outputs.directory;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    auto emit = [&](const std::string& name, const std::string& text) {
      write_text_file(dir / name, text);
      result.artifacts.push_back(dir / name);
    };
    if (config.outputs.csv) {
      emit("curve.csv", curve_csv(result.curve));
      if (result.band_low) emit("curve_band_low.csv", curve_csv(*result.band_low));
      if (result.band_high) emit("curve_band_high.csv", curve_csv(*result.band_high));
    }
    if (config.outputs.svg) {
      auto series = [](const CoherenceCurve& c, const std::string& label,
                       const std::string& color, bool markers) {
        PlotSeries s;
        s.label = label;
        s.color = color;
        s.markers = markers;
        for (const auto& p : c.points) {
          s.x.push_back(p.y);
          s.y.push_back(p.l_coh);
        }
        return s;
      };
      std::vector<PlotSeries> all{series(result.curve, std::string(to_string(result.curve.model)),
                                         "#1f77b4", true)};
      if (result.band_low) all.push_back(series(*result.band_low, "band min rho", "#ff7f0e", false));
      if (result.band_high)
        all.push_back(series(*result.band_high, "band max rho", "#2ca02c", false));
      PlotAxes axes;
      axes.title = config.name + ": " + result.curve.material_label;
      axes.x_label = "Y above surface (um)";
      axes.y_label = "L_coh (nm)";
      axes.x_scale = 1e6;
      axes.y_scale = 1e9;
      emit("curve.svg", svg_line_plot(all, axes));
    }
    if (config.outputs.trajectory_csv) {
      write_trajectory_csv(prepared.ensemble, dir / "trajectories.csv");
      result.artifacts.push_back(dir / "trajectories.csv");
    }
    if (config.outputs.json) {
      result.artifacts.push_back(dir / "manifest.json");
      write_text_file(dir / "manifest.json", manifest_json(config, result));
    }
  });
  return result;
}

std::vector<ModelsTableRow> models_table(const ScenarioConfig& config,
                                         const std::vector<double>& ys,
                                         const std::vector<double>& dxs) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double length = config.geometry.surface_length;
  const double duration = length / config.beam.speed();
  std::vector<ModelsTableRow> rows;
  for (ModelId model : {ModelId::None, ModelId::Zurek, ModelId::Buhmann, ModelId::Howie,
                        ModelId::Machnikowski}) {
    for (double y : ys) {
      for (double dx : dxs) {
        ModelsTableRow row;
        row.model = model;
        row.y = y;
        row.dx = dx;
        row.tau = nan;
        row.probability = nan;
        try {
          const auto& m = config.material;
          const auto& o = config.model_options;
          switch (model) {
            case ModelId::None:
              row.gamma = 0.0;
              break;
            case ModelId::Zurek:
              row.tau = tau_zurek(y, dx, m);
              break;
            case ModelId::Buhmann:
              row.tau = tau_buhmann(y, dx, m, o.buhmann_sign, o.buhmann_units);
              break;
            case ModelId::Machnikowski:
              row.tau = tau_machnikowski(y, dx, m, o.machnikowski_units);
              break;
            case ModelId::Howie:
              row.probability = howie_probability(y, dx, length, m, config.beam, o.howie_eta);
              row.gamma = row.probability;
              break;
          }
          if (std::isfinite(row.tau)) row.gamma = duration / row.tau;
        } catch (const Error& e) {
          row.gamma = nan;
          row.error = e.what();
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string models_table_csv(const std::vector<ModelsTableRow>& rows) {
  std::ostringstream out;
  out << "model,y_m,dx_m,tau_s,probability,gamma,error\n";
  for (const auto& r : rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '"', '\'');
    out << to_string(r.model) << ',' << fmt_double(r.y) << ',' << fmt_double(r.dx) << ','
        << fmt_double(r.tau) << ',' << fmt_double(r.probability) << ',' << fmt_double(r.gamma)
        << ',' << error << '\n';
  }
  return out.str();
}

DetectorImage synth_image(const ScenarioConfig& config, const SynthOptions& options) {
  if (!(options.pixel_x > 0.0) || !(options.pixel_y > 0.0))
    throw ConfigError("synth: pixel sizes must be > 0");
  if (options.noise < 0.0 || options.haze < 0.0 || !(options.peak_counts > 0.0))
    throw ConfigError("synth: noise and haze must be >= 0 and peak_counts > 0");
  const auto prepared = prepare_ensemble(config);
  const auto numerics = coherence_numerics(config);
  const double bin = config.geometry.detector_bin_width;
  const ModelId model = config.surface_present ? config.model : ModelId::None;

  std::vector<double> centers;
  std::vector<FarFieldPattern> patterns;
  for (double y : config.bins.centers()) {
    auto r = in_stage("coherence", [&] {
      return pattern_for_height(y, bin, prepared.ensemble, model, config.material, config.beam,
                                config.grating, numerics);
    });
    if (!r.has_data) continue;
    centers.push_back(y);
    patterns.push_back(std::move(r.pattern));
  }
  if (patterns.empty())
    throw StageError("coherence", ErrorCategory::Numerical, "no bin holds trajectories");
  double peak = 0.0;
  for (const auto& p : patterns)
    peak = std::max(peak, *std::max_element(p.intensity.begin(), p.intensity.end()));

  const double half = (config.numerics.fit_n_max + 0.5) * expected_spacing(config);
  DetectorImage image;
  image.pixel_x = options.pixel_x;
  image.pixel_y = options.pixel_y;
  image.width = static_cast<std::size_t>(std::floor(2.0 * half / options.pixel_x)) + 1;
  const double y_lo = config.bins.y_min - 0.5 * bin;
  const double y_hi = config.bins.y_max + 0.5 * bin;
  image.height =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround((y_hi - y_lo) / options.pixel_y)));
  image.origin_x = -half;
  image.origin_y = y_lo + 0.5 * options.pixel_y;
  image.pixels.assign(image.width * image.height, 0.0);

  std::mt19937_64 rng(options.seed);
  const double mid = 0.5 * (image.row_y(0) + image.row_y(image.height - 1));
  const double shear = std::tan(options.skew);
  for (std::size_t r = 0; r < image.height; ++r) {
    const double y = image.row_y(r);
    std::size_t nearest = 0;
    for (std::size_t k = 1; k < centers.size(); ++k)
      if (std::abs(centers[k] - y) < std::abs(centers[nearest] - y)) nearest = k;
    const double shift = (y - mid) * shear;
    for (std::size_t c = 0; c < image.width; ++c) {
      const double x = image.col_x(c);
      const double u = (x - shift) / (0.5 * half);
      double v = options.peak_counts * interpolate(patterns[nearest], x - shift) / peak +
                 options.haze * options.peak_counts * std::exp(-0.5 * u * u);
      if (options.noise > 0.0)
        v += options.noise * std::sqrt(std::max(v, 0.0)) * detail::standard_normal(rng);
      image.pixels[r * image.width + c] = std::max(0.0, std::round(v));
    }
  }
  return image;
}

}  // namespace edecoh
