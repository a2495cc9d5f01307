#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edecoh/analysis.hpp"
#include "edecoh/coherence.hpp"
#include "edecoh/config.hpp"

namespace edecoh {

struct CurvePoint {
  double y = 0.0;          // bin center above the surface (m)
  double l_coh = 0.0;      // m
  double w_fwhm = 0.0;     // m
  double spacing = 0.0;    // m
  double gamma_ref = 0.0;  // bin-mean Gamma at the reference separation
  std::size_t trajectories = 0;
  double mean_height = 0.0;
  double sigma_final = 0.0;
  std::size_t n_states = 0;
  bool fit_converged = true;
};

/// L_coh(Y) for one model and material; bins without trajectories are
/// listed in empty_bins and left out of points.
struct CoherenceCurve {
  std::vector<CurvePoint> points;
  ModelId model = ModelId::None;
  std::string material_label;
  double resistivity = 0.0;
  std::vector<double> empty_bins;
  std::vector<std::string> warnings;
};

struct PreparedEnsemble {
  TrajectoryEnsemble ensemble;
  GeometrySpec geometry;  // with the surface height resolved
};

/// Samples, cuts and propagates the trajectory ensemble of a scenario.
PreparedEnsemble prepare_ensemble(const ScenarioConfig& config);

/// Per-bin pattern and fit for the given model and material; the ensemble
/// can be shared between models.
CoherenceCurve compute_curve(const ScenarioConfig& config, const PreparedEnsemble& prepared,
                             ModelId model, const MaterialSpec& material);

/// Fits one far-field pattern the way a detector line-out is fitted.
FitResult fit_pattern(const FarFieldPattern& pattern, const ScenarioConfig& config,
                      double y, std::vector<std::string>* warnings = nullptr);

struct ScenarioResult {
  CoherenceCurve curve;
  std::optional<CoherenceCurve> band_low;   // at the band's minimum resistivity
  std::optional<CoherenceCurve> band_high;  // at the band's maximum resistivity
  double surface_height = 0.0;
  double transmitted_fraction = 1.0;
  std::string config_hash;
  std::vector<std::filesystem::path> artifacts;
};

/// Whole chain; writes curve CSV, manifest JSON and SVG plot into
/// outputs.directory when write_outputs is set. Errors carry the stage name.
ScenarioResult run_scenario(const ScenarioConfig& config, bool write_outputs = true);

/// Columns Y_m,L_coh_m,w_fwhm_m,d_m,gamma_ref.
std::string curve_csv(const CoherenceCurve& curve);
std::string manifest_json(const ScenarioConfig& config, const ScenarioResult& result);

struct ModelsTableRow {
  ModelId model = ModelId::None;
  double y = 0.0;
  double dx = 0.0;
  double tau = 0.0;          // s, NaN for the probability model and None
  double probability = 0.0;  // P for a full pass, NaN for tau models
  double gamma = 0.0;        // per-pass Gamma at constant height
  std::string error;         // domain error for this cell, if any
};

std::vector<ModelsTableRow> models_table(const ScenarioConfig& config,
                                         const std::vector<double>& ys,
                                         const std::vector<double>& dxs);
/// Columns model,y_m,dx_m,tau_s,probability,gamma,error.
std::string models_table_csv(const std::vector<ModelsTableRow>& rows);

struct SynthOptions {
  double pixel_x = 1e-6;
  double pixel_y = 0.4e-6;
  double skew = 0.0;          // rad
  double noise = 0.0;         // 0 none, 1 shot-noise level
  double haze = 0.0;          // wide Gaussian background, fraction of peak
  double peak_counts = 1000.0;
  std::uint64_t seed = 1;
};

/// Detector image rendered from the per-bin patterns of a scenario: rows
/// take the pattern of the nearest bin, columns span the fitted orders.
DetectorImage synth_image(const ScenarioConfig& config, const SynthOptions& options);

}  // namespace edecoh
