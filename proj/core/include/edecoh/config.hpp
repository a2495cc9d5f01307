#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edecoh/analysis.hpp"
#include "edecoh/coherence.hpp"
#include "edecoh/models.hpp"
#include "edecoh/specs.hpp"
#include "edecoh/trajectory.hpp"

namespace edecoh {

/// Detector-height bins, measured from the surface plane.
struct BinSpec {
  double y_min = 0.0;
  double y_max = 20e-6;
  int count = 21;
  double reference_dx = 600e-9;  // separation for the gamma_ref column

  std::vector<double> centers() const;
};

struct NumericsSpec {
  std::size_t trajectories = 20000;
  std::uint64_t seed = 1;
  IntegratorSettings integrator;
  CoherenceNumerics coherence;
  int fit_n_max = 4;
  bool global_spacing = false;
};

struct OutputSpec {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool svg = true;
  bool trajectory_csv = false;
};

struct ScenarioConfig {
  std::string name = "scenario";
  BeamSpec beam;
  GeometrySpec geometry;
  bool surface_present = true;
  bool image_charge = true;
  double transmitted_fraction = 1.0 / 3.0;
  GratingSpec grating;
  /// Defaults to geometry.grating_to_detector.
  std::optional<double> camera_length;
  MaterialSpec material;
  /// Resistivity extremes (Ohm m) for envelope curves.
  std::optional<std::pair<double, double>> resistivity_band;
  ModelId model = ModelId::Zurek;
  ModelOptions model_options;
  BinSpec bins;
  NumericsSpec numerics;
  OutputSpec outputs;

  double effective_camera_length() const {
    return camera_length ? *camera_length : geometry.grating_to_detector;
  }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses a scenario or a run manifest (its embedded config). Unknown keys,
/// wrong types and out-of-range values raise ConfigError.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Fully resolved config with every default written out, keys sorted.
std::string config_to_json(const ScenarioConfig& config, int indent = 2);

/// FNV-1a 64 of the compact resolved config, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

/// Named starting points: "silicon", "gold", "baseline" (no surface).
ScenarioConfig preset_config(const std::string& name);

}  // namespace edecoh
