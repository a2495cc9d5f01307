#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "edecoh/specs.hpp"
#include "edecoh/trajectory_record.hpp"

namespace edecoh {

/// Beamline geometry in the y-z plane. Heights are in beam coordinates with
/// the beam axis at y = 0 unless stated otherwise.
struct GeometrySpec {
  double slit_separation = 0.25;
  double grating_to_surface = 3e-3;
  double surface_length = 0.01;
  double grating_to_detector = 0.24;
  /// Raised surface edge; nullopt means no surface in the beam.
  std::optional<double> surface_height;
  double detector_bin_width = 4.8e-6;
  /// Full height of the uniform profile at the surface entrance. Defaults to
  /// divergence_y * slit_separation.
  std::optional<double> beam_height;

  double surface_to_detector() const {
    return grating_to_detector - grating_to_surface - surface_length;
  }
  double entrance_beam_height(const BeamSpec& beam) const;
  void validate() const;
};

/// Electron state at the surface entrance plane (beam coordinates).
struct InitialState {
  double y = 0.0;   // m
  double vy = 0.0;  // m/s
};

struct IntegratorSettings {
  int steps = 10000;          // velocity-Verlet steps over the surface
  int record_samples = 201;   // stored y(t) samples per trajectory
  /// Allowed energy drift |dE| / (K / y_min) for transmitted trajectories.
  double energy_tolerance = 1e-2;
};

struct TrajectoryEnsemble {
  std::vector<TrajectoryRecord> records;
  std::uint64_t seed = 0;
  double transmitted_fraction = 0.0;
  double surface_height = 0.0;
};

/// Uniform entrance heights over the beam height and uniform angles over the
/// full y divergence. Identical seeds give bit-identical samples.
std::vector<InitialState> sample_initial_conditions(const BeamSpec& beam,
                                                    const GeometrySpec& geometry,
                                                    std::size_t count,
                                                    std::uint64_t seed);

/// e^2 / (16 pi eps0 m): y'' = -K / y^2 above a grounded plane.
double image_charge_strength();

/// Integrates one trajectory over the surface and free flight to the
/// detector. Throws NumericalError when the energy audit fails.
TrajectoryRecord propagate_over_surface(const InitialState& state,
                                        const GeometrySpec& geometry,
                                        const BeamSpec& beam, bool image_charge,
                                        const IntegratorSettings& settings = {});

TrajectoryEnsemble build_ensemble(const std::vector<InitialState>& states,
                                  const GeometrySpec& geometry,
                                  const BeamSpec& beam, bool image_charge,
                                  const IntegratorSettings& settings,
                                  std::uint64_t seed);

/// Surface height (beam coordinates) at which target_fraction of the given
/// electrons reach the detector, to within 0.01. Throws NumericalError when
/// the target is outside what the search bounds can reach.
double find_cut_height(const std::vector<InitialState>& states,
                       const GeometrySpec& geometry, const BeamSpec& beam,
                       bool image_charge, double target_fraction,
                       const IntegratorSettings& settings = {});

struct Histogram {
  double start = 0.0;
  double bin_width = 0.0;
  std::vector<double> counts;

  double center(std::size_t i) const { return start + (i + 0.5) * bin_width; }
};

/// Detector positions of transmitted electrons. When no range is given the
/// histogram spans the occupied interval.
Histogram detector_histogram(const TrajectoryEnsemble& ensemble, double bin_width,
                             std::optional<std::pair<double, double>> range = {});

/// Columns: entrance_height_m,entrance_vy_m_s,absorbed,detector_y_m
void write_trajectory_csv(const TrajectoryEnsemble& ensemble,
                          const std::filesystem::path& path);

}  // namespace edecoh
