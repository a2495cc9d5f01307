#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "edecoh/models.hpp"
#include "edecoh/specs.hpp"
#include "edecoh/trajectory.hpp"

namespace edecoh {

/// Uniform sample positions start + i * step.
struct Axis {
  double start = 0.0;
  double step = 1.0;
  std::size_t size = 0;

  double at(std::size_t i) const { return start + static_cast<double>(i) * step; }
  double back() const { return at(size - 1); }
  /// Odd-sized axis symmetric about center.
  static Axis centered(double center, double half_span, std::size_t points);
};

/// Transverse density matrix on independent sum/difference axes,
/// S = x1 + x2 and D = x1 - x2, stored row-major as rho(S_i, D_j). The
/// widths below are standard deviations in these coordinates, so a pure
/// Gaussian state has sigma_sum == sigma_diff.
struct DensityMatrixGrid {
  Axis sum;
  Axis diff;
  std::vector<double> values;
  double center = 0.0;       // S of the diagonal peak
  double sigma_sum = 0.0;    // source width along S
  double sigma_diff = 0.0;   // initial coherence width along D

  double& operator()(std::size_t i, std::size_t j) { return values[i * diff.size + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return values[i * diff.size + j];
  }
  /// Index of D = 0; the diff axis is always odd and centered.
  std::size_t zero_diff() const { return diff.size / 2; }
  std::size_t center_sum() const;
  /// Integral of rho(x, x) dx with x = S / 2.
  double trace() const;
  /// rho(x_a, x_b) on the lattice x = k * step for |k| <= m where the S and D
  /// axes share the step and are centered on zero; m = (size - 1) / 4.
  std::vector<double> pair_matrix(std::size_t& dimension) const;
};

struct DensityGridSpec {
  std::size_t sum_points = 65;
  std::size_t diff_points = 257;
  /// Zero selects 6 sigma of the respective Gaussian.
  double sum_half_span = 0.0;
  double diff_half_span = 0.0;
};

/// Gaussian-Schell source: spatial FWHM beam.spatial_width along S and
/// coherence FWHM beam.initial_coherence_width() along D, trace one.
/// Throws ConfigError when the coherence width exceeds the spatial width.
DensityMatrixGrid initial_density_matrix(const BeamSpec& beam,
                                         const DensityGridSpec& grid = {});

/// Multiplies every element by exp(-gamma(|D|)).
DensityMatrixGrid apply_decoherence(const DensityMatrixGrid& rho,
                                    const std::function<double(double)>& gamma);

/// Gamma from a single trajectory. Throws DomainError for absorbed paths.
DensityMatrixGrid apply_decoherence(const DensityMatrixGrid& rho, ModelId model,
                                    const TrajectoryRecord& trajectory,
                                    const MaterialSpec& material, const BeamSpec& beam,
                                    const ModelOptions& options = {});

struct WidthFit {
  double sigma = 0.0;             // fitted standard deviation along D
  double relative_residual = 0.0; // rms residual / peak
  bool shape_mismatch = false;
  std::string warning;
};

/// Gaussian least-squares fit along D through the diagonal peak. The
/// result is clamped to sigma_diff.
WidthFit extract_offdiagonal_width(const DensityMatrixGrid& rho,
                                   double mismatch_threshold = 1e-2);

struct PureState {
  double weight = 0.0;
  double center = 0.0;  // x_n
};

/// psi_n(x) = (2 / (pi width^2))^(1/4) exp(-(x - x_n)^2 / width^2).
struct PureStateSet {
  std::vector<PureState> states;
  double width = 0.0;         // common sigma in S/D coordinates
  double sigma_env = 0.0;     // envelope of the S_n = 2 x_n
  double reconstruction_error = 0.0;  // max-norm along S, relative to peak
  double grid_mismatch = 0.0;         // vs. the sampled matrix, relative to peak
};

/// Pure-state count that keeps the center spacing at half the state width.
std::size_t required_pure_states(double sigma_env, double width);

/// Splits a Gaussian-Schell matrix with coherence width `width` into pure
/// states; throws NumericalError when the reconstruction misses `tolerance`.
PureStateSet decompose(const DensityMatrixGrid& rho, double width,
                       std::size_t n_states, double tolerance = 1e-3);
PureStateSet decompose(const DensityMatrixGrid& rho, std::size_t n_states,
                       double tolerance = 1e-3);

struct GratingSpec {
  double period = 100e-9;
  double open_fraction = 0.5;
  std::size_t min_points_per_period = 16;

  void validate() const;
};

struct Wavefunction {
  Axis x;
  std::vector<std::complex<double>> values;

  double norm() const;  // sum |psi|^2 dx
};

/// Samples psi_n on a window of `points` lattice sites k * step around x_n.
Wavefunction pure_state_wavefunction(double center, double width, double step,
                                     std::size_t points);

/// Binary transmission: open on [0, open_fraction) of every period measured
/// from x = 0. Throws NumericalError when the grid under-resolves the period.
Wavefunction grating_transmit(const Wavefunction& psi, const GratingSpec& grating);

/// Detector intensity I(X) = |F(f)|^2 / (wavelength * L) at X = wavelength L f,
/// so sum I dX equals the input norm.
struct FarFieldPattern {
  Axis x;
  std::vector<double> intensity;
  double camera_length = 0.0;

  double total() const;  // sum I dX
};

/// Throws NumericalError when the edges of the spatial or frequency window
/// carry more than edge_tolerance of the peak.
FarFieldPattern far_field(const Wavefunction& psi, double camera_length,
                          double wavelength, double edge_tolerance = 1e-4);

struct FarFieldNumerics {
  std::size_t points_per_period = 256;
  double span_factor = 64.0;   // window = span_factor * max(width, period)
  double camera_length = 0.24;
  double edge_tolerance = 1e-4;
};

/// Lattice step min(a / points_per_period, width / 128) and a power-of-two
/// window of span_factor * max(width, a). A slit edge cutting a narrow state
/// leaves a 1/k^2 tail whose Nyquist level scales as (step / width)^2.
struct FarFieldGrid {
  double step = 0.0;
  std::size_t points = 0;
};
FarFieldGrid far_field_grid(double width, const GratingSpec& grating,
                            const FarFieldNumerics& numerics);

/// Weighted incoherent sum of the grating-transmitted pure states, reduced
/// in state order.
FarFieldPattern incoherent_pattern(const PureStateSet& states,
                                   const GratingSpec& grating, double wavelength,
                                   const FarFieldNumerics& numerics = {});

enum class GammaAveraging {
  MeanGamma,     // exp(-<Gamma>)
  MeanExponent,  // <exp(-Gamma)>
};

struct CoherenceNumerics {
  DensityGridSpec grid;
  FarFieldNumerics far_field;
  std::size_t n_states = 64;
  /// Raise n_states to required_pure_states when it is too small.
  bool auto_states = true;
  double reconstruction_tolerance = 1e-3;
  std::size_t max_bin_trajectories = 200;
  GammaAveraging averaging = GammaAveraging::MeanGamma;
  /// Log-suppression at which the D window is cut.
  double diff_cutoff = 18.0;
  ModelOptions model_options;
};

/// Per-bin decoherence exponent as a function of |D|.
std::function<double(double)> bin_gamma(ModelId model,
                                        const std::vector<const TrajectoryRecord*>& paths,
                                        const MaterialSpec& material,
                                        const BeamSpec& beam,
                                        const CoherenceNumerics& numerics);

struct PatternResult {
  bool has_data = false;
  FarFieldPattern pattern;
  std::size_t trajectories = 0;       // transmitted paths landing in the bin
  std::size_t used_trajectories = 0;  // paths entering the Gamma average
  double mean_height = 0.0;           // time-averaged height of used paths
  double sigma_initial = 0.0;
  double sigma_final = 0.0;
  std::size_t n_states = 0;
  double reconstruction_error = 0.0;
  std::vector<std::string> warnings;
};

/// Transmitted records with detector_y in [Y - bin/2, Y + bin/2].
std::vector<const TrajectoryRecord*> paths_in_bin(const TrajectoryEnsemble& ensemble,
                                                  double detector_y, double bin_width);

/// Every k-th path so that at most `limit` remain, k = ceil(size / limit).
std::vector<const TrajectoryRecord*> subsample_paths(
    const std::vector<const TrajectoryRecord*>& paths, std::size_t limit);

/// Full chain for one detector-height bin. has_data is false for an empty bin.
PatternResult pattern_for_height(double detector_y, double bin_width,
                                 const TrajectoryEnsemble& ensemble, ModelId model,
                                 const MaterialSpec& material, const BeamSpec& beam,
                                 const GratingSpec& grating,
                                 const CoherenceNumerics& numerics = {});

}  // namespace edecoh
