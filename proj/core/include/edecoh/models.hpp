#pragma once

#include <string>
#include <string_view>

#include "edecoh/specs.hpp"
#include "edecoh/trajectory_record.hpp"

namespace edecoh {

enum class ModelId { None, Zurek, Buhmann, Howie, Machnikowski };

std::string_view to_string(ModelId id);
/// Case-insensitive; throws ConfigError on unknown names.
ModelId parse_model_id(std::string_view name);

/// Sign under the square root of the macroscopic-QED bracket.
enum class BuhmannSign {
  Plus,       // (2y)^2 + dx^2: positive and defined for every dx
  AsPrinted,  // (2y)^2 - dx^2: requires dx < 2y, absolute value of bracket
};

/// How dimensionally inconsistent prefactors are evaluated.
///
/// The macroscopic-QED time carries a vacuum permittivity that leaves the
/// printed expression about 4 pi^2 eps0 ~ 3.5e-10 times the image-charge
/// Ohmic time; Consistent replaces eps0 by the Gaussian-unit 1/(4 pi), which
/// restores seconds and agrees with the Ohmic time up to a factor pi for
/// dx << y. The electron-gas time as printed has units of 1/J; Consistent
/// carries hbar^3 instead of hbar^2, which yields seconds.
enum class PrefactorUnits { Consistent, AsPrinted };

/// Argument of the aloof-scattering exponential integral.
enum class HowieEta {
  QuarterRatio,  // y / (4 dx)
  FourRatio,     // 4 y / dx, sensitivity studies only
};

struct ModelOptions {
  BuhmannSign buhmann_sign = BuhmannSign::Plus;
  PrefactorUnits buhmann_units = PrefactorUnits::Consistent;
  PrefactorUnits machnikowski_units = PrefactorUnits::Consistent;
  HowieEta howie_eta = HowieEta::QuarterRatio;
};

/// h / sqrt(2 pi m k_B T).
double thermal_de_broglie(double temperature, double mass);

/// Ohmic image-charge decoherence time (s).
double tau_zurek(double y, double dx, const MaterialSpec& material);

/// Macroscopic-QED decoherence time (s, see PrefactorUnits).
double tau_buhmann(double y, double dx, const MaterialSpec& material,
                   BuhmannSign sign = BuhmannSign::Plus,
                   PrefactorUnits units = PrefactorUnits::Consistent);

/// Aloof-scattering exponent P for a straight pass of length path_length at
/// height y. The coherence suppression factor is exp(-P).
double howie_probability(double y, double dx, double path_length,
                         const MaterialSpec& material, const BeamSpec& beam,
                         HowieEta eta = HowieEta::QuarterRatio);

/// Electron-gas image-formation decoherence time (s, see PrefactorUnits).
double tau_machnikowski(double y, double dx, const MaterialSpec& material,
                        PrefactorUnits units = PrefactorUnits::Consistent);

/// E1(eta) = -Ei(-eta) via the closed-form interpolation
/// (A^-7.7 + B)^-0.13, with the two-term asymptotic series above eta = 80.
double expint(double eta);

/// E1(eta) by adaptive quadrature to ~1e-10 relative. Reference only.
double expint_oracle(double eta);

/// Instantaneous decoherence rate d(Gamma)/dt at height y (1/s). For the
/// aloof-scattering model this is P * v / L, independent of L.
double decoherence_rate(ModelId model, double y, double dx,
                        const MaterialSpec& material, const BeamSpec& beam,
                        const ModelOptions& options = {});

/// Gamma(dx) = integral of the decoherence rate along the recorded path.
/// Returns +infinity for absorbed trajectories and 0 for dx == 0.
double gamma_for_separation(ModelId model, const TrajectoryRecord& trajectory,
                            double dx, const MaterialSpec& material,
                            const BeamSpec& beam,
                            const ModelOptions& options = {});

}  // namespace edecoh
