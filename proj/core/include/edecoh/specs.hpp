#pragma once

#include <optional>
#include <string>

namespace edecoh {

/// Electrical and thermal properties of the decohering surface.
struct MaterialSpec {
  double resistivity = 0.1;  // Ohm m
  std::optional<double> fermi_wavevector;  // 1/m, only needed by Machnikowski
  double temperature = 300.0;  // K
  std::string label = "silicon";

  double conductivity() const { return 1.0 / resistivity; }

  /// Throws ConfigError unless every physical field is strictly positive.
  void validate() const;

  /// n-doped silicon; resistivity given in Ohm cm as quoted for wafers.
  static MaterialSpec silicon(double resistivity_ohm_cm = 10.0);
  /// Gold at 2.2e-6 Ohm cm with the free-electron Fermi wave-vector.
  static MaterialSpec gold();
};

/// Free-electron Fermi wave-vector (3 pi^2 n)^(1/3) for a carrier density n.
double free_electron_fermi_wavevector(double electron_density);

/// Conduction-electron density of gold, one electron per atom (1/m^3).
inline constexpr double gold_electron_density = 5.90e28;

/// Electron beam kinematics. Wavelength and speed are derived from the
/// kinetic energy with the relativistic momentum.
struct BeamSpec {
  double kinetic_energy_ev = 1670.0;
  double divergence_x = 61e-6;   // rad, full geometric divergence
  double divergence_y = 120e-6;  // rad
  /// FWHM of the initial coherence function along x1 - x2. When unset the
  /// geometric estimate wavelength / divergence_x is used.
  std::optional<double> coherence_width;
  /// FWHM of the density matrix along the sum coordinate x1 + x2.
  double spatial_width = 3e-6;

  double de_broglie_wavelength() const;
  double speed() const;
  double momentum() const;
  double initial_coherence_width() const;

  void validate() const;
};

}  // namespace edecoh
