#pragma once

// CODATA 2018 values, SI units.
namespace edecoh::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double electron_mass = 9.1093837015e-31;      // kg
inline constexpr double planck = 6.62607015e-34;               // J s
inline constexpr double hbar = 1.054571817e-34;                // J s
inline constexpr double boltzmann = 1.380649e-23;              // J/K
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double speed_of_light = 299792458.0;          // m/s

/// Upper cutoff of the long-wavelength surface excitations in the aloof
/// scattering model. Used numerically as an angular frequency (1/s).
inline constexpr double howie_cutoff_frequency = 0.6e12;

/// 2 sqrt(2 ln 2): FWHM of a Gaussian in units of its standard deviation.
inline constexpr double fwhm_per_sigma = 2.3548200450309493;

}  // namespace edecoh::constants
