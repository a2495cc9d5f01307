#include "edecoh/specs.hpp"

#include <cmath>

#include "edecoh/constants.hpp"
#include "edecoh/errors.hpp"
#include "edecoh/trajectory_record.hpp"

namespace edecoh {

namespace c = constants;

void MaterialSpec::validate() const {
  if (!(resistivity > 0.0) || !std::isfinite(resistivity))
    throw ConfigError("material '" + label + "': resistivity must be > 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("material '" + label + "': temperature must be > 0");
  if (fermi_wavevector && !(*fermi_wavevector > 0.0))
    throw ConfigError("material '" + label + "': fermi_wavevector must be > 0");
}

MaterialSpec MaterialSpec::silicon(double resistivity_ohm_cm) {
  MaterialSpec m;
  m.resistivity = resistivity_ohm_cm * 1e-2;
  m.label = "silicon";
  return m;
}

MaterialSpec MaterialSpec::gold() {
  MaterialSpec m;
  m.resistivity = 2.2e-8;
  m.fermi_wavevector = free_electron_fermi_wavevector(gold_electron_density);
  m.label = "gold";
  return m;
}

double free_electron_fermi_wavevector(double electron_density) {
  if (!(electron_density > 0.0))
    throw DomainError("electron density must be > 0");
  return std::cbrt(3.0 * c::pi * c::pi * electron_density);
}

double BeamSpec::momentum() const {
  const double energy = kinetic_energy_ev * c::elementary_charge;
  const double rest = c::electron_mass * c::speed_of_light * c::speed_of_light;
  return std::sqrt(energy * energy + 2.0 * energy * rest) / c::speed_of_light;
}

double BeamSpec::de_broglie_wavelength() const { return c::planck / momentum(); }

double BeamSpec::speed() const {
  const double energy = kinetic_energy_ev * c::elementary_charge;
  const double rest = c::electron_mass * c::speed_of_light * c::speed_of_light;
  return momentum() * c::speed_of_light * c::speed_of_light / (energy + rest);
}

double BeamSpec::initial_coherence_width() const {
  if (coherence_width) return *coherence_width;
  return de_broglie_wavelength() / divergence_x;
}

void BeamSpec::validate() const {
  if (!(kinetic_energy_ev > 0.0))
    throw ConfigError("beam: kinetic_energy_ev must be > 0");
  if (!(divergence_x >= 0.0) || !(divergence_y >= 0.0))
    throw ConfigError("beam: divergences must be >= 0");
  if (!coherence_width && !(divergence_x > 0.0))
    throw ConfigError("beam: coherence_width is required when divergence_x is 0");
  if (!(initial_coherence_width() > 0.0))
    throw ConfigError("beam: initial coherence width must be > 0");
  if (!(spatial_width > 0.0))
    throw ConfigError("beam: spatial_width must be > 0");
}

TrajectoryRecord TrajectoryRecord::constant_height(double height, double duration,
                                                   double speed, int samples) {
  if (samples < 2) samples = 2;
  TrajectoryRecord r;
  r.time.resize(samples);
  r.height.assign(samples, height);
  r.z.resize(samples);
  for (int i = 0; i < samples; ++i) {
    r.time[i] = duration * i / (samples - 1);
    r.z[i] = speed * r.time[i];
  }
  r.entrance_height = height;
  r.min_height = height;
  r.detector_y = height;
  return r;
}

}  // namespace edecoh
