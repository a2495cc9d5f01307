#include "edecoh/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "edecoh/constants.hpp"
#include "edecoh/errors.hpp"

namespace edecoh {

namespace c = constants;

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw DomainError(std::string(name) + " must be finite and > 0, got " +
                      std::to_string(value));
}

double thermal_energy(const MaterialSpec& m) { return c::boltzmann * m.temperature; }

double howie_eta(double y, double dx, HowieEta convention) {
  return convention == HowieEta::QuarterRatio ? y / (4.0 * dx) : 4.0 * y / dx;
}

// e^2 w_m^2 / (4 pi^2 hbar sigma v^2): the aloof-scattering exponent per unit
// path length divided by E1.
double howie_prefactor_per_length(const MaterialSpec& m, const BeamSpec& beam) {
  const double v = beam.speed();
  const double e2 = c::elementary_charge * c::elementary_charge;
  const double wm = c::howie_cutoff_frequency;
  return e2 * wm * wm / (4.0 * c::pi * c::pi * c::hbar * m.conductivity() * v * v);
}

}  // namespace

std::string_view to_string(ModelId id) {
  switch (id) {
    case ModelId::None: return "none";
    case ModelId::Zurek: return "zurek";
    case ModelId::Buhmann: return "buhmann";
    case ModelId::Howie: return "howie";
    case ModelId::Machnikowski: return "machnikowski";
  }
  return "unknown";
}

ModelId parse_model_id(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (ModelId id : {ModelId::None, ModelId::Zurek, ModelId::Buhmann,
                     ModelId::Howie, ModelId::Machnikowski}) {
    if (lower == to_string(id)) return id;
  }
  if (lower == "scheel-buhmann" || lower == "scheel_buhmann") return ModelId::Buhmann;
  throw ConfigError("unknown model id '" + std::string(name) +
                    "' (expected none|zurek|buhmann|howie|machnikowski)");
}

double thermal_de_broglie(double temperature, double mass) {
  require_positive(temperature, "temperature");
  require_positive(mass, "mass");
  return c::planck / std::sqrt(2.0 * c::pi * mass * c::boltzmann * temperature);
}

double tau_zurek(double y, double dx, const MaterialSpec& material) {
  require_positive(y, "y");
  require_positive(dx, "dx");
  const double e2 = c::elementary_charge * c::elementary_charge;
  const double prefactor = 4.0 * c::hbar * c::hbar /
                           (c::pi * e2 * thermal_energy(material) * material.resistivity);
  return prefactor * y * y * y / (dx * dx);
}

double tau_buhmann(double y, double dx, const MaterialSpec& material,
                   BuhmannSign sign, PrefactorUnits units) {
  require_positive(y, "y");
  require_positive(dx, "dx");
  const double two_y = 2.0 * y;
  double radicand = two_y * two_y + dx * dx;
  if (sign == BuhmannSign::AsPrinted) {
    radicand = two_y * two_y - dx * dx;
    if (!(radicand > 0.0))
      throw DomainError("buhmann (as printed): dx must be < 2y");
  }
  // 1/(2y) - 1/sqrt(r) written to avoid cancellation for dx << y:
  // (sqrt(r) - 2y) / (2y sqrt(r)) with sqrt(r) - 2y = (r - 4y^2)/(sqrt(r) + 2y).
  const double root = std::sqrt(radicand);
  const double bracket =
      std::abs((radicand - two_y * two_y) / (root + two_y)) / (two_y * root);
  const double permittivity =
      units == PrefactorUnits::Consistent ? 1.0 / (4.0 * c::pi) : c::vacuum_permittivity;
  const double e2 = c::elementary_charge * c::elementary_charge;
  const double prefactor = c::pi * permittivity * c::hbar * c::hbar /
                           (e2 * thermal_energy(material) * material.resistivity);
  return prefactor / bracket;
}

double howie_probability(double y, double dx, double path_length,
                         const MaterialSpec& material, const BeamSpec& beam,
                         HowieEta eta) {
  require_positive(y, "y");
  require_positive(dx, "dx");
  require_positive(path_length, "path_length");
  return path_length * howie_prefactor_per_length(material, beam) *
         expint(howie_eta(y, dx, eta));
}

double tau_machnikowski(double y, double dx, const MaterialSpec& material,
                        PrefactorUnits units) {
  require_positive(y, "y");
  require_positive(dx, "dx");
  if (!material.fermi_wavevector)
    throw ConfigError("machnikowski model needs material.fermi_wavevector ('" +
                      material.label + "')");
  const double hbar_power = units == PrefactorUnits::Consistent
                                ? c::hbar * c::hbar * c::hbar
                                : c::hbar * c::hbar;
  const double e2 = c::elementary_charge * c::elementary_charge;
  const double prefactor = 32.0 * c::vacuum_permittivity * hbar_power *
                           *material.fermi_wavevector /
                           (c::pi * e2 * c::electron_mass * thermal_energy(material));
  const double ratio = y / dx;
  return prefactor * ratio * ratio;
}

double expint(double eta) {
  require_positive(eta, "eta");
  if (eta > 80.0) {
    // e^(7.7 eta) overflows near eta = 92.
    return std::exp(-eta) / eta * (1.0 - 1.0 / eta);
  }
  const double a = std::log((0.56146 / eta + 0.65) * (1.0 + eta));
  const double b = std::pow(eta, 4) * std::exp(7.7 * eta) * std::pow(2.0 + eta, 3.7);
  return std::pow(std::pow(a, -7.7) + b, -0.13);
}

double expint_oracle(double eta) {
  require_positive(eta, "eta");
  // E1(eta) = e^-eta * int_0^inf e^-t / (eta + t) dt
  boost::math::quadrature::exp_sinh<double> integrator;
  const double tail = integrator.integrate(
      [eta](double t) { return std::exp(-t) / (eta + t); }, 0.0,
      std::numeric_limits<double>::infinity(), 1e-13);
  return std::exp(-eta) * tail;
}

double decoherence_rate(ModelId model, double y, double dx,
                        const MaterialSpec& material, const BeamSpec& beam,
                        const ModelOptions& options) {
  if (dx == 0.0 || model == ModelId::None) return 0.0;
  switch (model) {
    case ModelId::Zurek:
      return 1.0 / tau_zurek(y, dx, material);
    case ModelId::Buhmann:
      return 1.0 / tau_buhmann(y, dx, material, options.buhmann_sign,
                               options.buhmann_units);
    case ModelId::Machnikowski:
      return 1.0 / tau_machnikowski(y, dx, material, options.machnikowski_units);
    case ModelId::Howie: {
      require_positive(y, "y");
      require_positive(dx, "dx");
      return howie_prefactor_per_length(material, beam) * beam.speed() *
             expint(howie_eta(y, dx, options.howie_eta));
    }
    case ModelId::None:
      break;
  }
  return 0.0;
}

double gamma_for_separation(ModelId model, const TrajectoryRecord& trajectory,
                            double dx, const MaterialSpec& material,
                            const BeamSpec& beam, const ModelOptions& options) {
  if (dx < 0.0) throw DomainError("dx must be >= 0");
  if (trajectory.absorbed) return std::numeric_limits<double>::infinity();
  if (model == ModelId::None || dx == 0.0) return 0.0;
  const auto& t = trajectory.time;
  const auto& y = trajectory.height;
  if (t.size() < 2 || t.size() != y.size())
    throw DomainError("trajectory record needs >= 2 matching time/height samples");

  double gamma = 0.0;
  double previous = decoherence_rate(model, y[0], dx, material, beam, options);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double current = decoherence_rate(model, y[i], dx, material, beam, options);
    gamma += 0.5 * (previous + current) * (t[i] - t[i - 1]);
    previous = current;
  }
  return gamma;
}

}  // namespace edecoh
