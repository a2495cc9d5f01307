#include "edecoh/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "edecoh/constants.hpp"
#include "edecoh/errors.hpp"
#include "edecoh/parallel.hpp"
#include "random.hpp"

namespace edecoh {

namespace c = constants;

namespace {

struct FlightTimes {
  double over_surface;
  double to_detector;
};

FlightTimes flight_times(const GeometrySpec& g, const BeamSpec& beam) {
  const double v = beam.speed();
  return {g.surface_length / v, g.surface_to_detector() / v};
}

// Electrons closer than this to the surface are captured.
constexpr double kCaptureHeight = 1e-9;

using PlaneState = std::array<double, 2>;  // {y, vy}

// Outer step near the surface, where a fixed step cannot follow the 1/y^2
// force: error-controlled Dormand-Prince at 1e-12 relative tolerance.
bool advance_adaptive(double& y, double& vy, double strength, double dt) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<PlaneState>>(1e-22, 1e-12);
  auto rhs = [strength](const PlaneState& s, PlaneState& ds, double) {
    ds[0] = s[1];
    ds[1] = -strength / (s[0] * s[0]);
  };
  PlaneState state{y, vy};
  double t = 0.0;
  double h = 0.01 * y / (std::abs(vy) + std::sqrt(strength / y));
  for (int guard = 0; t < dt; ++guard) {
    if (guard > 10000000) throw NumericalError("near-surface integration did not finish");
    h = std::min(h, dt - t);
    const PlaneState before = state;
    const double t_before = t;
    if (stepper.try_step(rhs, state, t, h) == ode::fail) continue;
    if (!(state[0] > kCaptureHeight)) {
      state = before;
      t = t_before;
      y = 0.0;
      return false;
    }
  }
  y = state[0];
  vy = state[1];
  return true;
}

// One outer step of length dt. Velocity Verlet unless the step would move
// more than 1% of the height. Returns false on capture. `a` carries the
// acceleration between calls.
bool advance(double& y, double& vy, double& a, double strength, double dt) {
  const double limit = 0.01 * y / (std::abs(vy) + std::sqrt(strength / y));
  if (dt > limit) {
    if (!advance_adaptive(y, vy, strength, dt)) return false;
    a = -strength / (y * y);
    return true;
  }
  const double half = vy + 0.5 * dt * a;
  y += dt * half;
  if (!(y > kCaptureHeight)) return false;
  a = -strength / (y * y);
  vy = half + 0.5 * dt * a;
  return true;
}

// Crash test without a record, used by the cut-height search.
bool survives(double y, double vy, double strength, double duration, int steps) {
  if (!(y > 0.0)) return false;
  if (strength == 0.0) return y + vy * duration > 0.0;
  if (!(y > kCaptureHeight)) return false;
  const double dt = duration / steps;
  double a = -strength / (y * y);
  for (int i = 0; i < steps; ++i)
    if (!advance(y, vy, a, strength, dt)) return false;
  return true;
}

// Smallest entrance height above the plane that survives with this vy.
double critical_height(double vy, double strength, double duration, int steps) {
  double lo = 0.0;
  double hi = std::max(0.0, -vy * duration) + 5e-6;
  while (!survives(hi, vy, strength, duration, steps)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1.0) throw NumericalError("critical height search diverged");
  }
  for (int i = 0; i < 60 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (survives(mid, vy, strength, duration, steps) ? hi : lo) = mid;
  }
  return hi;
}

double transmitted_fraction(const std::vector<InitialState>& states, double height,
                            double strength, double duration, int steps) {
  std::vector<unsigned char> ok(states.size());
  parallel_for(states.size(), [&](std::size_t i) {
    ok[i] = survives(states[i].y - height, states[i].vy, strength, duration, steps);
  });
  return static_cast<double>(std::count(ok.begin(), ok.end(), 1)) /
         static_cast<double>(states.size());
}

}  // namespace

double GeometrySpec::entrance_beam_height(const BeamSpec& beam) const {
  return beam_height ? *beam_height : beam.divergence_y * slit_separation;
}

void GeometrySpec::validate() const {
  for (auto [value, name] : {std::pair{slit_separation, "slit_separation"},
                             {grating_to_surface, "grating_to_surface"},
                             {surface_length, "surface_length"},
                             {grating_to_detector, "grating_to_detector"},
                             {detector_bin_width, "detector_bin_width"}}) {
    if (!(value > 0.0) || !std::isfinite(value))
      throw ConfigError(std::string("geometry: ") + name + " must be > 0");
  }
  if (!(surface_to_detector() > 0.0))
    throw ConfigError(
        "geometry: grating_to_surface + surface_length must be < grating_to_detector");
  if (beam_height && !(*beam_height >= 0.0))
    throw ConfigError("geometry: beam_height must be >= 0");
  if (surface_height && !std::isfinite(*surface_height))
    throw ConfigError("geometry: surface_height must be finite");
}

std::vector<InitialState> sample_initial_conditions(const BeamSpec& beam,
                                                    const GeometrySpec& geometry,
                                                    std::size_t count,
                                                    std::uint64_t seed) {
  if (count == 0) throw DomainError("sample_initial_conditions: count must be >= 1");
  const double height = geometry.entrance_beam_height(beam);
  const double v = beam.speed();
  std::mt19937_64 rng(seed);
  std::vector<InitialState> states(count);
  for (auto& s : states) {
    s.y = (detail::unit_uniform(rng) - 0.5) * height;
    s.vy = (detail::unit_uniform(rng) - 0.5) * beam.divergence_y * v;
  }
  return states;
}

double image_charge_strength() {
  return c::elementary_charge * c::elementary_charge /
         (16.0 * c::pi * c::vacuum_permittivity * c::electron_mass);
}

TrajectoryRecord propagate_over_surface(const InitialState& state,
                                        const GeometrySpec& geometry,
                                        const BeamSpec& beam, bool image_charge,
                                        const IntegratorSettings& settings) {
  if (settings.steps < 1) throw ConfigError("integrator steps must be >= 1");
  const double v = beam.speed();
  const auto [duration, free_flight] = flight_times(geometry, beam);
  const int steps = settings.steps;
  const int samples = std::clamp(settings.record_samples, 2, steps + 1);
  const double dt = duration / steps;
  const double strength =
      image_charge && geometry.surface_height ? image_charge_strength() : 0.0;
  const double y0 = state.y - geometry.surface_height.value_or(0.0);

  TrajectoryRecord r;
  r.entrance_height = y0;
  r.entrance_vy = state.vy;
  r.time.reserve(samples);
  r.height.reserve(samples);
  r.z.reserve(samples);
  auto record = [&](int step, double y) {
    const double t = step * dt;
    r.time.push_back(t);
    r.height.push_back(y);
    r.z.push_back(v * t);
  };

  if (geometry.surface_height && !(y0 > 0.0)) {
    r.absorbed = true;
    r.min_height = y0;
    r.exit_vy = state.vy;
    r.detector_y = std::numeric_limits<double>::quiet_NaN();
    return r;
  }

  double y = y0;
  double vy = state.vy;
  double min_height = y0;
  int next_sample = 1;
  auto sample_step = [&](int j) {
    return static_cast<int>((static_cast<long long>(j) * steps) / (samples - 1));
  };
  record(0, y);

  if (strength == 0.0) {
    // Exact free flight; the sampled heights are linear in t.
    for (int j = 1; j < samples; ++j) {
      const int step = sample_step(j);
      const double yj = y0 + state.vy * (step * dt);
      if (geometry.surface_height && !(yj > 0.0)) {
        r.absorbed = true;
        break;
      }
      record(step, yj);
      min_height = std::min(min_height, yj);
    }
    y = y0 + state.vy * duration;
    if (geometry.surface_height && !(y > 0.0)) r.absorbed = true;
    r.min_height = std::min(min_height, y);
  } else {
    double a = -strength / (y * y);
    r.absorbed = !(y > kCaptureHeight);
    for (int i = 1; i <= steps && !r.absorbed; ++i) {
      if (!advance(y, vy, a, strength, dt)) {
        r.absorbed = true;
        break;
      }
      min_height = std::min(min_height, y);
      if (i == sample_step(next_sample)) {
        record(i, y);
        ++next_sample;
      }
    }
    r.min_height = r.absorbed ? std::min(min_height, y) : min_height;
    if (!r.absorbed) {
      const double e0 = 0.5 * state.vy * state.vy - strength / y0;
      const double e1 = 0.5 * vy * vy - strength / y;
      r.energy_drift = std::abs(e1 - e0) / (strength / min_height);
      if (r.energy_drift > settings.energy_tolerance) {
        std::ostringstream msg;
        msg << "energy drift " << r.energy_drift << " exceeds "
            << settings.energy_tolerance << " (y0=" << y0 << " m, vy0=" << state.vy
            << " m/s, y_min=" << min_height << " m, steps=" << steps
            << "); increase integrator steps";
        throw NumericalError(msg.str());
      }
    }
  }

  r.exit_vy = vy;
  r.detector_y = r.absorbed ? std::numeric_limits<double>::quiet_NaN()
                            : y + vy * free_flight;
  return r;
}

TrajectoryEnsemble build_ensemble(const std::vector<InitialState>& states,
                                  const GeometrySpec& geometry,
                                  const BeamSpec& beam, bool image_charge,
                                  const IntegratorSettings& settings,
                                  std::uint64_t seed) {
  if (states.empty()) throw DomainError("build_ensemble: no initial states");
  TrajectoryEnsemble ensemble;
  ensemble.seed = seed;
  ensemble.surface_height = geometry.surface_height.value_or(0.0);
  ensemble.records.resize(states.size());
  parallel_for(states.size(), [&](std::size_t i) {
    ensemble.records[i] =
        propagate_over_surface(states[i], geometry, beam, image_charge, settings);
  });
  const auto transmitted = std::count_if(ensemble.records.begin(), ensemble.records.end(),
                                         [](const auto& r) { return !r.absorbed; });
  ensemble.transmitted_fraction =
      static_cast<double>(transmitted) / static_cast<double>(states.size());
  return ensemble;
}

double find_cut_height(const std::vector<InitialState>& states,
                       const GeometrySpec& geometry, const BeamSpec& beam,
                       bool image_charge, double target_fraction,
                       const IntegratorSettings& settings) {
  if (states.empty()) throw DomainError("find_cut_height: no initial states");
  if (!(target_fraction > 0.0 && target_fraction <= 1.0))
    throw DomainError("find_cut_height: target fraction must be in (0, 1]");
  constexpr double tolerance = 0.01;
  const double duration = flight_times(geometry, beam).over_surface;
  const double strength = image_charge ? image_charge_strength() : 0.0;
  const int steps = settings.steps;

  auto [min_vy, max_vy] = std::minmax_element(
      states.begin(), states.end(),
      [](const auto& a, const auto& b) { return a.vy < b.vy; });
  const double vy_lo = min_vy->vy;
  const double vy_hi = max_vy->vy;

  // Electron i survives iff height < threshold[i]. With the image force the
  // critical entrance height depends on vy only, so it is tabulated once.
  std::vector<double> threshold(states.size());
  if (strength == 0.0) {
    for (std::size_t i = 0; i < states.size(); ++i)
      threshold[i] = std::min(states[i].y, states[i].y + states[i].vy * duration);
  } else {
    const std::size_t nodes = vy_hi > vy_lo ? 257 : 1;
    std::vector<double> vy_grid(nodes), y_crit(nodes);
    for (std::size_t k = 0; k < nodes; ++k)
      vy_grid[k] = nodes == 1 ? vy_lo : vy_lo + (vy_hi - vy_lo) * k / (nodes - 1);
    parallel_for(nodes, [&](std::size_t k) {
      y_crit[k] = critical_height(vy_grid[k], strength, duration, steps);
    });
    for (std::size_t i = 0; i < states.size(); ++i) {
      double yc = y_crit[0];
      if (nodes > 1) {
        const double u = (states[i].vy - vy_lo) / (vy_hi - vy_lo) * (nodes - 1);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(u), nodes - 2);
        const double f = u - k;
        yc = (1.0 - f) * y_crit[k] + f * y_crit[k + 1];
      }
      threshold[i] = states[i].y - yc;
    }
  }

  const double lower = *std::min_element(threshold.begin(), threshold.end()) - 1e-6;
  const double upper = *std::max_element(threshold.begin(), threshold.end()) + 1e-6;
  auto estimated = [&](double h) {
    return static_cast<double>(std::count_if(threshold.begin(), threshold.end(),
                                             [h](double t) { return t > h; })) /
           static_cast<double>(threshold.size());
  };
  auto exact = [&](double h) {
    return transmitted_fraction(states, h, strength, duration, steps);
  };

  if (target_fraction == 1.0) {
    if (exact(lower) < 1.0 - tolerance)
      throw NumericalError("find_cut_height: lower search bound does not clear the beam");
    return lower;
  }

  // Fraction is non-increasing in height: bisect for the crossing.
  auto bisect = [&](auto&& fraction, double lo, double hi, int iterations) {
    for (int i = 0; i < iterations && hi - lo > 1e-13; ++i) {
      const double mid = 0.5 * (lo + hi);
      (fraction(mid) > target_fraction ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double height = bisect(estimated, lower, upper, 200);
  if (std::abs(exact(height) - target_fraction) <= tolerance) return height;

  // Interpolated thresholds were not accurate enough: bisect on full runs.
  if (exact(lower) < target_fraction || exact(upper) > target_fraction)
    throw NumericalError("find_cut_height: target fraction not reachable within bounds");
  height = bisect(exact, lower, upper, 60);
  const double achieved = exact(height);
  if (std::abs(achieved - target_fraction) > tolerance) {
    std::ostringstream msg;
    msg << "find_cut_height: reached " << achieved << " for target " << target_fraction;
    throw NumericalError(msg.str());
  }
  return height;
}

Histogram detector_histogram(const TrajectoryEnsemble& ensemble, double bin_width,
                             std::optional<std::pair<double, double>> range) {
  if (ensemble.records.empty()) throw DomainError("detector_histogram: empty ensemble");
  if (!(bin_width > 0.0)) throw DomainError("detector_histogram: bin width must be > 0");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  if (range) {
    lo = range->first;
    hi = range->second;
  } else {
    for (const auto& r : ensemble.records) {
      if (r.absorbed) continue;
      lo = std::min(lo, r.detector_y);
      hi = std::max(hi, r.detector_y);
    }
  }
  Histogram h;
  h.bin_width = bin_width;
  if (!(hi >= lo)) return h;
  h.start = lo;
  const auto bins =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / bin_width)));
  h.counts.assign(bins, 0.0);
  for (const auto& r : ensemble.records) {
    if (r.absorbed || r.detector_y < lo || r.detector_y > hi) continue;
    const auto k = std::min(bins - 1,
                            static_cast<std::size_t>((r.detector_y - lo) / bin_width));
    h.counts[k] += 1.0;
  }
  return h;
}

void write_trajectory_csv(const TrajectoryEnsemble& ensemble,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "entrance_height_m,entrance_vy_m_s,absorbed,detector_y_m\n";
  for (const auto& r : ensemble.records) {
    out << r.entrance_height << ',' << r.entrance_vy << ',' << (r.absorbed ? 1 : 0)
        << ',';
    if (!r.absorbed) out << r.detector_y;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace edecoh
