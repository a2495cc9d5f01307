#include "edecoh/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "edecoh/constants.hpp"
#include "edecoh/errors.hpp"
#include "edecoh/least_squares.hpp"
#include "edecoh/parallel.hpp"
#include "fft.hpp"

namespace edecoh {

namespace c = constants;

namespace {

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double gaussian(double x, double sigma) { return std::exp(-0.5 * x * x / (sigma * sigma)); }

}  // namespace

Axis Axis::centered(double center, double half_span, std::size_t points) {
  if (points < 3 || points % 2 == 0)
    throw ConfigError("centered axis needs an odd number of points >= 3");
  if (!(half_span > 0.0)) throw DomainError("axis half span must be > 0");
  Axis a;
  a.size = points;
  a.step = 2.0 * half_span / static_cast<double>(points - 1);
  a.start = center - half_span;
  return a;
}

std::size_t DensityMatrixGrid::center_sum() const {
  const double u = (center - sum.start) / sum.step;
  return static_cast<std::size_t>(
      std::clamp(std::lround(u), 0L, static_cast<long>(sum.size) - 1));
}

double DensityMatrixGrid::trace() const {
  double total = 0.0;
  const std::size_t j = zero_diff();
  for (std::size_t i = 0; i < sum.size; ++i) total += (*this)(i, j);
  return total * 0.5 * sum.step;
}

std::vector<double> DensityMatrixGrid::pair_matrix(std::size_t& dimension) const {
  const std::size_t cs = sum.size / 2;
  const std::size_t cd = diff.size / 2;
  if (std::abs(sum.step - diff.step) > 1e-12 * diff.step || sum.size % 2 == 0 ||
      std::abs(sum.start + cs * sum.step) > 1e-9 * sum.step)
    throw DomainError("pair_matrix needs equal S/D steps and a zero-centered S axis");
  const long m = static_cast<long>(std::min(cs, cd) / 2);
  dimension = static_cast<std::size_t>(2 * m + 1);
  std::vector<double> out(dimension * dimension);
  for (long a = -m; a <= m; ++a) {
    for (long b = -m; b <= m; ++b) {
      const auto i = static_cast<std::size_t>(static_cast<long>(cs) + a + b);
      const auto j = static_cast<std::size_t>(static_cast<long>(cd) + a - b);
      out[static_cast<std::size_t>(a + m) * dimension + static_cast<std::size_t>(b + m)] =
          (*this)(i, j);
    }
  }
  return out;
}

DensityMatrixGrid initial_density_matrix(const BeamSpec& beam, const DensityGridSpec& spec) {
  beam.validate();
  const double w = beam.spatial_width;
  const double w_coh = beam.initial_coherence_width();
  if (w_coh > w * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "initial coherence width " << w_coh << " m exceeds spatial width " << w
        << " m (unphysical state)";
    throw ConfigError(msg.str());
  }
  DensityMatrixGrid rho;
  rho.sigma_sum = w / c::fwhm_per_sigma;
  rho.sigma_diff = w_coh / c::fwhm_per_sigma;
  rho.center = 0.0;
  rho.sum = Axis::centered(0.0, spec.sum_half_span > 0 ? spec.sum_half_span : 6.0 * rho.sigma_sum,
                           spec.sum_points);
  rho.diff = Axis::centered(
      0.0, spec.diff_half_span > 0 ? spec.diff_half_span : 6.0 * rho.sigma_diff,
      spec.diff_points);
  rho.values.resize(rho.sum.size * rho.diff.size);
  const long cd = static_cast<long>(rho.zero_diff());
  std::vector<double> along_d(rho.diff.size);
  for (std::size_t j = 0; j < rho.diff.size; ++j)
    along_d[j] = gaussian((static_cast<long>(j) - cd) * rho.diff.step, rho.sigma_diff);
  for (std::size_t i = 0; i < rho.sum.size; ++i) {
    const double s = gaussian(rho.sum.at(i) - rho.center, rho.sigma_sum);
    for (std::size_t j = 0; j < rho.diff.size; ++j) rho(i, j) = s * along_d[j];
  }
  const double scale = 1.0 / rho.trace();
  for (double& v : rho.values) v *= scale;
  return rho;
}

DensityMatrixGrid apply_decoherence(const DensityMatrixGrid& rho,
                                    const std::function<double(double)>& gamma) {
  const std::size_t cd = rho.zero_diff();
  const std::size_t half = rho.diff.size - cd;
  std::vector<double> factor(rho.diff.size, 1.0);
  std::vector<double> upper(half, 1.0);
  parallel_for(half - 1, [&](std::size_t k) {
    const double g = gamma(static_cast<double>(k + 1) * rho.diff.step);
    if (std::isnan(g) || g < 0.0)
      throw NumericalError("decoherence exponent must be >= 0");
    upper[k + 1] = std::exp(-g);
  });
  for (std::size_t k = 0; k < half; ++k) {
    factor[cd + k] = upper[k];
    factor[cd - k] = upper[k];
  }
  DensityMatrixGrid out = rho;
  for (std::size_t i = 0; i < rho.sum.size; ++i)
    for (std::size_t j = 0; j < rho.diff.size; ++j) out(i, j) *= factor[j];
  return out;
}

DensityMatrixGrid apply_decoherence(const DensityMatrixGrid& rho, ModelId model,
                                    const TrajectoryRecord& trajectory,
                                    const MaterialSpec& material, const BeamSpec& beam,
                                    const ModelOptions& options) {
  if (trajectory.absorbed)
    throw DomainError("apply_decoherence: absorbed trajectory (filter before use)");
  if (model == ModelId::None) return rho;
  return apply_decoherence(rho, [&](double dx) {
    return gamma_for_separation(model, trajectory, dx, material, beam, options);
  });
}

WidthFit extract_offdiagonal_width(const DensityMatrixGrid& rho, double mismatch_threshold) {
  const std::size_t row = rho.center_sum();
  const std::size_t n = rho.diff.size;
  const long cd = static_cast<long>(rho.zero_diff());
  std::vector<double> d(n), p(n);
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = (static_cast<long>(j) - cd) * rho.diff.step;
    p[j] = rho(row, j);
  }
  const double peak = p[rho.zero_diff()];
  if (!(peak > 0.0)) throw NumericalError("density matrix has no diagonal weight");

  double m0 = 0.0, m2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    m0 += p[j];
    m2 += p[j] * d[j] * d[j];
  }
  const double guess = std::max(std::sqrt(m2 / m0), rho.diff.step);

  // Unknowns: amplitude / peak and sigma / guess.
  auto residuals = [&](std::span<const double> q, std::span<double> r) {
    const double sigma = q[1] * guess;
    for (std::size_t j = 0; j < n; ++j) r[j] = q[0] * gaussian(d[j], sigma) - p[j] / peak;
  };
  const std::vector<double> lower{0.0, 1e-6};
  const std::vector<double> upper{10.0, 1e3};
  const auto fit = levenberg_marquardt(residuals, n, {1.0, 1.0}, lower, upper);

  WidthFit out;
  out.sigma = std::min(fit.params[1] * guess, rho.sigma_diff);
  out.relative_residual = std::sqrt(2.0 * fit.cost / static_cast<double>(n));
  if (out.relative_residual > mismatch_threshold) {
    out.shape_mismatch = true;
    std::ostringstream msg;
    msg << "off-diagonal profile deviates from a Gaussian (rms residual "
        << out.relative_residual << " of peak)";
    out.warning = msg.str();
  }
  return out;
}

std::size_t required_pure_states(double sigma_env, double width) {
  if (!(sigma_env > 0.0)) return 1;
  return static_cast<std::size_t>(std::ceil(16.0 * sigma_env / width)) + 1;
}

PureStateSet decompose(const DensityMatrixGrid& rho, double width, std::size_t n_states,
                       double tolerance) {
  const double sigma0 = rho.sigma_sum;
  if (!(width > 0.0)) throw DomainError("decompose: width must be > 0");
  if (width > sigma0 * (1.0 + 1e-12))
    throw DomainError("decompose: coherence width exceeds the source width");
  if (n_states == 0) throw DomainError("decompose: need at least one state");

  PureStateSet set;
  set.width = width;
  set.sigma_env = std::sqrt(std::max(0.0, sigma0 * sigma0 - width * width));
  std::vector<double> sums;  // S_n
  if (set.sigma_env <= 1e-9 * sigma0 || n_states == 1) {
    sums.push_back(rho.center);
    set.states.push_back({1.0, 0.5 * rho.center});
  } else {
    double total = 0.0;
    for (std::size_t k = 0; k < n_states; ++k) {
      const double offset = set.sigma_env * (-4.0 + 8.0 * k / (n_states - 1.0));
      sums.push_back(rho.center + offset);
      const double w = gaussian(offset, set.sigma_env);
      set.states.push_back({w, 0.5 * sums.back()});
      total += w;
    }
    for (auto& s : set.states) s.weight /= total;
  }

  // Reconstruction along S; the D dependence of every term is identical.
  const double half = 4.0 * set.sigma_env + 8.0 * width;
  const double target_peak = width / sigma0;
  constexpr int samples = 4001;
  double error = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double s = rho.center - half + 2.0 * half * k / (samples - 1);
    double sum = 0.0;
    for (std::size_t n = 0; n < sums.size(); ++n)
      sum += set.states[n].weight * gaussian(s - sums[n], width);
    error = std::max(error, std::abs(sum - target_peak * gaussian(s - rho.center, sigma0)));
  }
  set.reconstruction_error = error / target_peak;

  const std::size_t row = rho.center_sum();
  const double amplitude = rho(row, rho.zero_diff());
  const long cd = static_cast<long>(rho.zero_diff());
  double mismatch = 0.0;
  for (std::size_t i = 0; i < rho.sum.size; ++i) {
    const double s = gaussian(rho.sum.at(i) - rho.center, sigma0);
    for (std::size_t j = 0; j < rho.diff.size; ++j) {
      const double model =
          amplitude * s * gaussian((static_cast<long>(j) - cd) * rho.diff.step, width);
      mismatch = std::max(mismatch, std::abs(rho(i, j) - model));
    }
  }
  set.grid_mismatch = mismatch / amplitude;

  if (set.reconstruction_error > tolerance) {
    std::ostringstream msg;
    msg << "decompose: reconstruction error " << set.reconstruction_error << " exceeds "
        << tolerance << " with " << n_states << " states; use at least "
        << required_pure_states(set.sigma_env, width);
    throw NumericalError(msg.str());
  }
  return set;
}

PureStateSet decompose(const DensityMatrixGrid& rho, std::size_t n_states, double tolerance) {
  return decompose(rho, extract_offdiagonal_width(rho).sigma, n_states, tolerance);
}

void GratingSpec::validate() const {
  if (!(period > 0.0)) throw ConfigError("grating: period must be > 0");
  if (!(open_fraction > 0.0 && open_fraction <= 1.0))
    throw ConfigError("grating: open_fraction must be in (0, 1]");
  if (min_points_per_period < 2) throw ConfigError("grating: min_points_per_period >= 2");
}

double Wavefunction::norm() const {
  double total = 0.0;
  for (const auto& v : values) total += std::norm(v);
  return total * x.step;
}

Wavefunction pure_state_wavefunction(double center, double width, double step,
                                     std::size_t points) {
  if (!(width > 0.0) || !(step > 0.0) || points == 0)
    throw DomainError("pure_state_wavefunction: invalid grid");
  const long first = std::lround(center / step) - static_cast<long>(points / 2);
  Wavefunction psi;
  psi.x = {static_cast<double>(first) * step, step, points};
  psi.values.resize(points);
  const double amplitude = std::pow(2.0 / (c::pi * width * width), 0.25);
  for (std::size_t j = 0; j < points; ++j) {
    const double u = (static_cast<double>(first + static_cast<long>(j)) * step - center) / width;
    psi.values[j] = amplitude * std::exp(-u * u);
  }
  return psi;
}

Wavefunction grating_transmit(const Wavefunction& psi, const GratingSpec& grating) {
  grating.validate();
  if (psi.x.step * static_cast<double>(grating.min_points_per_period) > grating.period) {
    std::ostringstream msg;
    msg << "grid step " << psi.x.step << " m resolves the " << grating.period
        << " m period with fewer than " << grating.min_points_per_period << " points";
    throw NumericalError(msg.str());
  }
  Wavefunction out = psi;
  if (grating.open_fraction >= 1.0) return out;
  constexpr double eps = 1e-9;
  for (std::size_t j = 0; j < psi.values.size(); ++j) {
    const double phase = psi.x.at(j) / grating.period;
    const double frac = phase - std::floor(phase + eps);
    if (!(frac < grating.open_fraction - eps)) out.values[j] = 0.0;
  }
  return out;
}

double FarFieldPattern::total() const {
  double sum = 0.0;
  for (double v : intensity) sum += v;
  return sum * x.step;
}

FarFieldPattern far_field(const Wavefunction& psi, double camera_length, double wavelength,
                          double edge_tolerance) {
  if (!(camera_length > 0.0) || !(wavelength > 0.0))
    throw DomainError("far_field: camera length and wavelength must be > 0");
  const std::size_t n = psi.values.size();
  if (n < 4) throw DomainError("far_field: wavefunction too short");
  const std::size_t border = std::max<std::size_t>(1, n / 100);

  auto edge_ratio = [&](const auto& magnitude) {
    double peak = 0.0, edge = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      peak = std::max(peak, magnitude(j));
      if (j < border || j >= n - border) edge = std::max(edge, magnitude(j));
    }
    return peak > 0.0 ? edge / peak : 0.0;
  };
  const double spatial = edge_ratio([&](std::size_t j) { return std::norm(psi.values[j]); });
  if (spatial > edge_tolerance) {
    std::ostringstream msg;
    msg << "far_field: state reaches the spatial window edge (" << spatial << " of peak)";
    throw NumericalError(msg.str());
  }

  const auto spectrum = detail::forward_dft(psi.values);
  const double h = psi.x.step;
  const double scale = camera_length * wavelength;
  FarFieldPattern out;
  out.camera_length = camera_length;
  out.x = {-scale * static_cast<double>(n / 2) / (static_cast<double>(n) * h),
           scale / (static_cast<double>(n) * h), n};
  out.intensity.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t shifted = (k + n / 2) % n;
    out.intensity[shifted] = std::norm(spectrum[k]) * h * h / scale;
  }
  const double aliasing = edge_ratio([&](std::size_t j) { return out.intensity[j]; });
  if (aliasing > edge_tolerance) {
    std::ostringstream msg;
    msg << "far_field: aliasing, window edge carries " << aliasing
        << " of peak intensity; refine the grid";
    throw NumericalError(msg.str());
  }
  return out;
}

FarFieldGrid far_field_grid(double width, const GratingSpec& grating,
                            const FarFieldNumerics& numerics) {
  if (numerics.points_per_period < grating.min_points_per_period)
    throw ConfigError("far field points_per_period below the grating minimum");
  FarFieldGrid g;
  g.step = std::min(grating.period / static_cast<double>(numerics.points_per_period),
                    width / 128.0);
  const double span = numerics.span_factor * std::max(width, grating.period);
  g.points = next_power_of_two(static_cast<std::size_t>(std::ceil(span / g.step)));
  return g;
}

FarFieldPattern incoherent_pattern(const PureStateSet& states, const GratingSpec& grating,
                                   double wavelength, const FarFieldNumerics& numerics) {
  if (states.states.empty()) throw DomainError("incoherent_pattern: no states");
  const FarFieldGrid grid = far_field_grid(states.width, grating, numerics);
  FarFieldPattern total;
  constexpr std::size_t block = 32;
  std::vector<FarFieldPattern> partial;
  for (std::size_t first = 0; first < states.states.size(); first += block) {
    const std::size_t count = std::min(block, states.states.size() - first);
    partial.assign(count, {});
    parallel_for(count, [&](std::size_t k) {
      const auto& s = states.states[first + k];
      const auto psi = pure_state_wavefunction(s.center, states.width, grid.step, grid.points);
      // Per-state tails are weighed against the summed pattern below.
      partial[k] = far_field(grating_transmit(psi, grating), numerics.camera_length,
                             wavelength, std::numeric_limits<double>::infinity());
    });
    for (std::size_t k = 0; k < count; ++k) {
      const double w = states.states[first + k].weight;
      if (total.intensity.empty()) {
        total = partial[k];
        for (double& v : total.intensity) v *= w;
      } else {
        for (std::size_t j = 0; j < total.intensity.size(); ++j)
          total.intensity[j] += w * partial[k].intensity[j];
      }
    }
  }
  const std::size_t n = total.intensity.size();
  const std::size_t border = std::max<std::size_t>(1, n / 100);
  double peak = 0.0, edge = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    peak = std::max(peak, total.intensity[j]);
    if (j < border || j >= n - border) edge = std::max(edge, total.intensity[j]);
  }
  if (peak > 0.0 && edge / peak > numerics.edge_tolerance) {
    std::ostringstream msg;
    msg << "incoherent_pattern: aliasing, window edge carries " << edge / peak
        << " of peak intensity at width " << states.width << " m; refine the grid";
    throw NumericalError(msg.str());
  }
  return total;
}

std::function<double(double)> bin_gamma(ModelId model,
                                        const std::vector<const TrajectoryRecord*>& paths,
                                        const MaterialSpec& material, const BeamSpec& beam,
                                        const CoherenceNumerics& numerics) {
  if (model == ModelId::None) return [](double) { return 0.0; };
  if (paths.empty()) throw DomainError("bin_gamma: no trajectories");
  return [=](double dx) {
    if (dx == 0.0) return 0.0;
    double acc = 0.0;
    for (const auto* path : paths) {
      const double g =
          gamma_for_separation(model, *path, dx, material, beam, numerics.model_options);
      acc += numerics.averaging == GammaAveraging::MeanGamma ? g : std::exp(-g);
    }
    acc /= static_cast<double>(paths.size());
    if (numerics.averaging == GammaAveraging::MeanGamma) return acc;
    return acc > 0.0 ? -std::log(acc) : std::numeric_limits<double>::infinity();
  };
}

std::vector<const TrajectoryRecord*> paths_in_bin(const TrajectoryEnsemble& ensemble,
                                                  double detector_y, double bin_width) {
  std::vector<const TrajectoryRecord*> out;
  const double lo = detector_y - 0.5 * bin_width;
  const double hi = detector_y + 0.5 * bin_width;
  for (const auto& r : ensemble.records)
    if (!r.absorbed && r.detector_y >= lo && r.detector_y <= hi) out.push_back(&r);
  return out;
}

std::vector<const TrajectoryRecord*> subsample_paths(
    const std::vector<const TrajectoryRecord*>& paths, std::size_t limit) {
  limit = std::max<std::size_t>(1, limit);
  const std::size_t stride = std::max<std::size_t>(1, (paths.size() + limit - 1) / limit);
  std::vector<const TrajectoryRecord*> used;
  for (std::size_t i = 0; i < paths.size(); i += stride) used.push_back(paths[i]);
  return used;
}

PatternResult pattern_for_height(double detector_y, double bin_width,
                                 const TrajectoryEnsemble& ensemble, ModelId model,
                                 const MaterialSpec& material, const BeamSpec& beam,
                                 const GratingSpec& grating,
                                 const CoherenceNumerics& numerics) {
  PatternResult result;
  const auto all = paths_in_bin(ensemble, detector_y, bin_width);
  result.trajectories = all.size();
  if (all.empty()) return result;
  result.has_data = true;

  const auto used = subsample_paths(all, numerics.max_bin_trajectories);
  result.used_trajectories = used.size();
  double height_sum = 0.0;
  for (const auto* p : used) {
    double area = 0.0;
    for (std::size_t k = 1; k < p->time.size(); ++k)
      area += 0.5 * (p->height[k] + p->height[k - 1]) * (p->time[k] - p->time[k - 1]);
    height_sum += p->duration() > 0.0 ? area / p->duration() : p->entrance_height;
  }
  result.mean_height = height_sum / static_cast<double>(used.size());

  const auto gamma = bin_gamma(model, used, material, beam, numerics);
  const double sigma_i = beam.initial_coherence_width() / c::fwhm_per_sigma;
  result.sigma_initial = sigma_i;

  // Cut the D window where Gamma + D^2 / (2 sigma_i^2) reaches the cutoff.
  DensityGridSpec grid = numerics.grid;
  if (!(grid.diff_half_span > 0.0)) {
    auto log_suppression = [&](double dx) {
      return gamma(dx) + 0.5 * dx * dx / (sigma_i * sigma_i);
    };
    double hi = std::sqrt(2.0 * numerics.diff_cutoff) * sigma_i;
    double lo = 0.0;
    if (log_suppression(hi) > numerics.diff_cutoff) {
      while (hi - lo > 1e-4 * hi) {
        const double mid = 0.5 * (lo + hi);
        (log_suppression(mid) > numerics.diff_cutoff ? hi : lo) = mid;
      }
    }
    grid.diff_half_span = hi;
  }

  const auto rho0 = initial_density_matrix(beam, grid);
  const auto rho = apply_decoherence(rho0, gamma);
  const auto width = extract_offdiagonal_width(rho);
  if (width.shape_mismatch) result.warnings.push_back(width.warning);
  result.sigma_final = width.sigma;

  const double sigma_env =
      std::sqrt(std::max(0.0, rho.sigma_sum * rho.sigma_sum - width.sigma * width.sigma));
  std::size_t n_states = numerics.n_states;
  if (numerics.auto_states)
    n_states = std::max(n_states, required_pure_states(sigma_env, width.sigma));
  const auto states = decompose(rho, width.sigma, n_states, numerics.reconstruction_tolerance);
  result.n_states = states.states.size();
  result.reconstruction_error = states.reconstruction_error;
  result.pattern = incoherent_pattern(states, grating, beam.de_broglie_wavelength(),
                                      numerics.far_field);
  return result;
}

}  // namespace edecoh
