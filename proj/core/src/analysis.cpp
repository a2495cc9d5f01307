#include "edecoh/analysis.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include "edecoh/constants.hpp"
#include "edecoh/parallel.hpp"

namespace edecoh {

namespace c = constants;

namespace {

constexpr std::size_t kParams = 11;

double sinc_squared(double t) {
  if (std::abs(t) < 1e-4) return 1.0 - t * t / 3.0;
  const double s = std::sin(t) / t;
  return s * s;
}

std::vector<double> smoothed(const std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t half = std::max<std::size_t>(1, n / 256);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + v[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

// Index width of the peak at i where s drops below half its height over base.
std::size_t half_width_points(const std::vector<double>& s, std::size_t i, double base) {
  const double half = base + 0.5 * (s[i] - base);
  std::size_t left = i, right = i;
  while (left > 0 && s[left] > half) --left;
  while (right + 1 < s.size() && s[right] > half) ++right;
  return right - left;
}

// Height of s[i] over the higher of the lowest points reached on each side
// before the signal climbs above s[i].
double prominence(const std::vector<double>& s, std::size_t i) {
  double left = s[i], right = s[i];
  for (std::size_t j = i; j-- > 0 && s[j] <= s[i];) left = std::min(left, s[j]);
  for (std::size_t j = i + 1; j < s.size() && s[j] <= s[i]; ++j) right = std::min(right, s[j]);
  return s[i] - std::max(left, right);
}

// sinc^2(t) = ratio on (0, pi).
double solve_sinc_squared(double ratio) {
  if (!(ratio > 0.0)) return 0.5 * c::pi;
  if (ratio >= 1.0) return 0.1;
  double lo = 1e-9, hi = c::pi;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sinc_squared(mid) > ratio ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Scaling {
  double center;  // x offset
  double length;  // x scale
  double counts;  // y scale
};

std::array<double, kParams> to_normalized(const FitParams& p, const Scaling& s) {
  return {p.amplitude / s.counts,
          p.alpha * s.length,
          (p.envelope_center - s.center) / s.length,
          (p.comb_center - s.center) / s.length,
          p.spacing / s.length,
          p.mixture,
          p.width1 / s.length,
          p.width2 / s.length,
          p.background / s.counts,
          (p.background_center - s.center) / s.length,
          p.background_width / s.length};
}

FitParams from_normalized(std::span<const double> q, const Scaling& s, int n_max) {
  FitParams p;
  p.amplitude = q[0] * s.counts;
  p.alpha = q[1] / s.length;
  p.envelope_center = s.center + q[2] * s.length;
  p.comb_center = s.center + q[3] * s.length;
  p.spacing = q[4] * s.length;
  p.mixture = q[5];
  p.width1 = q[6] * s.length;
  p.width2 = q[7] * s.length;
  p.background = q[8] * s.counts;
  p.background_center = s.center + q[9] * s.length;
  p.background_width = q[10] * s.length;
  p.n_max = n_max;
  return p;
}

}  // namespace

void LineOut::validate() const {
  if (x.size() != counts.size()) throw DomainError("line-out: x and counts differ in size");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(counts[i]))
      throw DomainError("line-out: non-finite sample");
    if (counts[i] < 0.0) throw DomainError("line-out: negative counts");
    if (i > 0 && !(x[i] > x[i - 1]))
      throw DomainError("line-out: coordinates must be strictly increasing");
  }
}

double peak_shape(const FitParams& p, double u) {
  return p.mixture * std::exp(-0.5 * u * u / (p.width1 * p.width1)) +
         (1.0 - p.mixture) * std::exp(-0.5 * u * u / (p.width2 * p.width2));
}

double background_term(const FitParams& p, double x) {
  const double u = (x - p.background_center) / p.background_width;
  return p.background * std::exp(-0.5 * u * u);
}

double lineout_model(const FitParams& p, double x) {
  double comb = 0.0;
  for (int n = -p.n_max; n <= p.n_max; ++n)
    comb += peak_shape(p, x - p.comb_center - n * p.spacing);
  return p.amplitude * sinc_squared(p.alpha * (x - p.envelope_center)) * comb +
         background_term(p, x);
}

std::vector<std::size_t> detect_peaks(const LineOut& data) {
  const auto s = smoothed(data.counts);
  if (s.size() < 3) return {};
  const double base = *std::min_element(s.begin(), s.end());
  const double top = *std::max_element(s.begin(), s.end());
  if (!(top > base)) return {};
  const double threshold = base + 0.02 * (top - base);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < s.size(); ++i)
    if (s[i] > s[i - 1] && s[i] >= s[i + 1] && s[i] > threshold &&
        prominence(s, i) > 0.03 * (top - base))
      candidates.push_back(i);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  if (candidates.empty()) return {};
  const std::size_t separation =
      std::max<std::size_t>(3, half_width_points(s, candidates.front(), base));
  std::vector<std::size_t> peaks;
  for (std::size_t i : candidates) {
    const bool isolated = std::all_of(peaks.begin(), peaks.end(), [&](std::size_t j) {
      return (i > j ? i - j : j - i) >= separation;
    });
    if (isolated) peaks.push_back(i);
  }
  return peaks;
}

FitParams initial_guess(const LineOut& data, const FitOptions& options) {
  data.validate();
  const auto peaks = detect_peaks(data);
  if (peaks.size() < 3) {
    std::ostringstream msg;
    msg << "line-out at Y=" << data.y << " m shows " << peaks.size()
        << " peak(s); at least 3 are needed";
    throw InsufficientStructureError(msg.str());
  }
  const auto s = smoothed(data.counts);
  const double base = std::max(0.0, *std::min_element(s.begin(), s.end()));
  const double x1 = data.x[peaks[0]];

  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < peaks.size(); ++k)
    nearest = std::min(nearest, std::abs(data.x[peaks[k]] - x1));
  double num = 0.0, den = 0.0, h1 = 0.0;
  int first_order = 0;
  for (std::size_t k = 1; k < peaks.size(); ++k) {
    const double offset = data.x[peaks[k]] - x1;
    const double order = std::round(offset / nearest);
    if (order == 0.0) continue;
    num += order * offset;
    den += order * order;
    if (std::abs(order) == 1.0) {
      h1 += s[peaks[k]] - base;
      ++first_order;
    }
  }
  FitParams p;
  p.n_max = options.n_max;
  p.spacing = options.fixed_spacing ? *options.fixed_spacing : (den > 0 ? num / den : nearest);
  p.comb_center = x1;
  p.envelope_center = x1;
  p.amplitude = std::max(s[peaks[0]] - base, 1e-12);
  const double ratio = first_order > 0 ? h1 / first_order / p.amplitude : 0.4;
  p.alpha = solve_sinc_squared(ratio) / p.spacing;

  const std::size_t span_pts = half_width_points(s, peaks[0], base);
  const double step = (data.x.back() - data.x.front()) / static_cast<double>(data.x.size() - 1);
  const double sigma = std::max(span_pts * step, 2.0 * step) / c::fwhm_per_sigma;
  p.mixture = 0.5;
  p.width1 = 0.85 * sigma;
  p.width2 = 1.5 * sigma;
  p.background = base;
  p.background_center = 0.5 * (data.x.front() + data.x.back());
  p.background_width = std::max(0.5 * (data.x.back() - data.x.front()), p.spacing);
  return p;
}

FitResult fit_lineout(const LineOut& data, const std::optional<FitParams>& init,
                      const FitOptions& options) {
  data.validate();
  if (data.x.size() < kParams + 1) throw InsufficientStructureError("line-out too short to fit");
  FitParams start = init ? *init : initial_guess(data, options);
  start.n_max = options.n_max;
  if (options.fixed_spacing) start.spacing = *options.fixed_spacing;
  if (!(start.spacing > 0.0)) throw DomainError("fit: initial spacing must be > 0");

  const double ymax = *std::max_element(data.counts.begin(), data.counts.end());
  const Scaling scale{start.comb_center, start.spacing, ymax > 0.0 ? ymax : 1.0};
  const double lo_x = (data.x.front() - scale.center) / scale.length;
  const double hi_x = (data.x.back() - scale.center) / scale.length;
  const double window = std::clamp(options.spacing_window, 0.0, 0.95);

  std::vector<double> lower{0.0, 1e-6, lo_x, -0.5, 1.0 - window, 0.0, 1e-4, 1e-4,
                            0.0, lo_x, 1.0};
  std::vector<double> upper{100.0, 20.0, hi_x, 0.5, 1.0 + window, 1.0, 10.0, 10.0,
                            100.0, hi_x, 1e3};
  if (options.fixed_spacing) lower[4] = upper[4] = 1.0;

  std::vector<double> u(data.x.size()), y(data.x.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = (data.x[i] - scale.center) / scale.length;
    y[i] = data.counts[i] / scale.counts;
  }
  const int n_max = options.n_max;
  auto residuals = [&](std::span<const double> q, std::span<double> r) {
    FitParams p = from_normalized(q, Scaling{0.0, 1.0, 1.0}, n_max);
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = lineout_model(p, u[i]) - y[i];
  };

  const auto base = to_normalized(start, scale);
  std::vector<double> alphas{base[1]};
  const double quarter = 0.5 * c::pi / base[4];  // envelope zero at the second order
  if (std::abs(quarter - base[1]) > 0.01 * quarter) alphas.push_back(quarter);

  LeastSquaresResult best;
  bool have_best = false;
  for (double alpha : alphas) {
    std::vector<double> q(base.begin(), base.end());
    q[1] = alpha;
    auto result = levenberg_marquardt(residuals, u.size(), q, lower, upper, options.solver);
    const bool better = !have_best || (result.converged && !best.converged) ||
                        (result.converged == best.converged && result.cost < best.cost);
    if (better) {
      best = std::move(result);
      have_best = true;
    }
  }

  FitResult out;
  out.params = from_normalized(best.params, scale, n_max);
  out.grating_period = options.grating_period;
  out.w_fwhm = fwhm_of_peak(out.params);
  out.l_coh = coherence_length(out.params.spacing, out.w_fwhm, options.grating_period);
  double data_norm = 0.0;
  for (double v : data.counts) data_norm += v * v;
  out.residual_norm =
      data_norm > 0.0 ? std::sqrt(2.0 * best.cost) * scale.counts / std::sqrt(data_norm) : 0.0;
  out.cost = best.cost;
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.stop_reason = best.stop_reason;
  out.std_errors = parameter_std_errors(best, u.size());
  const std::array<double, kParams> unit{scale.counts, 1.0 / scale.length, scale.length,
                                         scale.length, scale.length, 1.0, scale.length,
                                         scale.length, scale.counts, scale.length,
                                         scale.length};
  for (std::size_t j = 0; j < kParams; ++j) out.std_errors[j] *= unit[j];
  out.condition_number = normal_matrix_condition(best);
  if (!out.converged) {
    std::ostringstream msg;
    msg << "fit at Y=" << data.y << " m did not converge (" << best.stop_reason << ")";
    throw FitError(msg.str(), out);
  }
  return out;
}

BatchFit fit_lineouts(const std::vector<LineOut>& lineouts, const FitOptions& options,
                      bool global_spacing) {
  BatchFit batch;
  batch.fits.resize(lineouts.size());
  std::vector<std::string> errors(lineouts.size());
  auto run = [&](const FitOptions& opts) {
    parallel_for(lineouts.size(), [&](std::size_t i) {
      try {
        batch.fits[i] = fit_lineout(lineouts[i], {}, opts);
        errors[i].clear();
      } catch (const FitError& e) {
        batch.fits[i] = e.best();
        errors[i] = std::string(e.what()) + "; best-so-far kept";
      } catch (const Error& e) {
        batch.fits[i].reset();
        errors[i] = e.what();
      }
    });
  };
  run(options);
  if (global_spacing) {
    std::vector<double> spacings;
    for (const auto& f : batch.fits)
      if (f) spacings.push_back(f->params.spacing);
    if (!spacings.empty()) {
      std::nth_element(spacings.begin(), spacings.begin() + spacings.size() / 2, spacings.end());
      FitOptions fixed = options;
      fixed.fixed_spacing = spacings[spacings.size() / 2];
      run(fixed);
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      batch.messages.push_back("row " + std::to_string(i) + ": " + errors[i]);
  return batch;
}

double fwhm_of_peak(double mixture, double width1, double width2) {
  if (!(mixture >= 0.0 && mixture <= 1.0)) throw DomainError("fwhm: a1 must be in [0, 1]");
  if (!(width1 > 0.0) || !(width2 > 0.0)) throw DomainError("fwhm: widths must be > 0");
  FitParams p;
  p.mixture = mixture;
  p.width1 = width1;
  p.width2 = width2;
  // G is even with its maximum G(0) = 1 and decreases in |u|.
  auto half_crossing = [&](double sign) {
    double lo = 0.0;
    double hi = std::sqrt(2.0 * std::log(2.0)) * std::max(width1, width2);
    for (int i = 0; i < 400 && hi - lo > std::max(1e-12, 1e-15 * hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      (peak_shape(p, sign * mid) > 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return half_crossing(-1.0) + half_crossing(1.0);
}

double fwhm_of_peak(const FitParams& p) { return fwhm_of_peak(p.mixture, p.width1, p.width2); }

double coherence_length(double spacing, double w_fwhm, double grating_period) {
  if (!(spacing > 0.0) || !(w_fwhm > 0.0) || !(grating_period > 0.0))
    throw DomainError("coherence_length: inputs must be > 0");
  return grating_period * spacing / w_fwhm;
}

std::vector<LineOut> extract_lineouts(const DetectorImage& image, double slant,
                                      double bin_height, const std::vector<double>& centers) {
  if (image.width == 0 || image.height == 0 ||
      image.pixels.size() != image.width * image.height)
    throw BoundaryError("detector image is empty or inconsistent");
  if (!(bin_height > 0.0)) throw DomainError("bin height must be > 0");
  if (!(image.pixel_x > 0.0) || !(image.pixel_y > 0.0))
    throw DomainError("pixel sizes must be > 0");

  std::vector<double> ys = centers;
  if (ys.empty()) {
    const auto rows_per_bin = static_cast<std::size_t>(
        std::max(1.0, std::round(bin_height / image.pixel_y)));
    for (std::size_t first = 0; first + rows_per_bin <= image.height; first += rows_per_bin)
      ys.push_back(image.row_y(first) + 0.5 * static_cast<double>(rows_per_bin - 1) * image.pixel_y);
  }
  if (ys.empty()) throw BoundaryError("image is shorter than one bin");

  const double y_low = image.row_y(0) - 0.5 * image.pixel_y;
  const double y_high = image.row_y(image.height - 1) + 0.5 * image.pixel_y;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [first, last)
  for (double y : ys) {
    const double lo = y - 0.5 * bin_height;
    const double hi = y + 0.5 * bin_height;
    if (lo < y_low - 1e-9 * image.pixel_y || hi > y_high + 1e-9 * image.pixel_y) {
      std::ostringstream msg;
      msg << "bin at Y=" << y << " m extends outside the image";
      throw BoundaryError(msg.str());
    }
    const double first = std::ceil((lo - image.origin_y) / image.pixel_y - 1e-9);
    const double last = std::ceil((hi - image.origin_y) / image.pixel_y - 1e-9);
    const auto a = static_cast<std::size_t>(std::max(0.0, first));
    const auto b = static_cast<std::size_t>(std::min<double>(image.height, last));
    if (b <= a) throw BoundaryError("bin contains no image rows");
    ranges.emplace_back(a, b);
  }

  const double mid = 0.5 * (image.row_y(0) + image.row_y(image.height - 1));
  const double slope = std::tan(slant) / image.pixel_x;
  double min_shift = 0.0, max_shift = 0.0;
  for (const auto& [a, b] : ranges) {
    for (std::size_t r : {a, b - 1}) {
      const double shift = (image.row_y(r) - mid) * slope;
      min_shift = std::min(min_shift, shift);
      max_shift = std::max(max_shift, shift);
    }
  }
  const double col_lo = std::ceil(-min_shift - 1e-9);
  const double col_hi = std::floor(static_cast<double>(image.width - 1) - max_shift + 1e-9);
  if (col_hi - col_lo < 2.0) throw BoundaryError("slant pushes sampling outside the image");
  const auto c0 = static_cast<std::size_t>(col_lo);
  const auto c1 = static_cast<std::size_t>(col_hi);

  std::vector<LineOut> out;
  out.reserve(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) {
    LineOut line;
    line.y = ys[k];
    line.x.resize(c1 - c0 + 1);
    line.counts.assign(c1 - c0 + 1, 0.0);
    for (std::size_t c = c0; c <= c1; ++c) line.x[c - c0] = image.col_x(c);
    for (std::size_t r = ranges[k].first; r < ranges[k].second; ++r) {
      const double shift = (image.row_y(r) - mid) * slope;
      for (std::size_t c = c0; c <= c1; ++c) {
        const double pos = std::clamp(static_cast<double>(c) + shift, 0.0,
                                      static_cast<double>(image.width - 1));
        const auto i0 = static_cast<std::size_t>(pos);
        const double f = pos - static_cast<double>(i0);
        double v = image.at(r, i0);
        if (f > 0.0 && i0 + 1 < image.width) v = (1.0 - f) * v + f * image.at(r, i0 + 1);
        line.counts[c - c0] += v;
      }
    }
    out.push_back(std::move(line));
  }
  return out;
}

Diffractogram build_diffractogram(const std::vector<LineOut>& lineouts,
                                  const std::vector<std::optional<FitResult>>& fits) {
  if (lineouts.size() != fits.size())
    throw DomainError("build_diffractogram: one fit per line-out required");
  Diffractogram gram;
  std::vector<std::size_t> order(lineouts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lineouts[a].y < lineouts[b].y; });
  for (std::size_t i : order) {
    const auto& line = lineouts[i];
    if (!fits[i]) {
      std::ostringstream msg;
      msg << "line-out at Y=" << line.y << " m skipped: no fit";
      gram.warnings.push_back(msg.str());
      continue;
    }
    const FitParams& p = fits[i]->params;
    gram.n_max = std::max(gram.n_max, p.n_max);
    DiffractogramRow row;
    row.y = line.y;
    row.x = line.x;
    std::vector<double> signal(line.x.size());
    for (std::size_t k = 0; k < line.x.size(); ++k)
      signal[k] = line.counts[k] - background_term(p, line.x[k]);
    row.values.assign(line.x.size(), 0.0);
    for (int n = -p.n_max; n <= p.n_max; ++n) {
      const double lo = p.comb_center + (n - 0.5) * p.spacing;
      const double hi = p.comb_center + (n + 0.5) * p.spacing;
      double peak = 0.0;
      for (std::size_t k = 0; k < line.x.size(); ++k)
        if (line.x[k] >= lo && line.x[k] < hi) peak = std::max(peak, signal[k]);
      if (!(peak > 0.0)) continue;
      for (std::size_t k = 0; k < line.x.size(); ++k)
        if (line.x[k] >= lo && line.x[k] < hi) row.values[k] = signal[k] / peak;
    }
    gram.rows.push_back(std::move(row));
  }
  return gram;
}

}  // namespace edecoh
