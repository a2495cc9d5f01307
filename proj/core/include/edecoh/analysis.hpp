#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "edecoh/errors.hpp"
#include "edecoh/least_squares.hpp"

namespace edecoh {

/// One detector line-out at vertical position y.
struct LineOut {
  std::vector<double> x;       // m, strictly increasing
  std::vector<double> counts;  // >= 0
  double y = 0.0;              // m

  /// Throws DomainError on size mismatch, non-increasing x or bad counts.
  void validate() const;
};

/// Parameters of the line-out model
///   I(x) = A0 sinc^2(alpha (x - x0)) sum_{|n| <= n_max} G(x - x1 - n d)
///          + A_b exp(-(x - x2)^2 / (2 c3^2)),
///   G(u) = a1 exp(-u^2 / (2 c1^2)) + (1 - a1) exp(-u^2 / (2 c2^2)).
struct FitParams {
  double amplitude = 1.0;          // A0
  double alpha = 1.0;              // 1/m
  double envelope_center = 0.0;    // x0
  double comb_center = 0.0;        // x1
  double spacing = 1.0;            // d
  double mixture = 1.0;            // a1 in [0, 1]
  double width1 = 1.0;             // c1
  double width2 = 1.0;             // c2
  double background = 0.0;         // A_b
  double background_center = 0.0;  // x2
  double background_width = 1.0;   // c3
  int n_max = 4;
};

double peak_shape(const FitParams& p, double u);  // G(u)
double lineout_model(const FitParams& p, double x);
double background_term(const FitParams& p, double x);

struct FitResult {
  FitParams params;
  double w_fwhm = 0.0;          // m
  double l_coh = 0.0;           // m, grating_period * d / w_fwhm
  double grating_period = 0.0;  // m
  double residual_norm = 0.0;   // |r| / |data|
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  /// Standard errors in the field order of FitParams (NaN when singular).
  std::vector<double> std_errors;
  double condition_number = 0.0;
};

struct FitOptions {
  int n_max = 4;
  double grating_period = 100e-9;
  /// Hold d at this value instead of fitting it.
  std::optional<double> fixed_spacing;
  /// Fitted d stays within (1 +- spacing_window) of its initial estimate.
  double spacing_window = 0.5;
  LeastSquaresOptions solver;
};

/// Fewer than three peaks and no explicit initial guess.
class InsufficientStructureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The solver stopped on its iteration limit; best() holds the last iterate.
class FitError : public NumericalError {
 public:
  FitError(const std::string& what, FitResult best)
      : NumericalError(what), best_(std::move(best)) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

/// Local maxima of the smoothed line-out with prominence above 3% of its
/// range, highest first.
std::vector<std::size_t> detect_peaks(const LineOut& data);

/// Starting point from peak detection and moment estimates.
FitParams initial_guess(const LineOut& data, const FitOptions& options = {});

FitResult fit_lineout(const LineOut& data, const std::optional<FitParams>& init = {},
                      const FitOptions& options = {});

/// Fits every row; with global_spacing the rows are refit with d fixed at the
/// median of the first pass. Rows that fail carry nullopt and a message.
struct BatchFit {
  std::vector<std::optional<FitResult>> fits;
  std::vector<std::string> messages;
};
BatchFit fit_lineouts(const std::vector<LineOut>& lineouts, const FitOptions& options = {},
                      bool global_spacing = false);

/// Full width at half maximum of G by bisection on each side of the peak.
double fwhm_of_peak(const FitParams& p);
double fwhm_of_peak(double mixture, double width1, double width2);

/// a d / w_FWHM.
double coherence_length(double spacing, double w_fwhm, double grating_period);

/// Grayscale detector image, row-major with row r at Y = origin_y + r * pixel_y
/// and column c at x = origin_x + c * pixel_x.
struct DetectorImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
  double pixel_x = 1e-6;  // m
  double pixel_y = 1e-6;  // m
  double origin_x = 0.0;
  double origin_y = 0.0;

  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  double row_y(std::size_t row) const { return origin_y + static_cast<double>(row) * pixel_y; }
  double col_x(std::size_t col) const { return origin_x + static_cast<double>(col) * pixel_x; }
};

/// Sampling outside the image or an empty image.
class BoundaryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Integrates rows within bin_height of each Y center, reading row r at
/// x + (Y_r - Y_mid) tan(slant) so that a pattern skewed by that slant comes
/// out Y-independent. Without centers, bins tile the image from the bottom.
std::vector<LineOut> extract_lineouts(const DetectorImage& image, double slant,
                                      double bin_height = 4.8e-6,
                                      const std::vector<double>& centers = {});

struct DiffractogramRow {
  double y = 0.0;
  std::vector<double> x;
  std::vector<double> values;
};

struct Diffractogram {
  std::vector<DiffractogramRow> rows;  // ascending y
  int n_max = 0;
  std::vector<std::string> warnings;
};

/// Background-subtracted, per-order normalized rows. Each order owns the
/// window x1 + n d +- d/2; samples outside every window are zero.
Diffractogram build_diffractogram(const std::vector<LineOut>& lineouts,
                                  const std::vector<std::optional<FitResult>>& fits);

}  // namespace edecoh
