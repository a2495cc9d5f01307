#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "edecoh/analysis.hpp"
#include "edecoh/constants.hpp"
#include "support.hpp"

using namespace edecoh;
using edecoh_test::Gen;

namespace {

struct Truth {
  double spacing;
  double width1;
  double width2;
  double mixture;
  double background;
};

FitParams truth_params(const Truth& t) {
  FitParams p;
  p.amplitude = 1000.0;
  p.spacing = t.spacing;
  p.alpha = 0.45 * constants::pi / t.spacing;
  p.envelope_center = 3e-6;
  p.comb_center = 1.5e-6;
  p.mixture = t.mixture;
  p.width1 = t.width1;
  p.width2 = t.width2;
  p.background = t.background;
  p.background_center = 0.0;
  p.background_width = 150e-6;
  p.n_max = 4;
  return p;
}

LineOut synthesize(const FitParams& p, double noise, std::uint64_t seed, double step = 0.5e-6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  LineOut line;
  const double half = (p.n_max + 0.5) * p.spacing;
  for (double x = -half; x <= half; x += step) {
    line.x.push_back(x);
    const double v = lineout_model(p, x);
    line.counts.push_back(std::max(0.0, v + noise * p.amplitude * gauss(rng)));
  }
  return line;
}

}  // namespace

TEST(Fwhm, MatchesDenseScan) {
  Gen gen(41);
  for (int i = 0; i < 40; ++i) {
    const double a = gen.uniform(0.0, 1.0);
    const double c1 = gen.log_uniform(1e-7, 1e-4);
    const double c2 = c1 * gen.log_uniform(0.2, 5.0);
    const double expected = edecoh_test::fwhm_dense_scan(a, c1, c2);
    EXPECT_NEAR(fwhm_of_peak(a, c1, c2), expected, 1e-4 * expected) << a << " " << c1 << " " << c2;
  }
}

TEST(Fwhm, FrozenMixtureValue) {
  EXPECT_NEAR(fwhm_of_peak(0.5, 1.0, 2.0), 3.211402763758069, 1e-9);
  EXPECT_NEAR(fwhm_of_peak(1.0, 1.0, 7.0), std::sqrt(8.0 * std::log(2.0)), 1e-10);
  EXPECT_THROW(fwhm_of_peak(1.5, 1.0, 1.0), DomainError);
  EXPECT_THROW(fwhm_of_peak(0.5, 0.0, 1.0), DomainError);
}

TEST(CoherenceLength, WorkedValues) {
  EXPECT_NEAR(coherence_length(72e-6, 72e-6, 100e-9), 100e-9, 1e-20);
  EXPECT_NEAR(coherence_length(72e-6, 12e-6, 100e-9), 600e-9, 1e-18);
  EXPECT_THROW(coherence_length(0.0, 1.0, 1.0), DomainError);
}

TEST(CoherenceLength, ScalesInverselyWithWidth) {
  Gen gen(42);
  for (int i = 0; i < edecoh_test::kCases; ++i) {
    const double d = gen.log_uniform(1e-6, 1e-3);
    const double w = gen.log_uniform(1e-7, 1e-4);
    const double k = gen.uniform(1.1, 5.0);
    EXPECT_NEAR(coherence_length(d, w, 1e-7) / coherence_length(d, k * w, 1e-7), k, 1e-12 * k);
  }
}

TEST(Fit, NoiselessModelIsRecoveredExactly) {
  const auto truth = truth_params({72e-6, 5e-6, 9e-6, 0.6, 0.0});
  const auto line = synthesize(truth, 0.0, 1);
  const auto fit = fit_lineout(line);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(fit.residual_norm, 1e-8);
  EXPECT_NEAR(fit.params.spacing, truth.spacing, 1e-9 * truth.spacing);
  EXPECT_NEAR(fit.w_fwhm, fwhm_of_peak(truth), 1e-7 * fwhm_of_peak(truth));
}

TEST(Fit, RoundTripGridAtOnePercentNoise) {
  const std::vector<Truth> grid{
      {72e-6, 5e-6, 9e-6, 0.6, 0.0},    {72e-6, 8e-6, 8e-6, 1.0, 0.0},
      {72e-6, 12e-6, 20e-6, 0.3, 50.0}, {60e-6, 4e-6, 7e-6, 0.5, 0.0},
      {60e-6, 10e-6, 15e-6, 0.7, 20.0}, {90e-6, 6e-6, 12e-6, 0.4, 0.0},
      {90e-6, 15e-6, 22e-6, 0.8, 30.0}, {80e-6, 3e-6, 6e-6, 0.5, 0.0},
      {66e-6, 9e-6, 9e-6, 0.0, 10.0},   {75e-6, 18e-6, 25e-6, 0.6, 0.0}};
  std::uint64_t seed = 100;
  for (const auto& t : grid) {
    const auto truth = truth_params(t);
    const auto fit = fit_lineout(synthesize(truth, 0.01, seed++));
    const double w = fwhm_of_peak(truth);
    EXPECT_NEAR(fit.params.spacing, t.spacing, 0.02 * t.spacing) << t.spacing << " " << t.width1;
    EXPECT_NEAR(fit.w_fwhm, w, 0.02 * w) << t.spacing << " " << t.width1;
  }
}

TEST(Fit, InvariantUnderAffineRescaling) {
  const auto truth = truth_params({72e-6, 6e-6, 10e-6, 0.5, 0.0});
  const auto line = synthesize(truth, 0.005, 7);
  const auto base = fit_lineout(line);
  LineOut moved = line;
  for (auto& x : moved.x) x = 2.0 * x + 40e-6;
  for (auto& v : moved.counts) v *= 37.0;
  const auto fit = fit_lineout(moved);
  EXPECT_NEAR(fit.params.spacing, 2.0 * base.params.spacing, 1e-4 * fit.params.spacing);
  EXPECT_NEAR(fit.w_fwhm, 2.0 * base.w_fwhm, 1e-4 * fit.w_fwhm);
  EXPECT_NEAR(fit.l_coh, base.l_coh, 1e-4 * base.l_coh);
}

TEST(Fit, BackgroundSubtractionBarelyMovesCoherenceLength) {
  const auto truth = truth_params({72e-6, 6e-6, 11e-6, 0.5, 80.0});
  const auto line = synthesize(truth, 0.01, 9);
  const auto first = fit_lineout(line);
  LineOut cleaned = line;
  for (std::size_t i = 0; i < cleaned.x.size(); ++i)
    cleaned.counts[i] =
        std::max(0.0, cleaned.counts[i] - background_term(first.params, cleaned.x[i]));
  const auto refit = fit_lineout(cleaned);
  EXPECT_NEAR(refit.l_coh, first.l_coh, 0.005 * first.l_coh);
}

TEST(Fit, FlatLineOutHasNoStructure) {
  LineOut line;
  for (int i = 0; i < 400; ++i) {
    line.x.push_back(i * 1e-6);
    line.counts.push_back(5.0);
  }
  EXPECT_THROW(fit_lineout(line), InsufficientStructureError);
  EXPECT_THROW(initial_guess(line), InsufficientStructureError);
}

TEST(Fit, FixedSpacingIsHeld) {
  const auto truth = truth_params({72e-6, 6e-6, 10e-6, 0.5, 0.0});
  FitOptions options;
  options.fixed_spacing = 72e-6;
  const auto fit = fit_lineout(synthesize(truth, 0.01, 3), {}, options);
  EXPECT_EQ(fit.params.spacing, 72e-6);
  EXPECT_NEAR(fit.w_fwhm, fwhm_of_peak(truth), 0.02 * fwhm_of_peak(truth));
}

TEST(Fit, InvalidLineOutsAreRejected) {
  LineOut line{{0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, 0.0};
  EXPECT_THROW(line.validate(), DomainError);
  line = {{0.0, 1.0}, {1.0, -2.0}, 0.0};
  EXPECT_THROW(line.validate(), DomainError);
  line = {{0.0, 1.0}, {1.0}, 0.0};
  EXPECT_THROW(line.validate(), DomainError);
}

TEST(Peaks, FindsTheOrders) {
  const auto truth = truth_params({72e-6, 5e-6, 8e-6, 0.5, 0.0});
  const auto peaks = detect_peaks(synthesize(truth, 0.0, 1));
  ASSERT_GE(peaks.size(), 5u);
}

TEST(Lineouts, ConstantImageGivesConstantRows) {
  DetectorImage image;
  image.width = 50;
  image.height = 30;
  image.pixels.assign(50 * 30, 2.0);
  const auto lines = extract_lineouts(image, 0.0, 5e-6);
  ASSERT_EQ(lines.size(), 6u);
  for (const auto& l : lines) {
    ASSERT_EQ(l.x.size(), 50u);
    for (double v : l.counts) EXPECT_DOUBLE_EQ(v, 10.0);
  }
  EXPECT_DOUBLE_EQ(lines[0].y, 2e-6);
}

TEST(Lineouts, BoundaryErrors) {
  DetectorImage image;
  image.width = 20;
  image.height = 10;
  image.pixels.assign(200, 1.0);
  EXPECT_THROW(extract_lineouts(image, 0.0, 4e-6, {1e-6}), BoundaryError);
  EXPECT_THROW(extract_lineouts(image, 1.5, 4e-6), BoundaryError);
  EXPECT_THROW(extract_lineouts(image, 0.0, 20e-6), BoundaryError);
  DetectorImage empty;
  EXPECT_THROW(extract_lineouts(empty, 0.0, 4e-6), BoundaryError);
}

TEST(Lineouts, SlantedStripeIsStraightened) {
  DetectorImage image;
  image.width = 200;
  image.height = 40;
  image.pixels.assign(200 * 40, 0.0);
  const double slant = std::atan(0.5);
  const double mid = 0.5 * 39;
  for (std::size_t r = 0; r < image.height; ++r) {
    const double center = 100.0 + (static_cast<double>(r) - mid) * 0.5;
    for (std::size_t c = 0; c < image.width; ++c) {
      const double u = (static_cast<double>(c) - center) / 3.0;
      image.pixels[r * image.width + c] = std::exp(-0.5 * u * u);
    }
  }
  const auto lines = extract_lineouts(image, slant, 1e-6);
  auto argmax = [](const LineOut& l) {
    return l.x[std::max_element(l.counts.begin(), l.counts.end()) - l.counts.begin()];
  };
  const double ref = argmax(lines.front());
  for (const auto& l : lines) EXPECT_NEAR(argmax(l), ref, 1.01e-6);
  EXPECT_NEAR(ref, 100e-6, 1.01e-6);
}

TEST(Diffractogram, ZeroBackgroundNormalizesEachOrder) {
  const auto truth = truth_params({72e-6, 5e-6, 9e-6, 0.6, 0.0});
  auto line = synthesize(truth, 0.0, 1);
  FitResult fit;
  fit.params = truth;
  const auto gram = build_diffractogram({line}, {fit});
  ASSERT_EQ(gram.rows.size(), 1u);
  const auto& row = gram.rows[0];
  for (int n = -4; n <= 4; ++n) {
    const double lo = truth.comb_center + (n - 0.5) * truth.spacing;
    const double hi = lo + truth.spacing;
    double peak = 0.0, raw = 0.0;
    std::size_t at = 0;
    for (std::size_t k = 0; k < row.x.size(); ++k) {
      if (row.x[k] < lo || row.x[k] >= hi) continue;
      if (row.values[k] > peak) {
        peak = row.values[k];
        at = k;
      }
      raw = std::max(raw, line.counts[k]);
    }
    EXPECT_NEAR(peak, 1.0, 1e-12) << n;
    EXPECT_NEAR(line.counts[at], raw, 1e-12 * raw);
  }
}

TEST(Diffractogram, RowsSortedAndMissingFitsWarned) {
  const auto truth = truth_params({72e-6, 5e-6, 9e-6, 0.6, 0.0});
  auto a = synthesize(truth, 0.0, 1);
  auto b = a;
  auto c = a;
  a.y = 5e-6;
  b.y = 1e-6;
  c.y = 3e-6;
  FitResult fit;
  fit.params = truth;
  const auto gram = build_diffractogram({a, b, c}, {fit, fit, std::nullopt});
  ASSERT_EQ(gram.rows.size(), 2u);
  EXPECT_LT(gram.rows[0].y, gram.rows[1].y);
  EXPECT_EQ(gram.warnings.size(), 1u);
  EXPECT_THROW(build_diffractogram({a}, {}), DomainError);
}

TEST(Diffractogram, BroaderRowsStayBroader) {
  const auto narrow = truth_params({72e-6, 4e-6, 6e-6, 0.5, 0.0});
  const auto wide = truth_params({72e-6, 10e-6, 15e-6, 0.5, 0.0});
  auto low = synthesize(wide, 0.0, 1);
  auto high = synthesize(narrow, 0.0, 1);
  low.y = 0.0;
  high.y = 20e-6;
  FitResult fl, fh;
  fl.params = wide;
  fh.params = narrow;
  const auto gram = build_diffractogram({high, low}, {fh, fl});
  auto above_half = [](const DiffractogramRow& r) {
    return std::count_if(r.values.begin(), r.values.end(), [](double v) { return v > 0.5; });
  };
  EXPECT_GT(above_half(gram.rows[0]), above_half(gram.rows[1]));
}

TEST(BatchFit, GlobalSpacingUsesTheMedian) {
  std::vector<LineOut> lines;
  for (int i = 0; i < 3; ++i) {
    auto l = synthesize(truth_params({(71 + i) * 1e-6, 5e-6, 9e-6, 0.6, 0.0}), 0.0, 1);
    l.y = i * 1e-6;
    lines.push_back(l);
  }
  const auto batch = fit_lineouts(lines, {}, true);
  for (const auto& f : batch.fits) {
    ASSERT_TRUE(f.has_value());
    EXPECT_NEAR(f->params.spacing, 72e-6, 1e-3 * 72e-6);
  }
}
