#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace edecoh {

/// Writes residuals r(p) into the output span (size = number of residuals).
using ResidualFunction =
    std::function<void(std::span<const double> params, std::span<double> residuals)>;

struct LeastSquaresOptions {
  int max_iterations = 500;
  /// Stop when an accepted step lowers the cost by less than this fraction.
  double relative_cost_tolerance = 1e-10;
  /// Stop when an accepted step moves the parameters by less than this,
  /// relative to their norm.
  double relative_step_tolerance = 1e-9;
  double initial_damping = 1e-3;
};

struct LeastSquaresResult {
  std::vector<double> params;
  double cost = 0.0;  // 0.5 * sum r^2
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  /// J^T J at the solution, row-major.
  std::vector<double> normal_matrix;
};

/// Box-constrained Levenberg-Marquardt with forward-difference Jacobian and
/// Marquardt diagonal scaling. Steps are projected onto [lower, upper].
/// Parameters should be scaled to order one by the caller.
LeastSquaresResult levenberg_marquardt(const ResidualFunction& residuals,
                                       std::size_t num_residuals,
                                       std::vector<double> initial,
                                       std::span<const double> lower,
                                       std::span<const double> upper,
                                       const LeastSquaresOptions& options = {});

/// Standard errors from the normal matrix, scaled by the residual variance.
/// Entries are NaN when the matrix is singular.
std::vector<double> parameter_std_errors(const LeastSquaresResult& result,
                                         std::size_t num_residuals);

/// 2-norm condition number of the normal matrix.
double normal_matrix_condition(const LeastSquaresResult& result);

}  // namespace edecoh
