#include "edecoh/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "edecoh/errors.hpp"

namespace edecoh {

namespace {

double half_sum_squares(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); }

void clamp_into(std::vector<double>& p, std::span<const double> lower,
                std::span<const double> upper) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
}

}  // namespace

LeastSquaresResult levenberg_marquardt(const ResidualFunction& residuals,
                                       std::size_t num_residuals,
                                       std::vector<double> initial,
                                       std::span<const double> lower,
                                       std::span<const double> upper,
                                       const LeastSquaresOptions& options) {
  const std::size_t n = initial.size();
  if (lower.size() != n || upper.size() != n)
    throw DomainError("levenberg_marquardt: bound sizes do not match parameters");
  if (num_residuals < n)
    throw DomainError("levenberg_marquardt: fewer residuals than parameters");

  std::vector<double> p = std::move(initial);
  clamp_into(p, lower, upper);

  Eigen::VectorXd r(num_residuals);
  auto evaluate = [&](const std::vector<double>& params, Eigen::VectorXd& out) {
    residuals(params, std::span<double>(out.data(), out.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (!std::isfinite(out[i])) return std::numeric_limits<double>::infinity();
    return half_sum_squares(out);
  };

  double cost = evaluate(p, r);
  if (!std::isfinite(cost))
    throw NumericalError("levenberg_marquardt: non-finite residuals at the initial point");

  Eigen::MatrixXd jac(num_residuals, n);
  Eigen::VectorXd r_step(num_residuals);
  Eigen::VectorXd r_trial(num_residuals);
  double damping = options.initial_damping;
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());

  LeastSquaresResult result;
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    for (std::size_t j = 0; j < n; ++j) {
      double h = sqrt_eps * std::max(std::abs(p[j]), 1e-3);
      std::vector<double> shifted = p;
      if (shifted[j] + h > upper[j]) h = -h;
      shifted[j] += h;
      evaluate(shifted, r_step);
      jac.col(j) = (r_step - r) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal();
    for (Eigen::Index j = 0; j < diag.size(); ++j) diag[j] = std::max(diag[j], 1e-12);

    bool accepted = false;
    while (damping < 1e16) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += damping * diag;
      const Eigen::VectorXd step = lhs.ldlt().solve(-gradient);
      std::vector<double> trial(n);
      for (std::size_t j = 0; j < n; ++j) trial[j] = p[j] + step[j];
      clamp_into(trial, lower, upper);
      const double trial_cost = evaluate(trial, r_trial);
      if (trial_cost < cost) {
        const double decrease = cost - trial_cost;
        double moved = 0.0, size = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          moved += (trial[j] - p[j]) * (trial[j] - p[j]);
          size += p[j] * p[j];
        }
        p = std::move(trial);
        r = r_trial;
        cost = trial_cost;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        if (decrease <= options.relative_cost_tolerance * (cost + decrease) ||
            cost <= 1e-300) {
          result.converged = true;
          result.stop_reason = "relative cost change below tolerance";
        } else if (std::sqrt(moved) <= options.relative_step_tolerance * std::sqrt(size)) {
          result.converged = true;
          result.stop_reason = "relative step below tolerance";
        }
        break;
      }
      damping *= 4.0;
    }
    if (!accepted) {
      result.converged = true;
      result.stop_reason = "no further decrease possible";
    }
    if (result.converged) {
      ++iteration;
      break;
    }
  }
  if (!result.converged) result.stop_reason = "iteration limit reached";

  // Normal matrix at the final point.
  for (std::size_t j = 0; j < n; ++j) {
    double h = sqrt_eps * std::max(std::abs(p[j]), 1e-3);
    std::vector<double> shifted = p;
    if (shifted[j] + h > upper[j]) h = -h;
    shifted[j] += h;
    evaluate(shifted, r_step);
    jac.col(j) = (r_step - r) / h;
  }
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  result.normal_matrix.assign(jtj.data(), jtj.data() + jtj.size());
  result.params = std::move(p);
  result.cost = cost;
  result.iterations = iteration;
  return result;
}

std::vector<double> parameter_std_errors(const LeastSquaresResult& result,
                                         std::size_t num_residuals) {
  const std::size_t n = result.params.size();
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  if (n == 0 || result.normal_matrix.size() != n * n || num_residuals <= n) return out;
  const Eigen::Map<const Eigen::MatrixXd> jtj(result.normal_matrix.data(), n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (!lu.isInvertible()) return out;
  const Eigen::MatrixXd cov = lu.inverse();
  const double variance = 2.0 * result.cost / static_cast<double>(num_residuals - n);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = cov(j, j) * variance;
    out[j] = v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double normal_matrix_condition(const LeastSquaresResult& result) {
  const std::size_t n = result.params.size();
  if (n == 0 || result.normal_matrix.size() != n * n)
    return std::numeric_limits<double>::infinity();
  const Eigen::Map<const Eigen::MatrixXd> jtj(result.normal_matrix.data(), n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jtj, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace edecoh
