#pragma once

#include <functional>
#include <span>
#include <vector>

namespace qpower::fit {

using Model = std::function<double(double t, std::span<const double> params)>;

struct LeastSquaresOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-12;
};

struct LeastSquaresResult {
  std::vector<double> params;
  std::vector<double> std_errors;  // sqrt(diag(sigma^2 (J^T J)^-1))
  double ssr = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt with a forward-difference Jacobian and Marquardt
// diagonal scaling.
LeastSquaresResult levenberg_marquardt(const Model& model, std::span<const double> t,
                                       std::span<const double> y, std::vector<double> initial,
                                       const LeastSquaresOptions& opts = {});

}  // namespace qpower::fit
