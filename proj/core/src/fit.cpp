#include "qpower/fit.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "qpower/errors.hpp"

namespace qpower::fit {

namespace {

Eigen::VectorXd residuals(const Model& model, std::span<const double> t, std::span<const double> y,
                          const std::vector<double>& p) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) r(static_cast<Eigen::Index>(i)) = model(t[i], p) - y[i];
  return r;
}

Eigen::MatrixXd jacobian(const Model& model, std::span<const double> t, std::vector<double> p,
                         const Eigen::VectorXd& r0, std::span<const double> y) {
  Eigen::MatrixXd jac(r0.size(), static_cast<Eigen::Index>(p.size()));
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double saved = p[j];
    const double h = 1e-7 * std::max(std::abs(saved), 1e-3);
    p[j] = saved + h;
    jac.col(static_cast<Eigen::Index>(j)) = (residuals(model, t, y, p) - r0) / h;
    p[j] = saved;
  }
  return jac;
}

}  // namespace

LeastSquaresResult levenberg_marquardt(const Model& model, std::span<const double> t,
                                       std::span<const double> y, std::vector<double> initial,
                                       const LeastSquaresOptions& opts) {
  if (t.size() != y.size()) throw DomainError("abscissa and data lengths differ");
  if (t.size() < initial.size()) throw DomainError("fewer data points than parameters");

  LeastSquaresResult out;
  out.params = std::move(initial);
  Eigen::VectorXd r = residuals(model, t, y, out.params);
  double ssr = r.squaredNorm();
  if (!std::isfinite(ssr)) throw FitError("model not finite at the initial guess");

  double lambda = 1e-3;
  const auto np = static_cast<Eigen::Index>(out.params.size());
  for (out.iterations = 0; out.iterations < opts.max_iterations; ++out.iterations) {
    const Eigen::MatrixXd jac = jacobian(model, t, out.params, r, y);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index k = 0; k < np; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      std::vector<double> trial = out.params;
      for (Eigen::Index k = 0; k < np; ++k) trial[static_cast<std::size_t>(k)] += step(k);
      const Eigen::VectorXd r_trial = residuals(model, t, y, trial);
      const double ssr_trial = r_trial.squaredNorm();
      if (std::isfinite(ssr_trial) && ssr_trial <= ssr) {
        const double improvement = ssr - ssr_trial;
        double step_rel = 0.0;
        for (Eigen::Index k = 0; k < np; ++k) {
          step_rel = std::max(step_rel, std::abs(step(k)) / std::max(std::abs(trial[static_cast<std::size_t>(k)]), 1e-12));
        }
        out.params = std::move(trial);
        r = r_trial;
        ssr = ssr_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (improvement <= opts.relative_tolerance * ssr || step_rel < 1e-12 || ssr == 0.0) {
          out.converged = true;
        }
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      // No downhill step left: we sit at a minimum to working precision.
      out.converged = true;
    }
    if (out.converged) break;
  }

  out.ssr = ssr;
  const Eigen::MatrixXd jac = jacobian(model, t, out.params, r, y);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const double dof = static_cast<double>(t.size()) - static_cast<double>(np);
  const double sigma2 = dof > 0.0 ? ssr / dof : 0.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  out.std_errors.assign(out.params.size(), std::numeric_limits<double>::infinity());
  if (lu.isInvertible()) {
    const Eigen::MatrixXd cov = lu.inverse() * sigma2;
    for (Eigen::Index k = 0; k < np; ++k) out.std_errors[static_cast<std::size_t>(k)] = std::sqrt(std::max(cov(k, k), 0.0));
  }
  return out;
}

}  // namespace qpower::fit
