#pragma once

// Forward sensitivities and exact loss gradients.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "odefit/loss.hpp"
#include "odefit/scaling.hpp"
#include "odefit/solve.hpp"

namespace odefit {

/// Integrates y together with S = dy/dtheta on the same step sequence as
/// integrate(); error control looks at y only.
inline SensitivitySolution integrate_with_sensitivities(const CompiledModel& model, std::span<const double> theta,
                                                        std::span<const double> output_times,
                                                        const SolverConfig& cfg) {
  if (cfg.method == Method::dopri5)
    return detail::run<detail::Dopri5Stepper>(model, theta, output_times, cfg, true);
  return detail::run<detail::TrBdf2Stepper>(model, theta, output_times, cfg, true);
}

struct LossGradient {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
};

/// Loss and dL/dtheta in external coordinates; (+inf, 0) on failure.
inline LossGradient loss_and_gradient(const CompiledModel& model, std::span<const double> theta, const LossPlan& plan,
                                      const SolverConfig& solver) {
  LossGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_params()));
  for (double v : theta)
    if (!std::isfinite(v)) return out;
  try {
    const auto sol = integrate_with_sensitivities(model, theta, plan.times(), solver);
    out.value = plan.evaluate(model, theta, sol.trajectory, &sol.sensitivities, &out.gradient);
  } catch (const std::invalid_argument&) {
    out.value = std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(out.value)) out.gradient.setZero();
  return out;
}

inline LossGradient loss_and_gradient(const CompiledModel& model, std::span<const double> theta,
                                      const BoundDataset& data, const std::vector<LossTerm>& terms,
                                      const SolverConfig& solver) {
  return loss_and_gradient(model, theta, LossPlan(model, data, terms), solver);
}

/// Loss and gradient with respect to internal coordinates u of `space`.
inline LossGradient loss_and_gradient_internal(const CompiledModel& model, const ParamSpace& space,
                                               std::span<const double> u, const LossPlan& plan,
                                               const SolverConfig& solver) {
  const auto theta = space.to_external(u);
  auto lg = loss_and_gradient(model, theta, plan, solver);
  for (std::size_t i = 0; i < u.size(); ++i) lg.gradient[static_cast<Eigen::Index>(i)] *= space.slope(i, u[i]);
  return lg;
}

/// Central-difference gradient in internal coordinates with step h_rel per
/// coordinate (the unit box has unit width, so h_rel is also the absolute
/// step). Truncation error is O(h_rel^2); solver noise contributes
/// O(tolerance / h_rel), so agreement with the exact gradient degrades for
/// loose tolerances.
inline Eigen::VectorXd fd_gradient(const std::function<double(std::span<const double>)>& f, std::span<const double> u,
                                   double h_rel) {
  if (!(h_rel > 0.0)) throw std::invalid_argument("step must be positive");
  Eigen::VectorXd g(static_cast<Eigen::Index>(u.size()));
  std::vector<double> x(u.begin(), u.end());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h_rel;
    const double fp = f(x);
    x[i] = xi - h_rel;
    const double fm = f(x);
    x[i] = xi;
    g[static_cast<Eigen::Index>(i)] = (fp - fm) / (2.0 * h_rel);
  }
  return g;
}

inline Eigen::VectorXd fd_gradient(const CompiledModel& model, const ParamSpace& space, std::span<const double> u,
                                   const LossPlan& plan, const SolverConfig& solver, double h_rel) {
  return fd_gradient(
      [&](std::span<const double> x) { return loss_value(model, space.to_external(x), plan, solver); }, u, h_rel);
}

}  // namespace odefit
