#pragma once

// Projected L-BFGS with Armijo backtracking on a box.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "odefit/config.hpp"
#include "odefit/sens.hpp"

namespace odefit {

/// Objective returning f(x) and writing df/dx into grad.
using Objective = std::function<double(std::span<const double>, Eigen::VectorXd&)>;

struct LbfgsRow {
  std::size_t iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;    // infinity norm of the projected gradient
  double step_length = 0.0;  // accepted alpha, 0 for the starting row
  double slope = 0.0;        // g . (x_new - x) of the accepted step
  double previous_loss = 0.0;
};

struct LbfgsResult {
  std::vector<double> x;  // best point seen
  double loss = std::numeric_limits<double>::infinity();
  std::vector<LbfgsRow> history;
  std::string status;
};

inline constexpr double armijo_c = 1e-4;
inline constexpr double armijo_contraction = 0.5;
inline constexpr int armijo_max_backtracks = 30;

namespace detail {

inline double projected_grad_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi) {
  double n = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double pg = g[i];
    if (x[i] <= lo[i] && pg > 0.0) pg = 0.0;
    if (x[i] >= hi[i] && pg < 0.0) pg = 0.0;
    n = std::max(n, std::fabs(pg));
  }
  return n;
}

}  // namespace detail

/// Minimizes f over lo <= x <= hi starting from x0 (projected into the box).
/// Stops on projected-gradient norm <= grad_tolerance, relative loss change
/// <= loss_rel_tolerance over 5 iterations, max_iterations, or a failed line
/// search. Always returns the best point seen.
inline LbfgsResult minimize_box(const Objective& f, std::span<const double> x0, std::span<const double> lower,
                                std::span<const double> upper, const LbfgsConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(x0.size());
  Eigen::VectorXd lo = Eigen::Map<const Eigen::VectorXd>(lower.data(), n);
  Eigen::VectorXd hi = Eigen::Map<const Eigen::VectorXd>(upper.data(), n);
  auto project = [&](Eigen::VectorXd v) {
    v = v.cwiseMax(lo).cwiseMin(hi);
    return v;
  };
  Eigen::VectorXd x = project(Eigen::Map<const Eigen::VectorXd>(x0.data(), n));
  Eigen::VectorXd g(n), g_new(n);
  // The search runs on f scaled by a power of two close to 1 / |f(x0)|, so
  // the curvature threshold is independent of the objective's magnitude and
  // reported values unscale exactly.
  double scale = 1.0;
  auto call = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
    grad.setZero(n);
    const double v = f(std::span<const double>(p.data(), static_cast<std::size_t>(n)), grad);
    grad *= scale;
    return v * scale;
  };
  double fx = call(x, g);
  if (!std::isfinite(fx)) throw std::runtime_error("refinement requires feasible start");
  if (fx != 0.0) {
    int e = 0;
    std::frexp(fx, &e);
    scale = std::ldexp(1.0, -e);
    fx *= scale;
    g *= scale;
  }
  const double unscale = 1.0 / scale;

  LbfgsResult out;
  out.x.assign(x.data(), x.data() + n);
  out.loss = fx * unscale;
  out.history.push_back({0, out.loss, detail::projected_grad_norm(x, g, lo, hi) * unscale, 0.0, 0.0, out.loss});
  out.status = "max_iterations";

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  for (std::size_t k = 1; k <= cfg.max_iterations; ++k) {
    if (detail::projected_grad_norm(x, g, lo, hi) * unscale <= cfg.grad_tolerance) {
      out.status = "converged: projected gradient";
      break;
    }
    // Two-loop recursion for d = -H g.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd d = -q;
    // Components pushing into an active bound do not move.
    for (Eigen::Index i = 0; i < n; ++i)
      if ((x[i] <= lo[i] && d[i] < 0.0) || (x[i] >= hi[i] && d[i] > 0.0)) d[i] = 0.0;
    if (!(g.dot(d) < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      for (Eigen::Index i = 0; i < n; ++i)
        if ((x[i] <= lo[i] && d[i] < 0.0) || (x[i] >= hi[i] && d[i] > 0.0)) d[i] = 0.0;
    }
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0)) {
      out.status = "converged: projected gradient";
      break;
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / dmax) : 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new(n);
    double f_new = 0.0, slope = 0.0;
    for (int b = 0; b <= armijo_max_backtracks; ++b) {
      x_new = project(x + step * d);
      slope = g.dot(x_new - x);
      if (!(slope < 0.0)) break;
      f_new = call(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + armijo_c * slope) {
        accepted = true;
        break;
      }
      step *= armijo_contraction;
    }
    if (!accepted) {
      out.status = "line search failed";
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    // Curvature pairs are kept when s.y > 1e-10 |s| |y|. The relative form
    // stays meaningful when steps along a flat valley are tiny.
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double f_prev = fx;
    x = x_new;
    g = g_new;
    fx = f_new;
    out.history.push_back({k, fx * unscale, detail::projected_grad_norm(x, g, lo, hi) * unscale, step,
                           slope * unscale, f_prev * unscale});
    if (fx * unscale < out.loss) {
      out.loss = fx * unscale;
      out.x.assign(x.data(), x.data() + n);
    }
    if (k >= 5) {
      const double old = out.history[out.history.size() - 6].loss;
      const double now = fx * unscale;
      if (std::fabs(old - now) <= cfg.loss_rel_tolerance * std::max(std::fabs(now), 1e-300)) {
        out.status = "converged: relative loss change";
        break;
      }
    }
  }
  return out;
}

struct RefineResult {
  std::vector<double> theta;  // external coordinates
  std::vector<double> u;      // internal coordinates
  double loss = std::numeric_limits<double>::infinity();
  std::vector<LbfgsRow> history;
  std::string status;
};

/// L-BFGS refinement in internal coordinates from internal start u0.
inline RefineResult refine_internal(const CompiledModel& model, const LossPlan& plan, const ParamSpace& space,
                                    const SolverConfig& solver, std::span<const double> u0, const LbfgsConfig& cfg) {
  const std::vector<double> lo(space.size(), 0.0), hi(space.size(), 1.0);
  const auto res = minimize_box(
      [&](std::span<const double> u, Eigen::VectorXd& grad) {
        auto lg = loss_and_gradient_internal(model, space, u, plan, solver);
        grad = lg.gradient;
        return lg.value;
      },
      u0, lo, hi, cfg);
  RefineResult out;
  out.u = res.x;
  out.theta = space.to_external(res.x);
  out.loss = res.loss;
  out.history = res.history;
  out.status = res.status;
  return out;
}

/// L-BFGS refinement from external start theta0.
inline RefineResult refine(const CompiledModel& model, const LossPlan& plan, const ParamSpace& space,
                           const SolverConfig& solver, std::span<const double> theta0, const LbfgsConfig& cfg) {
  if (!space.contains(theta0)) throw std::invalid_argument("refinement start lies outside the bounds");
  const auto u0 = space.to_internal(theta0);
  return refine_internal(model, plan, space, solver, u0, cfg);
}

}  // namespace odefit
