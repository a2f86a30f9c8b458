#pragma once

// Adaptive ODE integration: Dormand-Prince 5(4) with its 4th-order
// continuous extension, and TR-BDF2 (gamma = 2 - sqrt 2) with damped Newton,
// an error estimate filtered through the iteration matrix, and cubic Hermite
// dense output. Both optionally carry forward sensitivities S = dy/dtheta.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "odefit/config.hpp"
#include "odefit/csv.hpp"
#include "odefit/model.hpp"

namespace odefit {

enum class SolveStatus { success, max_steps_exceeded, nonfinite_state, step_underflow };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::success: return "success";
    case SolveStatus::max_steps_exceeded: return "max_steps_exceeded";
    case SolveStatus::nonfinite_state: return "nonfinite_state";
    case SolveStatus::step_underflow: return "step_underflow";
  }
  return "?";
}

struct SolveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
  std::size_t jacobian_evals = 0;
};

/// Solution sampled on the requested output grid. Rows past the point of a
/// failed solve are NaN.
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;  // n_times x n_states
  SolveStatus status = SolveStatus::success;
  SolveStats stats;

  bool ok() const { return status == SolveStatus::success; }
};

/// Trajectory plus S = dy/dtheta at every output time (n_states x n_params).
struct SensitivitySolution {
  Trajectory trajectory;
  std::vector<Eigen::MatrixXd> sensitivities;
  SolveStatus status = SolveStatus::success;

  bool ok() const { return status == SolveStatus::success; }
};

namespace detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline bool all_finite(const VectorXd& v) { return v.allFinite(); }

// Evaluates f, df/dy and df/dtheta, keeping solver statistics.
class OdeSystem {
 public:
  OdeSystem(const CompiledModel& model, std::span<const double> theta, SolveStats& stats)
      : model_(model), theta_(theta.begin(), theta.end()), stats_(stats) {}

  std::size_t n() const { return model_.n_states(); }
  std::size_t m() const { return model_.n_params(); }

  void f(double t, const VectorXd& y, VectorXd& out) {
    ++stats_.rhs_evals;
    out.resize(y.size());
    model_.rhs(t, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), theta_,
               std::span<double>(out.data(), static_cast<std::size_t>(out.size())), ws_);
  }

  void jac(double t, const VectorXd& y, MatrixXd* jy, MatrixXd* jtheta) {
    ++stats_.jacobian_evals;
    model_.jacobians(t, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), theta_, jy, jtheta,
                     ws_);
  }

  // dS/dt = J_y S + J_theta at (t, y).
  void sens_rhs(double t, const VectorXd& y, const MatrixXd& s, MatrixXd& out) {
    jac(t, y, &jy_, &jt_);
    out.noalias() = jy_ * s;
    out += jt_;
  }

 private:
  const CompiledModel& model_;
  std::vector<double> theta_;
  SolveStats& stats_;
  ModelWorkspace ws_;
  MatrixXd jy_, jt_;
};

struct Tolerances {
  double rtol;
  VectorXd atol;

  // RMS norm of v weighted by atol + rtol * max(|a|, |b|).
  double norm(const VectorXd& v, const VectorXd& a, const VectorXd& b) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double w = atol[i] + rtol * std::max(std::fabs(a[i]), std::fabs(b[i]));
      const double r = v[i] / w;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
  }
};

enum class Attempt { accepted_candidate, nonfinite, newton_failure };

class Dopri5Stepper {
 public:
  static constexpr int error_order = 4;

  Dopri5Stepper(OdeSystem& sys, bool sens) : sys_(sys), sens_(sens) {}

  void start(double t, const VectorXd& y, const MatrixXd& s) {
    t_ = t;
    y_ = y;
    sys_.f(t_, y_, k_[0]);
    if (sens_) {
      s_ = s;
      sys_.sens_rhs(t_, y_, s_, ks_[0]);
    }
  }

  double t() const { return t_; }
  const VectorXd& y() const { return y_; }
  const MatrixXd& s() const { return s_; }
  const VectorXd& f() const { return k_[0]; }

  Attempt attempt(double h, const Tolerances& tol, bool adaptive, double& err) {
    static constexpr double c[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
    static constexpr double a[7][6] = {
        {},
        {1.0 / 5.0},
        {3.0 / 40.0, 9.0 / 40.0},
        {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
        {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
        {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
        {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0}};
    static constexpr double e[7] = {71.0 / 57600.0,      0.0,          -71.0 / 16695.0, 71.0 / 1920.0,
                                    -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0};

    for (int i = 1; i < 7; ++i) {
      stage_ = y_;
      for (int j = 0; j < i; ++j)
        if (a[i][j] != 0.0) stage_ += (h * a[i][j]) * k_[j];
      if (!all_finite(stage_)) return Attempt::nonfinite;
      sys_.f(t_ + c[i] * h, stage_, k_[i]);
      if (!all_finite(k_[i])) return Attempt::nonfinite;
      if (i == 6) y_new_ = stage_;
      if (sens_) {
        stage_s_ = s_;
        for (int j = 0; j < i; ++j)
          if (a[i][j] != 0.0) stage_s_ += (h * a[i][j]) * ks_[j];
        sys_.sens_rhs(t_ + c[i] * h, stage_, stage_s_, ks_[i]);
        if (i == 6) s_new_ = stage_s_;
      }
    }
    h_ = h;
    if (!adaptive) {
      err = 0.0;
      return Attempt::accepted_candidate;
    }
    err_vec_ = (h * e[0]) * k_[0];
    for (int i = 2; i < 7; ++i) err_vec_ += (h * e[i]) * k_[i];
    err = tol.norm(err_vec_, y_, y_new_);
    return Attempt::accepted_candidate;
  }

  void accept() {
    static constexpr double d[7] = {-12715105075.0 / 11282082432.0, 0.0,
                                    87487479700.0 / 32700410799.0,  -10690763975.0 / 1880347072.0,
                                    701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0,
                                    69997945.0 / 29380423.0};
    // Continuous extension coefficients for the accepted step.
    r1_ = y_;
    r2_ = y_new_ - y_;
    r3_ = h_ * k_[0] - r2_;
    r4_ = r2_ - h_ * k_[6] - r3_;
    r5_ = (h_ * d[0]) * k_[0];
    for (int i = 2; i < 7; ++i) r5_ += (h_ * d[i]) * k_[i];
    if (sens_) {
      rs1_ = s_;
      rs2_ = s_new_ - s_;
      rs3_ = h_ * ks_[0] - rs2_;
      rs4_ = rs2_ - h_ * ks_[6] - rs3_;
      rs5_ = (h_ * d[0]) * ks_[0];
      for (int i = 2; i < 7; ++i) rs5_ += (h_ * d[i]) * ks_[i];
    }
    t_prev_ = t_;
    t_ += h_;
    y_ = y_new_;
    k_[0] = k_[6];
    if (sens_) {
      s_ = s_new_;
      ks_[0] = ks_[6];
    }
  }

  // Dense output on the last accepted step [t_prev, t].
  void dense(double tq, Eigen::Ref<VectorXd> yq, MatrixXd* sq) const {
    if (tq == t_) {
      yq = y_;
      if (sq) *sq = s_;
      return;
    }
    const double th = (tq - t_prev_) / h_;
    const double th1 = 1.0 - th;
    yq = r1_ + th * (r2_ + th1 * (r3_ + th * (r4_ + th1 * r5_)));
    if (sq) *sq = rs1_ + th * (rs2_ + th1 * (rs3_ + th * (rs4_ + th1 * rs5_)));
  }

 private:
  OdeSystem& sys_;
  bool sens_;
  double t_ = 0.0, t_prev_ = 0.0, h_ = 0.0;
  VectorXd y_, y_new_, stage_, err_vec_;
  VectorXd k_[7];
  VectorXd r1_, r2_, r3_, r4_, r5_;
  MatrixXd s_, s_new_, stage_s_;
  MatrixXd ks_[7];
  MatrixXd rs1_, rs2_, rs3_, rs4_, rs5_;
};

class TrBdf2Stepper {
 public:
  static constexpr int error_order = 2;
  static constexpr double gamma = 2.0 - 1.4142135623730951;
  static constexpr double d = gamma / 2.0;
  // BDF2 stage:  y1 - d h f(y1) = a z - b y0
  static constexpr double a = 1.0 / (gamma * (2.0 - gamma));
  static constexpr double b = (1.0 - gamma) * (1.0 - gamma) / (gamma * (2.0 - gamma));
  // Local truncation error constant of the pair.
  static constexpr double lte = (-3.0 * gamma * gamma + 4.0 * gamma - 2.0) / (12.0 * (2.0 - gamma));
  static constexpr double newton_tol = 1e-3;
  static constexpr int newton_max_iter = 10;

  TrBdf2Stepper(OdeSystem& sys, bool sens) : sys_(sys), sens_(sens) {}

  void start(double t, const VectorXd& y, const MatrixXd& s) {
    t_ = t;
    y_ = y;
    sys_.f(t_, y_, f0_);
    jac_valid_ = false;
    if (sens_) {
      s_ = s;
      sys_.jac(t_, y_, &j0_, &jt0_);
      jac_valid_ = true;
      sdot_ = j0_ * s_ + jt0_;
    }
  }

  double t() const { return t_; }
  const VectorXd& y() const { return y_; }
  const MatrixXd& s() const { return s_; }
  const VectorXd& f() const { return f0_; }

  Attempt attempt(double h, const Tolerances& tol, bool adaptive, double& err) {
    if (!jac_valid_) {
      sys_.jac(t_, y_, &j0_, sens_ ? &jt0_ : nullptr);
      jac_valid_ = true;
    }
    iter_.noalias() = -(d * h) * j0_;
    iter_.diagonal().array() += 1.0;
    lu_.compute(iter_);

    // Trapezoidal stage to t + gamma h.
    rhs_const_ = y_ + (d * h) * f0_;
    z_ = y_ + (gamma * h) * f0_;
    if (!newton(t_ + gamma * h, h, z_, fz_, tol)) return last_nonfinite_ ? Attempt::nonfinite : Attempt::newton_failure;

    // BDF2 stage to t + h, predicted by extrapolating the stage slope.
    rhs_const_ = a * z_ - b * y_;
    y_new_ = z_ + ((1.0 - gamma) * h) * fz_;
    if (!newton(t_ + h, h, y_new_, f1_, tol)) return last_nonfinite_ ? Attempt::nonfinite : Attempt::newton_failure;

    h_ = h;
    if (!adaptive) {
      err = 0.0;
      return Attempt::accepted_candidate;
    }
    est_ = (2.0 * lte * h) * (f0_ / gamma - fz_ / (gamma * (1.0 - gamma)) + f1_ / (1.0 - gamma));
    est_ = lu_.solve(est_);
    if (!all_finite(est_)) return Attempt::nonfinite;
    err = tol.norm(est_, y_, y_new_);
    return Attempt::accepted_candidate;
  }

  void accept() {
    if (sens_) {
      const double dh = d * h_;
      // Stage sensitivities solve the linearized stage equations exactly.
      sys_.jac(t_ + gamma * h_, z_, &jg_, &jtg_);
      iter_.noalias() = -dh * jg_;
      iter_.diagonal().array() += 1.0;
      lu_.compute(iter_);
      sz_ = lu_.solve(s_ + dh * (sdot_ + jtg_));
      sys_.jac(t_ + h_, y_new_, &j1_, &jt1_);
      iter_.noalias() = -dh * j1_;
      iter_.diagonal().array() += 1.0;
      lu_.compute(iter_);
      s_new_ = lu_.solve(a * sz_ - b * s_ + dh * jt1_);
      sdot_new_ = j1_ * s_new_ + jt1_;
    }
    t_prev_ = t_;
    y_prev_ = y_;
    f_prev_ = f0_;
    t_ += h_;
    y_ = y_new_;
    f0_ = f1_;
    jac_valid_ = false;
    if (sens_) {
      s_prev_ = s_;
      sdot_prev_ = sdot_;
      s_ = s_new_;
      sdot_ = sdot_new_;
      // The end-point Jacobian doubles as the next step's iteration Jacobian.
      j0_ = j1_;
      jt0_ = jt1_;
      jac_valid_ = true;
    }
  }

  // Cubic Hermite interpolation on the last accepted step.
  void dense(double tq, Eigen::Ref<VectorXd> yq, MatrixXd* sq) const {
    if (tq == t_) {
      yq = y_;
      if (sq) *sq = s_;
      return;
    }
    const double h = t_ - t_prev_;
    const double s = (tq - t_prev_) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    yq = h00 * y_prev_ + (h10 * h) * f_prev_ + h01 * y_ + (h11 * h) * f0_;
    if (sq) *sq = h00 * s_prev_ + (h10 * h) * sdot_prev_ + h01 * s_ + (h11 * h) * sdot_;
  }

 private:
  // Solves x - d h f(tx, x) = rhs_const_ by damped Newton with the frozen
  // iteration matrix. On success fx holds f(tx, x) at the returned x.
  bool newton(double tx, double h, VectorXd& x, VectorXd& fx, const Tolerances& tol) {
    last_nonfinite_ = false;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < newton_max_iter; ++k) {
      sys_.f(tx, x, fx);
      if (!all_finite(fx)) {
        last_nonfinite_ = true;
        return false;
      }
      res_ = x - (d * h) * fx - rhs_const_;
      dx_ = lu_.solve(res_);
      const double norm = tol.norm(dx_, x, x);
      if (!std::isfinite(norm)) {
        last_nonfinite_ = true;
        return false;
      }
      if (k > 0 && norm > prev) {
        // Damping: take half the correction once the iteration stops contracting.
        if (norm > 2.0 * prev) return false;
        x -= 0.5 * dx_;
      } else {
        x -= dx_;
      }
      if (norm <= newton_tol) {
        sys_.f(tx, x, fx);
        if (!all_finite(fx)) {
          last_nonfinite_ = true;
          return false;
        }
        return true;
      }
      prev = norm;
    }
    return false;
  }

  OdeSystem& sys_;
  bool sens_;
  bool jac_valid_ = false;
  bool last_nonfinite_ = false;
  double t_ = 0.0, t_prev_ = 0.0, h_ = 0.0;
  VectorXd y_, y_new_, y_prev_, f0_, f1_, f_prev_, z_, fz_, rhs_const_, res_, dx_, est_;
  MatrixXd j0_, jt0_, jg_, jtg_, j1_, jt1_, iter_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  MatrixXd s_, s_new_, s_prev_, sz_, sdot_, sdot_new_, sdot_prev_;
};

// Initial step selection for a method whose error estimate is O(h^(order+1)).
inline double initial_step(OdeSystem& sys, double t0, const VectorXd& y0, const VectorXd& f0, double span,
                           const Tolerances& tol, int order) {
  const VectorXd zero = VectorXd::Zero(y0.size());
  const double d0 = tol.norm(y0, y0, zero);
  const double d1 = tol.norm(f0, y0, zero);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  VectorXd y1 = y0 + h0 * f0;
  VectorXd f1;
  sys.f(t0 + h0, y1, f1);
  if (!f1.allFinite()) return h0 * 1e-3;
  const double d2 = tol.norm(VectorXd(f1 - f0), y0, zero) / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / (order + 1));
  return std::min({100.0 * h0, h1, span});
}

template <class Stepper>
SensitivitySolution run(const CompiledModel& model, std::span<const double> theta, std::span<const double> times,
                        const SolverConfig& cfg, bool sens) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const auto m = static_cast<Eigen::Index>(model.n_params());
  if (theta.size() != model.n_params()) throw std::invalid_argument("parameter vector has wrong length");
  if (!(cfg.rtol > 0.0)) throw std::invalid_argument("rtol must be positive");
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (!(times[i] < times[i + 1])) throw std::invalid_argument("output times must be strictly increasing");
  if (!times.empty() && times.front() < cfg.t0) throw std::invalid_argument("output time precedes t0");
  if (!times.empty() && cfg.t1 && times.back() > *cfg.t1) throw std::invalid_argument("output time exceeds t1");

  SensitivitySolution out;
  auto& traj = out.trajectory;
  traj.times.assign(times.begin(), times.end());
  traj.states = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(times.size()), n,
                                          std::numeric_limits<double>::quiet_NaN());
  if (sens) out.sensitivities.assign(times.size(), MatrixXd::Constant(n, m, std::numeric_limits<double>::quiet_NaN()));

  auto finish = [&](SolveStatus st) {
    traj.status = st;
    out.status = st;
    return out;
  };

  Tolerances tol{cfg.rtol, VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    tol.atol[i] = cfg.atol_for(static_cast<std::size_t>(i));
    if (!(tol.atol[i] > 0.0)) throw std::invalid_argument("atol must be positive");
  }

  OdeSystem sys(model, theta, traj.stats);
  const auto y0v = model.initial_state(theta);
  VectorXd y0 = Eigen::Map<const VectorXd>(y0v.data(), n);
  MatrixXd s0 = sens ? model.initial_sensitivity(theta) : MatrixXd();
  if (!y0.allFinite()) return finish(SolveStatus::nonfinite_state);

  std::size_t next = 0;
  while (next < times.size() && times[next] == cfg.t0) {
    traj.states.row(static_cast<Eigen::Index>(next)) = y0.transpose();
    if (sens) out.sensitivities[next] = s0;
    ++next;
  }
  if (next == times.size()) return finish(SolveStatus::success);

  Stepper stepper(sys, sens);
  stepper.start(cfg.t0, y0, s0);
  if (!stepper.f().allFinite()) return finish(SolveStatus::nonfinite_state);

  const double t_end = times.back();
  const double span = t_end - cfg.t0;
  double h = cfg.initial_step ? *cfg.initial_step
                              : initial_step(sys, cfg.t0, y0, stepper.f(), span, tol, Stepper::error_order);
  if (!cfg.adaptive && !(cfg.initial_step && *cfg.initial_step > 0.0))
    throw std::invalid_argument("fixed-step integration needs a positive initial_step");

  const auto& ctl = cfg.controller;
  const double expo_a = ctl.pi_alpha / (Stepper::error_order + 1);
  const double expo_b = ctl.pi_beta / (Stepper::error_order + 1);
  double err_prev = 1e-4;
  bool last_rejected = false;
  int nonfinite_halvings = 0;
  std::size_t attempts = 0;
  VectorXd yq(n);
  MatrixXd sq;

  while (stepper.t() < t_end) {
    if (attempts >= cfg.max_steps) return finish(SolveStatus::max_steps_exceeded);
    ++attempts;
    const double t = stepper.t();
    if (t + (cfg.adaptive ? 1.01 : 1.0 + 1e-9) * h >= t_end) h = t_end - t;
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(t), 1e-300) || !(h > 0.0))
      return finish(SolveStatus::step_underflow);

    double err = 0.0;
    const Attempt res = stepper.attempt(h, tol, cfg.adaptive, err);
    if (res == Attempt::nonfinite) {
      ++traj.stats.rejected;
      if (++nonfinite_halvings > 20) return finish(SolveStatus::nonfinite_state);
      h *= 0.5;
      last_rejected = true;
      continue;
    }
    if (res == Attempt::newton_failure) {
      ++traj.stats.rejected;
      h *= 0.5;
      last_rejected = true;
      continue;
    }
    nonfinite_halvings = 0;

    if (cfg.adaptive && err > 1.0) {
      ++traj.stats.rejected;
      const double fac = std::max(ctl.min_factor, ctl.safety * std::pow(err, -expo_a));
      h *= std::min(1.0, fac);
      last_rejected = true;
      continue;
    }

    stepper.accept();
    ++traj.stats.accepted;
    while (next < times.size() && times[next] <= stepper.t()) {
      stepper.dense(times[next], yq, sens ? &sq : nullptr);
      traj.states.row(static_cast<Eigen::Index>(next)) = yq.transpose();
      if (sens) out.sensitivities[next] = sq;
      ++next;
    }

    if (cfg.adaptive) {
      const double e = std::max(err, 1e-10);
      double fac = ctl.safety * std::pow(e, -expo_a) * std::pow(err_prev, expo_b);
      fac = std::clamp(fac, ctl.min_factor, ctl.max_factor);
      if (last_rejected) fac = std::min(fac, 1.0);
      err_prev = std::max(err, 1e-4);
      h *= fac;
    }
    last_rejected = false;
  }
  return finish(SolveStatus::success);
}

}  // namespace detail

/// Integrates the model and samples the solution on `output_times` with
/// the method's dense output. Failures are reported through the status.
inline Trajectory integrate(const CompiledModel& model, std::span<const double> theta,
                            std::span<const double> output_times, const SolverConfig& cfg) {
  if (cfg.method == Method::dopri5)
    return detail::run<detail::Dopri5Stepper>(model, theta, output_times, cfg, false).trajectory;
  return detail::run<detail::TrBdf2Stepper>(model, theta, output_times, cfg, false).trajectory;
}

enum class StiffnessVerdict { suggests_implicit, suggests_explicit };

/// Spectral radius of df/dy, estimated by power iteration.
inline double spectral_radius_estimate(const Eigen::MatrixXd& j) {
  const auto n = j.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  v.normalize();
  double log_sum = 0.0;
  int counted = 0;
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd w = j * v;
    const double g = w.norm();
    if (!(g > 0.0) || !std::isfinite(g)) return std::isfinite(g) ? 0.0 : std::numeric_limits<double>::infinity();
    if (k >= 100) {
      log_sum += std::log(g);
      ++counted;
    }
    v = w / g;
  }
  return std::exp(log_sum / counted);
}

/// Heuristic stiffness check at t0: an explicit method needs on the order of
/// rho * (t1 - t0) steps for stability alone; above 500 an implicit method
/// is suggested.
inline StiffnessVerdict stiffness_probe(const CompiledModel& model, std::span<const double> theta,
                                        const SolverConfig& cfg) {
  const auto y0 = model.initial_state(theta);
  const Eigen::MatrixXd j = model.jac_y(cfg.t0, y0, theta);
  const double span = cfg.t1 ? *cfg.t1 - cfg.t0 : 1.0;
  return spectral_radius_estimate(j) * span > 500.0 ? StiffnessVerdict::suggests_implicit
                                                     : StiffnessVerdict::suggests_explicit;
}

/// CSV with a time column followed by one column per state.
inline std::string trajectory_to_csv(const Trajectory& traj, const std::vector<std::string>& state_names,
                                     const std::string& time_name = "t") {
  DataTable t;
  t.names.push_back(time_name);
  t.columns.push_back(traj.times);
  for (std::size_t i = 0; i < state_names.size(); ++i) {
    t.names.push_back(state_names[i]);
    std::vector<double> col(traj.times.size());
    for (std::size_t r = 0; r < col.size(); ++r)
      col[r] = traj.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
    t.columns.push_back(std::move(col));
  }
  return to_csv(t);
}

}  // namespace odefit
