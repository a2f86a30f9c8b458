#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "odefit/deck.hpp"
#include "odefit/dual.hpp"
#include "odefit/expr.hpp"

namespace odefit {

/// Raised when a deck that should have been rejected by lint reaches the
/// compiler (an internal inconsistency, not a user-facing condition).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-call scratch space; one per thread of evaluation.
struct ModelWorkspace {
  std::vector<double> slots;
  std::vector<Dual> dual_slots;
  std::vector<double> stack;
  std::vector<Dual> dual_stack;
};

/// Evaluable ODE system  dy/dt = f(t, y, theta)  compiled from a deck.
///
/// Slot layout shared by all programs:
///   [ t | y_0..y_{n-1} | theta_0..theta_{m-1} | u_0..u_{k-1} | du_0..du_{k-1} ]
/// where u are the declared inputs and du their time derivatives.
/// Instances are immutable; all evaluators are const and re-entrant.
class CompiledModel {
 public:
  std::size_t n_states() const { return state_names_.size(); }
  std::size_t n_params() const { return param_names_.size(); }
  std::size_t n_inputs() const { return input_names_.size(); }
  const std::vector<std::string>& state_names() const { return state_names_; }
  const std::vector<std::string>& param_names() const { return param_names_; }
  const std::vector<std::string>& input_names() const { return input_names_; }
  bool mass_conserving() const { return mass_conserving_; }

  std::ptrdiff_t state_index(std::string_view name) const {
    for (std::size_t i = 0; i < state_names_.size(); ++i)
      if (state_names_[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  void rhs(double t, std::span<const double> y, std::span<const double> theta, std::span<double> dy,
           ModelWorkspace& ws) const {
    fill_slots(t, y, theta, ws);
    for (std::size_t i = 0; i < rhs_.size(); ++i)
      dy[i] = rhs_[i].evaluate<double>(ws.slots, ws.stack);
  }

  std::vector<double> rhs(double t, std::span<const double> y, std::span<const double> theta) const {
    ModelWorkspace ws;
    std::vector<double> dy(n_states());
    rhs(t, y, theta, dy, ws);
    return dy;
  }

  /// Jacobians df/dy (n x n) and df/dtheta (n x m), built column by column
  /// from forward-mode dual passes. Either output may be null.
  void jacobians(double t, std::span<const double> y, std::span<const double> theta, Eigen::MatrixXd* jy,
                 Eigen::MatrixXd* jtheta, ModelWorkspace& ws) const {
    fill_slots(t, y, theta, ws);
    ws.dual_slots.resize(ws.slots.size());
    for (std::size_t s = 0; s < ws.slots.size(); ++s) ws.dual_slots[s] = Dual(ws.slots[s], 0.0);
    const std::size_t n = n_states();
    const std::size_t m = n_params();
    auto column = [&](std::size_t slot, Eigen::MatrixXd& out, std::size_t col) {
      ws.dual_slots[slot].derivative = 1.0;
      for (std::size_t i = 0; i < n; ++i)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
            rhs_[i].evaluate<Dual>(ws.dual_slots, ws.dual_stack).derivative;
      ws.dual_slots[slot].derivative = 0.0;
    };
    if (jy) {
      jy->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) column(1 + j, *jy, j);
    }
    if (jtheta) {
      jtheta->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) column(1 + n + j, *jtheta, j);
    }
  }

  Eigen::MatrixXd jac_y(double t, std::span<const double> y, std::span<const double> theta) const {
    ModelWorkspace ws;
    Eigen::MatrixXd j;
    jacobians(t, y, theta, &j, nullptr, ws);
    return j;
  }

  Eigen::MatrixXd jac_theta(double t, std::span<const double> y, std::span<const double> theta) const {
    ModelWorkspace ws;
    Eigen::MatrixXd j;
    jacobians(t, y, theta, nullptr, &j, ws);
    return j;
  }

  /// Input values u(t) and their time derivatives.
  void inputs(double t, std::span<double> u, std::span<double> du, ModelWorkspace& ws) const {
    ws.dual_slots.assign(1, Dual(t, 1.0));
    for (std::size_t k = 0; k < inputs_.size(); ++k) {
      const Dual v = inputs_[k].evaluate<Dual>(ws.dual_slots, ws.dual_stack);
      u[k] = v.value;
      du[k] = v.derivative;
    }
  }

  std::pair<double, double> input(std::size_t k, double t) const {
    ModelWorkspace ws;
    std::vector<double> u(n_inputs()), du(n_inputs());
    inputs(t, u, du, ws);
    return {u.at(k), du.at(k)};
  }

  std::vector<double> initial_state(std::span<const double> theta) const {
    ModelWorkspace ws;
    std::vector<double> y0(n_states(), 0.0);
    fill_slots(0.0, y0, theta, ws);
    for (std::size_t i = 0; i < initial_.size(); ++i) y0[i] = initial_[i].evaluate<double>(ws.slots, ws.stack);
    return y0;
  }

  /// d y0 / d theta (n x m); zero when initial conditions are parameter free.
  Eigen::MatrixXd initial_sensitivity(std::span<const double> theta) const {
    ModelWorkspace ws;
    std::vector<double> y0(n_states(), 0.0);
    fill_slots(0.0, y0, theta, ws);
    ws.dual_slots.resize(ws.slots.size());
    for (std::size_t s = 0; s < ws.slots.size(); ++s) ws.dual_slots[s] = Dual(ws.slots[s], 0.0);
    const auto n = static_cast<Eigen::Index>(n_states());
    const auto m = static_cast<Eigen::Index>(n_params());
    Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      auto& seed = ws.dual_slots[1 + n_states() + static_cast<std::size_t>(j)];
      seed.derivative = 1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        s0(i, j) = initial_[static_cast<std::size_t>(i)].evaluate<Dual>(ws.dual_slots, ws.dual_stack).derivative;
      seed.derivative = 0.0;
    }
    return s0;
  }

  friend CompiledModel compile(const ProblemDeck& deck);

 private:
  void fill_slots(double t, std::span<const double> y, std::span<const double> theta, ModelWorkspace& ws) const {
    const std::size_t n = n_states(), m = n_params(), k = n_inputs();
    ws.slots.resize(1 + n + m + 2 * k);
    ws.slots[0] = t;
    std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n), ws.slots.begin() + 1);
    std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(m), ws.slots.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    if (k > 0) {
      std::span<double> u(ws.slots.data() + 1 + n + m, k);
      std::span<double> du(ws.slots.data() + 1 + n + m + k, k);
      inputs(t, u, du, ws);
    }
  }

  std::vector<std::string> state_names_;
  std::vector<std::string> param_names_;
  std::vector<std::string> input_names_;
  std::vector<Program> rhs_;
  std::vector<Program> initial_;
  std::vector<Program> inputs_;  // over slot layout [t]
  bool mass_conserving_ = false;
};

/// Compiles a lint-clean deck: parses all expressions, folds constants and
/// binds symbols to slots. Throws ModelError on inconsistencies that lint
/// should have caught.
inline CompiledModel compile(const ProblemDeck& deck) {
  CompiledModel m;
  m.mass_conserving_ = deck.mass_conserving;
  Environment constants;
  for (const auto& c : deck.constants) constants[c.name] = c.value;
  for (const auto& s : deck.states) m.state_names_.push_back(s.name);
  for (const auto& p : deck.parameters) m.param_names_.push_back(p.name);
  for (const auto& in : deck.inputs) m.input_names_.push_back(in.name);

  std::map<std::string, std::uint32_t, std::less<>> slot{{"t", 0}};
  const auto n = static_cast<std::uint32_t>(m.n_states());
  const auto np = static_cast<std::uint32_t>(m.n_params());
  const auto k = static_cast<std::uint32_t>(m.n_inputs());
  for (std::uint32_t i = 0; i < n; ++i) slot[m.state_names_[i]] = 1 + i;
  for (std::uint32_t i = 0; i < np; ++i) slot[m.param_names_[i]] = 1 + n + i;
  for (std::uint32_t i = 0; i < k; ++i) {
    slot[m.input_names_[i]] = 1 + n + np + i;
    slot[m.input_names_[i] + "_dot"] = 1 + n + np + k + i;
  }

  auto build = [&](const std::string& text, const std::string& what,
                   const std::map<std::string, std::uint32_t, std::less<>>& scope) {
    Expr e;
    try {
      e = fold_constants(parse_expr(text), constants);
    } catch (const ExprError& err) {
      throw ModelError(what + ": " + err.what());
    }
    return Program::compile(e, [&](const std::string& name) -> std::uint32_t {
      auto it = scope.find(name);
      if (it == scope.end()) throw ModelError(what + ": symbol '" + name + "' is not in scope");
      return it->second;
    });
  };

  const std::map<std::string, std::uint32_t, std::less<>> time_only{{"t", 0}};
  for (const auto& in : deck.inputs) m.inputs_.push_back(build(in.expression, "input " + in.name, time_only));

  for (const auto& s : deck.states) {
    const auto* e = deck.rhs_for(s.name);
    if (!e) throw ModelError("state '" + s.name + "' has no right-hand side");
    m.rhs_.push_back(build(e->expression, "rhs of " + s.name, slot));
  }

  std::map<std::string, std::uint32_t, std::less<>> ic_scope;
  for (std::uint32_t i = 0; i < np; ++i) ic_scope[m.param_names_[i]] = 1 + n + i;
  for (const auto& s : deck.states) {
    if (s.initial.empty()) throw ModelError("state '" + s.name + "' has no initial condition");
    m.initial_.push_back(build(s.initial, "initial condition of " + s.name, ic_scope));
  }
  return m;
}

/// Sum of all right-hand-side components; identically zero for systems
/// whose terms cancel (e.g. closed reaction networks).
inline double rhs_sum_check(const CompiledModel& model, double t, std::span<const double> y,
                            std::span<const double> theta) {
  const auto dy = model.rhs(t, y, theta);
  double s = 0.0;
  for (double v : dy) s += v;
  return s;
}

}  // namespace odefit
