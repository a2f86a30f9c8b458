#pragma once

// Calibration objective: binds a dataset to deck signals and sums the
// declared loss terms over a trajectory.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "odefit/config.hpp"
#include "odefit/deck.hpp"
#include "odefit/model.hpp"
#include "odefit/solve.hpp"

namespace odefit {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observations aligned to one strictly increasing time grid, keyed by
/// signal text ("x" or "rate(x)").
struct BoundDataset {
  std::vector<double> times;
  std::map<std::string, std::vector<double>, std::less<>> signals;

  const std::vector<double>* find(std::string_view signal) const {
    auto it = signals.find(signal);
    return it == signals.end() ? nullptr : &it->second;
  }
};

/// Centered differences, one-sided at the two ends.
inline std::vector<double> central_differences(const std::vector<double>& t, const std::vector<double>& x) {
  const std::size_t n = t.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d.front() = (x[1] - x[0]) / (t[1] - t[0]);
  d.back() = (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]);
  return d;
}

/// Maps CSV columns to signals. Uses the table loaded into the deck, or
/// reads deck.dataset.path when none is loaded.
inline BoundDataset bind_dataset(const ProblemDeck& deck) {
  DataTable table;
  if (deck.dataset.table) {
    table = *deck.dataset.table;
  } else {
    if (!deck.dataset.load_error.empty()) throw DataError(deck.dataset.load_error);
    try {
      table = read_csv_file(deck.dataset.path);
    } catch (const CsvError& e) {
      throw DataError(e.what());
    }
  }
  if (table.rows() < 2) throw DataError("fewer than 2 rows in dataset '" + deck.dataset.path + "'");
  const auto tc = table.find(deck.dataset.time_column);
  if (tc < 0) throw DataError("time column '" + deck.dataset.time_column + "' not found");

  BoundDataset out;
  out.times = table.columns[static_cast<std::size_t>(tc)];
  for (std::size_t i = 0; i + 1 < out.times.size(); ++i)
    if (!(out.times[i] < out.times[i + 1])) throw DataError("dataset times are not strictly increasing");

  for (const auto& b : deck.dataset.columns) {
    const auto c = table.find(b.column);
    if (c < 0) throw DataError("column '" + b.column + "' not found in dataset");
    out.signals[b.signal] = table.columns[static_cast<std::size_t>(c)];
  }
  if (deck.dataset.rate_source == RateSource::finite_difference) {
    for (const auto& s : deck.states) {
      const auto rate = "rate(" + s.name + ")";
      const auto* x = out.find(s.name);
      if (x && !out.find(rate)) out.signals[rate] = central_differences(out.times, *x);
    }
  }
  return out;
}

/// Positive divisor of a term's residuals.
inline double resolve_scale(const LossTerm& term, const BoundDataset& data) {
  if (!term.scale_max_abs) return term.scale;
  const auto* v = data.find(term.signal);
  double m = 0.0;
  if (v)
    for (double x : *v) m = std::max(m, std::fabs(x));
  return m;
}

inline bool in_window(const LossTerm& term, double t) {
  return !term.window || (t >= term.window->first && t <= term.window->second);
}

/// True when every transform is differentiable on the data: log10 terms
/// need strictly positive samples inside their window.
inline bool loss_gradient_ready(const std::vector<LossTerm>& terms, const BoundDataset& data) {
  for (const auto& term : terms) {
    if (term.transform != Transform::log10) continue;
    const auto* v = data.find(term.signal);
    if (!v) return false;
    for (std::size_t i = 0; i < v->size(); ++i)
      if (in_window(term, data.times[i]) && !((*v)[i] > 0.0)) return false;
  }
  return true;
}

namespace detail {

struct PreparedTerm {
  std::size_t state = 0;
  bool rate = false;
  Transform transform = Transform::identity;
  Reduction reduction = Reduction::mean_square;
  double weight = 1.0;
  double scale = 1.0;
  std::vector<std::size_t> rows;  // indices into LossPlan::times
  std::vector<double> target;     // transformed data at those rows
};

}  // namespace detail

/// Loss terms resolved against a model and dataset: the union time grid to
/// integrate on and, per term, the rows and transformed data it uses.
class LossPlan {
 public:
  LossPlan(const CompiledModel& model, const BoundDataset& data, const std::vector<LossTerm>& terms) {
    std::vector<char> used(data.times.size(), 0);
    struct Pending {
      detail::PreparedTerm term;
      std::vector<std::size_t> data_rows;
    };
    std::vector<Pending> pending;
    for (const auto& lt : terms) {
      const auto ref = parse_signal(lt.signal);
      if (!ref) throw DataError("invalid loss signal '" + lt.signal + "'");
      const auto idx = model.state_index(ref->state);
      if (idx < 0) throw DataError("loss signal '" + lt.signal + "' names no state");
      const auto* v = data.find(lt.signal);
      if (!v) throw DataError("loss signal '" + lt.signal + "' is not bound to data");
      Pending p;
      p.term.state = static_cast<std::size_t>(idx);
      p.term.rate = ref->rate;
      p.term.transform = lt.transform;
      p.term.reduction = lt.reduction;
      p.term.weight = lt.weight;
      p.term.scale = resolve_scale(lt, data);
      if (!(p.term.scale > 0.0)) throw DataError("loss scale for '" + lt.signal + "' is not positive");
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!in_window(lt, data.times[i])) continue;
        const double d = (*v)[i];
        if (lt.transform == Transform::log10 && !(d > 0.0)) continue;
        p.data_rows.push_back(i);
        p.term.target.push_back(lt.transform == Transform::log10 ? std::log10(d) : d);
        used[i] = 1;
      }
      pending.push_back(std::move(p));
    }
    std::vector<std::size_t> plan_row(data.times.size(), 0);
    for (std::size_t i = 0; i < data.times.size(); ++i)
      if (used[i]) {
        plan_row[i] = times_.size();
        times_.push_back(data.times[i]);
      }
    for (auto& p : pending) {
      for (auto r : p.data_rows) p.term.rows.push_back(plan_row[r]);
      terms_.push_back(std::move(p.term));
    }
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<detail::PreparedTerm>& terms() const { return terms_; }

  bool needs_rates() const {
    return std::any_of(terms_.begin(), terms_.end(), [](const auto& t) { return t.rate; });
  }

  /// Loss on a successful trajectory over times(). When `sens` is given,
  /// also accumulates dL/dtheta into `grad` (external coordinates).
  double evaluate(const CompiledModel& model, std::span<const double> theta, const Trajectory& traj,
                  const std::vector<Eigen::MatrixXd>* sens, Eigen::VectorXd* grad) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto n = model.n_states();
    const auto m = static_cast<Eigen::Index>(model.n_params());
    if (grad) grad->setZero(m);
    if (!traj.ok()) return inf;

    // Model-side rates come from the right-hand side at each sample.
    Eigen::MatrixXd rates;
    std::vector<Eigen::MatrixXd> rate_sens;
    if (needs_rates()) {
      ModelWorkspace ws;
      rates.resize(traj.states.rows(), static_cast<Eigen::Index>(n));
      std::vector<double> y(n), dy(n);
      Eigen::MatrixXd jy, jt;
      if (sens) rate_sens.resize(times_.size());
      for (std::size_t r = 0; r < times_.size(); ++r) {
        for (std::size_t i = 0; i < n; ++i) y[i] = traj.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
        model.rhs(times_[r], y, theta, dy, ws);
        for (std::size_t i = 0; i < n; ++i) rates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = dy[i];
        if (sens) {
          model.jacobians(times_[r], y, theta, &jy, &jt, ws);
          rate_sens[r] = jy * (*sens)[r] + jt;
        }
      }
    }

    double total = 0.0;
    Eigen::VectorXd term_grad(m);
    for (const auto& term : terms_) {
      if (term.rows.empty()) continue;
      double sum = 0.0;
      term_grad.setZero();
      for (std::size_t k = 0; k < term.rows.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(term.rows[k]);
        const auto c = static_cast<Eigen::Index>(term.state);
        const double sim = term.rate ? rates(r, c) : traj.states(r, c);
        const double tsim = term.transform == Transform::log10 ? std::log10(sim) : sim;
        const double res = (tsim - term.target[k]) / term.scale;
        if (!std::isfinite(res)) return inf;
        sum += res * res;
        if (sens) {
          const double dt = term.transform == Transform::log10 ? 1.0 / (sim * std::numbers::ln10) : 1.0;
          const auto& s = term.rate ? rate_sens[term.rows[k]] : (*sens)[term.rows[k]];
          term_grad += (res * dt / term.scale) * s.row(c).transpose();
        }
      }
      const double count = static_cast<double>(term.rows.size());
      const double mean = sum / count;
      if (term.reduction == Reduction::mean_square) {
        total += term.weight * mean;
        if (grad) *grad += (term.weight * 2.0 / count) * term_grad;
      } else {
        const double root = std::sqrt(mean);
        total += term.weight * root;
        if (grad && root > 0.0) *grad += (term.weight / (count * root)) * term_grad;
      }
    }
    if (!std::isfinite(total)) return inf;
    if (grad && !grad->allFinite()) {
      grad->setZero(m);
      return inf;
    }
    return total;
  }

 private:
  std::vector<double> times_;
  std::vector<detail::PreparedTerm> terms_;
};

/// Integrates once on the loss grid and sums the terms; +inf when the solve
/// fails or any residual is non-finite.
inline double loss_value(const CompiledModel& model, std::span<const double> theta, const LossPlan& plan,
                         const SolverConfig& solver) {
  for (double v : theta)
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
  try {
    const auto traj = integrate(model, theta, plan.times(), solver);
    return plan.evaluate(model, theta, traj, nullptr, nullptr);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline double loss_value(const CompiledModel& model, std::span<const double> theta, const BoundDataset& data,
                         const std::vector<LossTerm>& terms, const SolverConfig& solver) {
  return loss_value(model, theta, LossPlan(model, data, terms), solver);
}

}  // namespace odefit
