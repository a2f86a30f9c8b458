#pragma once

// Deterministic deck checks, mechanical repairs and the bounded
// lint/fix loop.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "odefit/deck.hpp"
#include "odefit/expr.hpp"
#include "odefit/model.hpp"
#include "odefit/scaling.hpp"
#include "odefit/solve.hpp"

namespace odefit {

enum class Severity { critical, warning };

inline std::string_view to_string(Severity s) { return s == Severity::critical ? "critical" : "warning"; }

struct LintFinding {
  Severity severity = Severity::warning;
  std::string code;
  std::string message;
  std::string location;  // deck path, optionally with an expression span
  std::optional<std::string> fix;  // applied repair
  bool fixable = false;
  std::string subject;  // name of the offending declaration, used by auto_fix

  friend bool operator==(const LintFinding&, const LintFinding&) = default;
};

struct LintReport {
  std::vector<LintFinding> findings;
  std::size_t iterations_used = 1;

  /// No critical finding without an applied fix.
  bool clean() const {
    return std::none_of(findings.begin(), findings.end(),
                        [](const auto& f) { return f.severity == Severity::critical && !f.fix; });
  }

  std::size_t count(std::string_view code) const {
    return static_cast<std::size_t>(
        std::count_if(findings.begin(), findings.end(), [&](const auto& f) { return f.code == code; }));
  }

  bool has(std::string_view code) const { return count(code) > 0; }

  std::size_t criticals() const {
    return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(),
                                                  [](const auto& f) { return f.severity == Severity::critical; }));
  }

  friend bool operator==(const LintReport&, const LintReport&) = default;
};

/// Every rule code lint_deck can emit.
inline const std::vector<std::string>& lint_rule_codes() {
  static const std::vector<std::string> codes{
      "dataset-unreadable",  "few-rows",           "missing-column",        "nonfinite-data",
      "duplicate-time",      "nonmonotone-time",   "expression-syntax",     "undeclared-symbol",
      "missing-rhs",         "orphan-rhs",         "missing-initial",       "unknown-signal",
      "unused-parameter",    "nonfinite-bounds",   "inverted-bounds",    "zero-width-bounds",     "bounds-span-linear",
      "log-scale-nonpositive", "missing-loss",     "unbound-loss-signal",   "nonpositive-weight",
      "nonpositive-scale",   "window-empty",       "log10-nonpositive-data", "data-outside-span",
      "invalid-solver-config", "invalid-optimizer-config", "loose-stiff-tolerance", "pow-negative-base",
      "unidentifiable-state", "explicit-solver-on-stiff"};
  return codes;
}

namespace detail {

struct Linter {
  const ProblemDeck& deck;
  LintReport report;

  void add(Severity s, std::string code, std::string message, std::string location, bool fixable = false,
           std::string subject = {}) {
    report.findings.push_back({s, std::move(code), std::move(message), std::move(location), std::nullopt, fixable,
                               std::move(subject)});
  }

  const ParamDecl* param(std::string_view name) const {
    for (const auto& p : deck.parameters)
      if (p.name == name) return &p;
    return nullptr;
  }

  // Conservative sign analysis for the pow-negative-base rule.
  bool nonnegative(const ast::Node& n) const {
    return std::visit(
        [&](const auto& x) -> bool {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, ast::Constant>) {
            return x.value >= 0.0;
          } else if constexpr (std::is_same_v<T, ast::Symbol>) {
            if (const auto* p = param(x.name)) return std::min(p->lower, p->upper) >= 0.0;
            for (const auto& c : deck.constants)
              if (c.name == x.name) return c.value >= 0.0;
            return x.name == "t";
          } else if constexpr (std::is_same_v<T, ast::Unary>) {
            switch (x.op) {
              case UnaryOp::abs:
              case UnaryOp::exp:
              case UnaryOp::sqrt: return true;
              case UnaryOp::tanh: return nonnegative(*x.child);
              default: return false;
            }
          } else if constexpr (std::is_same_v<T, ast::Binary>) {
            switch (x.op) {
              case BinaryOp::add:
              case BinaryOp::mul:
              case BinaryOp::div: return nonnegative(*x.left) && nonnegative(*x.right);
              case BinaryOp::pow: return nonnegative(*x.left);
              default: return false;
            }
          } else {
            if (x.op == CallOp::max)
              return std::any_of(x.args.begin(), x.args.end(), [&](const auto& a) { return nonnegative(*a); });
            return std::all_of(x.args.begin(), x.args.end(), [&](const auto& a) { return nonnegative(*a); });
          }
        },
        n.data);
  }

  static bool integer_constant(const ast::Node& n) {
    if (const auto* c = std::get_if<ast::Constant>(&n.data)) return std::isfinite(c->value) && std::floor(c->value) == c->value;
    if (const auto* u = std::get_if<ast::Unary>(&n.data)) return u->op == UnaryOp::neg && integer_constant(*u->child);
    return false;
  }

  void check_pow(const ast::Node& n, const std::string& where) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, ast::Unary>) {
            check_pow(*x.child, where);
          } else if constexpr (std::is_same_v<T, ast::Binary>) {
            if (x.op == BinaryOp::pow && !integer_constant(*x.right) && !nonnegative(*x.left))
              add(Severity::warning, "pow-negative-base",
                  "non-integer power of a base that may become negative (NaN); consider max(base, 0)", where);
            check_pow(*x.left, where);
            check_pow(*x.right, where);
          } else if constexpr (std::is_same_v<T, ast::Call>) {
            for (const auto& a : x.args) check_pow(*a, where);
          }
        },
        n.data);
  }

  // Parses one expression, reporting syntax errors and out-of-scope symbols.
  std::optional<Expr> expression(const std::string& text, const std::string& where, const std::set<std::string>& scope,
                                 const std::string& scope_hint) {
    Expr e;
    try {
      e = parse_expr(text);
    } catch (const ExprError& err) {
      add(Severity::critical, "expression-syntax", err.what(),
          where + " [" + std::to_string(err.begin()) + ", " + std::to_string(err.end()) + ")");
      return std::nullopt;
    }
    bool ok = true;
    for (const auto& s : free_symbols(e)) {
      used_symbols.insert(s);
      if (scope.count(s)) continue;
      add(Severity::critical, "undeclared-symbol", "symbol '" + s + "' is not declared" + scope_hint, where, false, s);
      ok = false;
    }
    if (!ok) return std::nullopt;
    check_pow(e.node(), where);
    return e;
  }

  bool model_ok = true;
  std::map<std::string, std::set<std::string>> rhs_symbols;  // state -> symbols of its rhs
  std::set<std::string> used_symbols;

  void check_expressions() {
    const auto scope = deck.rhs_scope();
    std::set<std::string> states;
    for (const auto& s : deck.states) states.insert(s.name);

    for (const auto& in : deck.inputs) {
      std::set<std::string> sc{"t"};
      for (const auto& c : deck.constants) sc.insert(c.name);
      if (!expression(in.expression, "inputs/input[" + in.name + "]", sc, " (inputs may use t and constants)"))
        model_ok = false;
    }
    for (const auto& r : deck.rhs) {
      if (!states.count(r.state)) {
        add(Severity::critical, "orphan-rhs", "equation for undeclared state '" + r.state + "'",
            "rhs/equation[" + r.state + "]", false, r.state);
        model_ok = false;
        continue;
      }
      auto e = expression(r.expression, "rhs/equation[" + r.state + "]", scope, "");
      if (!e) {
        model_ok = false;
        continue;
      }
      rhs_symbols[r.state] = free_symbols(*e);
      for (const auto& s : rhs_symbols[r.state]) used_symbols.insert(s);
    }
    for (const auto& s : deck.states) {
      if (!deck.rhs_for(s.name)) {
        add(Severity::critical, "missing-rhs", "state '" + s.name + "' has no right-hand side",
            "states/state[" + s.name + "]", false, s.name);
        model_ok = false;
      }
      if (s.initial.empty()) {
        add(Severity::critical, "missing-initial", "state '" + s.name + "' has no initial condition",
            "states/state[" + s.name + "]", false, s.name);
        model_ok = false;
        continue;
      }
      std::set<std::string> sc;
      for (const auto& p : deck.parameters) sc.insert(p.name);
      for (const auto& c : deck.constants) sc.insert(c.name);
      auto e = expression(s.initial, "states/state[" + s.name + "]/initial", sc,
                          " (initial conditions may use parameters and constants)");
      if (!e) {
        model_ok = false;
        continue;
      }
      for (const auto& x : free_symbols(*e)) used_symbols.insert(x);
    }
  }

  void check_parameters() {
    for (const auto& p : deck.parameters) {
      const std::string where = "parameters/parameter[" + p.name + "]";
      if (!used_symbols.count(p.name))
        add(Severity::warning, "unused-parameter", "parameter '" + p.name + "' is declared but never used", where,
            false, p.name);
      if (!std::isfinite(p.lower) || !std::isfinite(p.upper)) {
        add(Severity::critical, "nonfinite-bounds", "bounds of '" + p.name + "' are not finite", where, false, p.name);
        continue;
      }
      if (p.lower > p.upper) {
        add(Severity::critical, "inverted-bounds",
            "lower bound " + format_double(p.lower) + " exceeds upper bound " + format_double(p.upper), where, true,
            p.name);
        continue;
      }
      if (p.lower == p.upper)
        add(Severity::warning, "zero-width-bounds",
            "bounds of '" + p.name + "' have zero width; the parameter is held constant", where, false, p.name);
      if (p.scale == ParamScale::log10 && !(p.lower > 0.0)) {
        add(Severity::critical, "log-scale-nonpositive", "log10 scale needs positive bounds", where, true, p.name);
        continue;
      }
      if (p.scale == ParamScale::linear && p.lower > 0.0 && p.upper / p.lower > 1e6)
        add(Severity::warning, "bounds-span-linear",
            "bounds span more than 6 decades on a linear scale; log10 scaling is better conditioned", where, true,
            p.name);
    }
  }

  std::optional<std::vector<double>> times;

  void check_dataset() {
    const auto& ds = deck.dataset;
    if (!ds.load_error.empty()) {
      add(Severity::critical, "dataset-unreadable", ds.load_error, "dataset[" + ds.path + "]");
      return;
    }
    if (!ds.table) return;  // not loaded; data rules are skipped
    const auto& t = *ds.table;
    if (t.rows() < 2) add(Severity::critical, "few-rows", "dataset has fewer than 2 rows", "dataset[" + ds.path + "]");
    const auto tc = t.find(ds.time_column);
    if (tc < 0) {
      add(Severity::critical, "missing-column", "time column '" + ds.time_column + "' is not in the CSV header",
          "dataset", false, ds.time_column);
    } else {
      times = t.columns[static_cast<std::size_t>(tc)];
    }
    for (const auto& b : ds.columns) {
      if (t.find(b.column) < 0)
        add(Severity::critical, "missing-column", "column '" + b.column + "' is not in the CSV header",
            "dataset/column[" + b.column + "]", false, b.column);
      const auto ref = parse_signal(b.signal);
      if (ref && deck.state_index(ref->state) < 0)
        add(Severity::critical, "unknown-signal", "column '" + b.column + "' is bound to unknown state '" + ref->state + "'",
            "dataset/column[" + b.column + "]", false, b.column);
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      for (std::size_t r = 0; r < t.columns[c].size(); ++r)
        if (!std::isfinite(t.columns[c][r])) {
          add(Severity::critical, "nonfinite-data",
              "non-finite value in column '" + t.names[c] + "' at data row " + std::to_string(r + 1), "dataset");
          r = t.columns[c].size();
        }
    if (!times) return;
    std::vector<double> sorted = *times;
    std::stable_sort(sorted.begin(), sorted.end());
    const bool has_dup = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    bool increasing = true;
    for (std::size_t i = 0; i + 1 < times->size(); ++i)
      if (!((*times)[i] < (*times)[i + 1])) increasing = false;
    if (has_dup) {
      add(Severity::critical, "duplicate-time", "dataset contains repeated time values", "dataset[" + ds.path + "]");
    } else if (!increasing) {
      add(Severity::critical, "nonmonotone-time", "dataset times are not increasing; rows can be sorted",
          "dataset[" + ds.path + "]", true);
    }
  }

  bool signal_bound(const SignalRef& ref) const {
    for (const auto& b : deck.dataset.columns)
      if (b.signal == ref.to_string()) return true;
    if (ref.rate && deck.dataset.rate_source == RateSource::finite_difference)
      for (const auto& b : deck.dataset.columns)
        if (b.signal == ref.state) return true;
    return false;
  }

  const std::vector<double>* data_for(const SignalRef& ref, std::vector<double>& scratch) const {
    if (!deck.dataset.table || !times) return nullptr;
    const auto& t = *deck.dataset.table;
    for (const auto& b : deck.dataset.columns)
      if (b.signal == ref.to_string() && t.find(b.column) >= 0) return &t.column(b.column);
    if (ref.rate)
      for (const auto& b : deck.dataset.columns)
        if (b.signal == ref.state && t.find(b.column) >= 0) {
          std::vector<std::size_t> order(times->size());
          std::iota(order.begin(), order.end(), 0);
          const auto& x = t.column(b.column);
          scratch.assign(x.size(), 0.0);
          // Differences follow the time ordering even before rows are sorted.
          std::stable_sort(order.begin(), order.end(), [&](auto a, auto c) { return (*times)[a] < (*times)[c]; });
          std::vector<double> ts, xs;
          for (auto i : order) {
            ts.push_back((*times)[i]);
            xs.push_back(x[i]);
          }
          if (ts.size() < 2) return nullptr;
          std::vector<double> d(ts.size());
          d.front() = (xs[1] - xs[0]) / (ts[1] - ts[0]);
          d.back() = (xs.back() - xs[xs.size() - 2]) / (ts.back() - ts[ts.size() - 2]);
          for (std::size_t i = 1; i + 1 < ts.size(); ++i) d[i] = (xs[i + 1] - xs[i - 1]) / (ts[i + 1] - ts[i - 1]);
          for (std::size_t k = 0; k < order.size(); ++k) scratch[order[k]] = d[k];
          return &scratch;
        }
    return nullptr;
  }

  void check_loss() {
    if (deck.loss.empty()) {
      const bool any_bound = std::any_of(deck.dataset.columns.begin(), deck.dataset.columns.end(),
                                         [&](const auto& b) { return parse_signal(b.signal).has_value(); });
      add(Severity::critical, "missing-loss", "deck declares no loss terms", "loss", any_bound);
      return;
    }
    for (std::size_t k = 0; k < deck.loss.size(); ++k) {
      const auto& term = deck.loss[k];
      const std::string where = "loss/term[" + std::to_string(k + 1) + "]";
      const auto ref = parse_signal(term.signal);
      if (!ref || deck.state_index(ref->state) < 0 || !signal_bound(*ref)) {
        add(Severity::critical, "unbound-loss-signal", "loss signal '" + term.signal + "' is not bound to a data column",
            where, false, term.signal);
        continue;
      }
      if (!(term.weight > 0.0))
        add(Severity::critical, "nonpositive-weight", "loss weight must be positive", where);
      std::vector<double> scratch;
      const auto* data = data_for(*ref, scratch);
      if (!term.scale_max_abs && !(term.scale > 0.0))
        add(Severity::critical, "nonpositive-scale", "loss scale must be positive", where);
      if (term.scale_max_abs && data &&
          std::all_of(data->begin(), data->end(), [](double v) { return v == 0.0; }))
        add(Severity::critical, "nonpositive-scale", "max_abs_of_data scale resolves to zero", where);
      if (!data) continue;
      std::size_t in_window = 0, nonpositive = 0;
      for (std::size_t i = 0; i < data->size(); ++i) {
        const double t = (*times)[i];
        if (term.window && !(t >= term.window->first && t <= term.window->second)) continue;
        ++in_window;
        if (!((*data)[i] > 0.0)) ++nonpositive;
      }
      if (in_window == 0)
        add(Severity::critical, "window-empty", "loss window contains no data samples", where);
      else if (term.transform == Transform::log10 && nonpositive > 0)
        add(Severity::warning, "log10-nonpositive-data",
            std::to_string(nonpositive) + " non-positive samples are dropped from the log10 term", where);
    }
  }

  void check_solver() {
    const auto& c = deck.solver;
    const auto n = deck.states.size();
    auto bad = [&](const std::string& msg) { add(Severity::critical, "invalid-solver-config", msg, "solver"); };
    if (!(c.rtol > 0.0)) bad("rtol must be positive");
    if (c.atol.size() != 1 && c.atol.size() != n) bad("atol must hold one value or one per state");
    if (std::any_of(c.atol.begin(), c.atol.end(), [](double a) { return !(a > 0.0); })) bad("atol must be positive");
    if (c.max_steps == 0) bad("max_steps must be at least 1");
    if (c.t1 && !(*c.t1 > c.t0)) bad("t1 must exceed t0");
    if (!c.adaptive && !(c.initial_step && *c.initial_step > 0.0)) bad("fixed-step mode needs a positive initial_step");
    if (c.initial_step && !(*c.initial_step > 0.0)) bad("initial_step must be positive");
    if (c.method == Method::tr_bdf2 &&
        (c.rtol > 1e-3 || std::any_of(c.atol.begin(), c.atol.end(), [](double a) { return a > 1e-3; })))
      add(Severity::warning, "loose-stiff-tolerance",
          "tolerances looser than 1e-3 with the stiff solver can distort gradients and fitted values", "solver");

    const auto& o = deck.optimizer;
    if (o.pso.swarm_size < 2)
      add(Severity::critical, "invalid-optimizer-config", "swarm_size must be at least 2", "optimizer/pso");
    if (o.lbfgs.memory == 0)
      add(Severity::critical, "invalid-optimizer-config", "memory must be at least 1", "optimizer/lbfgs");

    if (times && !times->empty()) {
      const auto [lo, hi] = std::minmax_element(times->begin(), times->end());
      if (*lo < c.t0)
        add(Severity::critical, "data-outside-span", "data starts before t0", "solver", false, "t0");
      else if (c.t1 && *hi > *c.t1)
        add(Severity::critical, "data-outside-span", "data extends past t1", "solver", true, "t1");
    }
  }

  void check_identifiability() {
    std::set<std::string> observed;
    for (const auto& b : deck.dataset.columns)
      if (auto ref = parse_signal(b.signal)) observed.insert(ref->state);
    for (const auto& t : deck.loss)
      if (auto ref = parse_signal(t.signal)) observed.insert(ref->state);
    // States reaching an observed state through the rhs dependency graph.
    std::set<std::string> reach = observed;
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& [state, syms] : rhs_symbols) {
        if (!reach.count(state)) continue;
        for (const auto& s : syms)
          if (deck.state_index(s) >= 0 && reach.insert(s).second) grew = true;
      }
    }
    for (const auto& s : deck.states)
      if (!reach.count(s.name))
        add(Severity::warning, "unidentifiable-state",
            "state '" + s.name + "' is not observed and does not influence any observed state",
            "states/state[" + s.name + "]", false, s.name);
  }

  void check_stiffness() {
    if (!model_ok || deck.solver.method != Method::dopri5) return;
    for (const auto& p : deck.parameters)
      if (!(p.lower <= p.upper) || (resolved_scale(p) == ParamScale::log10 && !(p.lower > 0.0))) return;
    try {
      const auto model = compile(deck);
      const auto space = ParamSpace::from_deck(deck);
      std::vector<double> mid(space.size(), 0.5);
      const auto theta = space.to_external(mid);
      SolverConfig c = deck.solver;
      if (!c.t1 && times && !times->empty()) c.t1 = *std::max_element(times->begin(), times->end());
      if (stiffness_probe(model, theta, c) == StiffnessVerdict::suggests_implicit)
        add(Severity::warning, "explicit-solver-on-stiff",
            "Jacobian spectral radius at t0 suggests a stiff system; tr_bdf2 is recommended", "solver");
    } catch (const std::exception&) {
    }
  }
};

}  // namespace detail

/// Checks a parsed deck (with its dataset loaded, if data rules should run).
inline LintReport lint_deck(const ProblemDeck& deck) {
  detail::Linter l{deck, {}};
  l.check_dataset();
  l.check_expressions();
  l.check_parameters();
  l.check_loss();
  l.check_solver();
  if (l.model_ok) l.check_identifiability();
  l.check_stiffness();
  return l.report;
}

/// Derived name of the sorted copy of a dataset.
inline std::string sorted_dataset_path(const std::string& path) {
  std::filesystem::path p(path);
  auto stem = p.stem().string();
  if (stem.size() > 7 && stem.ends_with(".sorted")) return path;
  return (p.parent_path() / (stem + ".sorted" + p.extension().string())).string();
}

struct FixResult {
  ProblemDeck deck;
  std::vector<std::string> changes;
};

/// Applies the repairs of fixable findings and marks them in `report`.
inline FixResult auto_fix(const ProblemDeck& deck, LintReport& report) {
  FixResult out{deck, {}};
  auto& d = out.deck;
  for (auto& f : report.findings) {
    if (!f.fixable || f.fix) continue;
    std::string change;
    if (f.code == "inverted-bounds") {
      for (auto& p : d.parameters)
        if (p.name == f.subject && p.lower > p.upper) {
          std::swap(p.lower, p.upper);
          change = "swapped bounds of '" + p.name + "' to [" + format_double(p.lower) + ", " + format_double(p.upper) + "]";
        }
    } else if (f.code == "bounds-span-linear") {
      for (auto& p : d.parameters)
        if (p.name == f.subject) {
          p.scale = ParamScale::log10;
          change = "set scale of '" + p.name + "' to log10";
        }
    } else if (f.code == "log-scale-nonpositive") {
      for (auto& p : d.parameters)
        if (p.name == f.subject) {
          p.scale = ParamScale::linear;
          change = "set scale of '" + p.name + "' to linear";
        }
    } else if (f.code == "nonmonotone-time" && d.dataset.table) {
      auto& t = *d.dataset.table;
      const auto tc = static_cast<std::size_t>(t.find(d.dataset.time_column));
      std::vector<std::size_t> order(t.rows());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](auto a, auto b) { return t.columns[tc][a] < t.columns[tc][b]; });
      for (auto& col : t.columns) {
        std::vector<double> c(col.size());
        for (std::size_t i = 0; i < order.size(); ++i) c[i] = col[order[i]];
        col = std::move(c);
      }
      d.dataset.path = sorted_dataset_path(d.dataset.path);
      change = "sorted dataset rows by time (written as '" + d.dataset.path + "')";
    } else if (f.code == "data-outside-span" && d.dataset.table) {
      const auto& tv = d.dataset.table->column(d.dataset.time_column);
      d.solver.t1 = *std::max_element(tv.begin(), tv.end());
      change = "extended solver t1 to the last data time " + format_double(*d.solver.t1);
    } else if (f.code == "missing-loss") {
      std::vector<std::string> signals;
      for (const auto& b : d.dataset.columns)
        if (parse_signal(b.signal) && std::find(signals.begin(), signals.end(), b.signal) == signals.end())
          signals.push_back(b.signal);
      for (const auto& s : signals) {
        LossTerm term;
        term.signal = s;
        term.weight = 1.0 / static_cast<double>(signals.size());
        d.loss.push_back(term);
      }
      if (!signals.empty()) change = "added equal-weight mean-square loss over " + std::to_string(signals.size()) + " bound signals";
    }
    if (!change.empty()) {
      f.fix = change;
      out.changes.push_back(change);
    }
  }
  return out;
}

struct LintLoopResult {
  ProblemDeck deck;
  std::vector<LintReport> reports;

  const LintReport& final_report() const { return reports.back(); }
  bool clean() const { return !reports.empty() && reports.back().clean(); }
};

/// Alternates lint_deck and auto_fix until a report is clean with nothing
/// left to repair, or the iteration budget is spent.
inline LintLoopResult lint_loop(const ProblemDeck& deck, std::size_t max_iterations, bool fix = true) {
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  LintLoopResult out{deck, {}};
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    auto report = lint_deck(out.deck);
    report.iterations_used = it;
    std::vector<std::string> changes;
    if (fix) {
      auto fixed = auto_fix(out.deck, report);
      out.deck = std::move(fixed.deck);
      changes = std::move(fixed.changes);
    }
    const bool done = changes.empty() && report.clean();
    out.reports.push_back(std::move(report));
    if (done) break;
  }
  return out;
}

inline nlohmann::ordered_json finding_to_json(const LintFinding& f) {
  nlohmann::ordered_json j;
  j["severity"] = std::string(to_string(f.severity));
  j["code"] = f.code;
  j["message"] = f.message;
  j["location"] = f.location;
  j["fixable"] = f.fixable;
  j["fix"] = f.fix ? nlohmann::ordered_json(*f.fix) : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json lint_reports_to_json(const std::vector<LintReport>& reports) {
  nlohmann::ordered_json j;
  j["clean"] = !reports.empty() && reports.back().clean();
  j["iterations_used"] = reports.size();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json jr;
    jr["iteration"] = r.iterations_used;
    jr["clean"] = r.clean();
    auto fs = nlohmann::ordered_json::array();
    for (const auto& f : r.findings) fs.push_back(finding_to_json(f));
    jr["findings"] = std::move(fs);
    arr.push_back(std::move(jr));
  }
  j["reports"] = std::move(arr);
  return j;
}

/// Line-oriented rendering of the same findings as the JSON report.
inline std::string lint_reports_to_text(const std::vector<LintReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    out += "iteration " + std::to_string(r.iterations_used) + ": " + (r.clean() ? "clean" : "not clean") + ", " +
           std::to_string(r.findings.size()) + " finding(s)\n";
    for (const auto& f : r.findings) {
      out += "  " + std::string(to_string(f.severity)) + " " + f.code + " at " + f.location + ": " + f.message + "\n";
      if (f.fix) out += "    fixed: " + *f.fix + "\n";
    }
  }
  return out;
}

}  // namespace odefit
