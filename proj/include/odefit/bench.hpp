#pragma once

// Shipped calibration problems: decks, data grids and synthetic data
// generators.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "odefit/csv.hpp"
#include "odefit/deck.hpp"
#include "odefit/model.hpp"
#include "odefit/pso.hpp"
#include "odefit/solve.hpp"

namespace odefit {

struct NoiseSpec {
  std::string column;
  double sd = 0.0;
  bool multiplicative = false;  // value * exp(sd * N(0,1)) instead of value + sd * N(0,1)
};

struct BenchmarkCase {
  std::string name;
  std::string deck_file;  // file name of the deck inside benchmarks/<name>/
  std::string deck_xml;
  // Parameters generating the data: the true values for synthetic cases,
  // stand-in values for the experiment-shaped fixtures.
  std::vector<std::pair<std::string, double>> truth;
  bool synthetic = true;  // false: stand-in for external experimental data
  std::vector<double> times;
  std::vector<NoiseSpec> noise;
  // Data columns in output order: "t" followed by state or rate(state) signals.
  std::vector<std::pair<std::string, std::string>> columns;  // (column name, signal)
  SolverConfig reference;  // tight solver used to generate data
  std::uint64_t seed = 7;

  ProblemDeck deck() const { return parse_deck(deck_xml); }

  std::vector<double> truth_values() const {
    std::vector<double> v;
    for (const auto& p : truth) v.push_back(p.second);
    return v;
  }
};

namespace detail {

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = b;
  return v;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
  auto e = linspace(a, b, n);
  for (auto& x : e) x = std::pow(10.0, x);
  return e;
}

inline SolverConfig reference_solver(Method m, std::vector<double> atol) {
  SolverConfig c;
  c.method = m;
  c.rtol = 1e-10;
  c.atol = std::move(atol);
  c.max_steps = 2000000;
  return c;
}

inline const char* robertson_xml = R"xml(<deck name="robertson" mass_conserving="true">
  <states>
    <state name="y1" initial="1"/>
    <state name="y2" initial="0"/>
    <state name="y3" initial="0"/>
  </states>
  <parameters>
    <parameter name="k1" lower="0.001" upper="1" scale="log10"/>
    <parameter name="k2" lower="100000" upper="1000000000" scale="log10"/>
    <parameter name="k3" lower="100" upper="1000000" scale="log10"/>
  </parameters>
  <rhs>
    <equation state="y1">-k1*y1 + k3*y2*y3</equation>
    <equation state="y2">k1*y1 - k3*y2*y3 - k2*y2^2</equation>
    <equation state="y3">k2*y2^2</equation>
  </rhs>
  <dataset path="robertson.csv" time_column="t">
    <column name="y1" signal="y1"/>
    <column name="y2" signal="y2"/>
    <column name="y3" signal="y3"/>
  </dataset>
  <loss>
    <term signal="y1" weight="0.3333333333333333"/>
    <term signal="y2" weight="0.3333333333333333"/>
    <term signal="y3" weight="0.3333333333333333"/>
  </loss>
  <solver method="tr_bdf2" rtol="1e-8" atol="1e-10 1e-14 1e-10" t0="0" t1="100000"/>
  <optimizer>
    <pso swarm_size="64" iterations="300" w="0.7" c1="1.5" c2="1.5" seed="7"/>
    <lbfgs max_iterations="200" memory="10" grad_tolerance="1e-10" loss_rel_tolerance="1e-12"/>
  </optimizer>
  <outputs>params loss_history trajectory report</outputs>
</deck>
)xml";

inline const char* vanderpol_xml = R"xml(<deck name="vanderpol">
  <states>
    <state name="x1" initial="2"/>
    <state name="x2" initial="0"/>
  </states>
  <parameters>
    <parameter name="mu" lower="1" upper="30" scale="linear"/>
  </parameters>
  <rhs>
    <equation state="x1">mu*(x2 - (x1^3/3 - x1))</equation>
    <equation state="x2">-x1/mu</equation>
  </rhs>
  <dataset path="vanderpol.csv" time_column="t">
    <column name="x1" signal="x1"/>
    <column name="x2" signal="x2"/>
  </dataset>
  <loss>
    <term signal="x1" weight="0.5"/>
    <term signal="x2" weight="0.5"/>
  </loss>
  <solver method="tr_bdf2" rtol="1e-8" atol="1e-10" t0="0" t1="40"/>
  <optimizer>
    <pso swarm_size="16" iterations="30" w="0.7" c1="1.5" c2="1.5" seed="7"/>
    <lbfgs max_iterations="100" memory="10" grad_tolerance="1e-10" loss_rel_tolerance="1e-12"/>
  </optimizer>
  <outputs>params loss_history trajectory report</outputs>
</deck>
)xml";

inline const char* piezo_xml = R"xml(<deck name="piezo_bouc_wen">
  <states>
    <state name="x" initial="0"/>
    <state name="v" initial="0"/>
    <state name="h" initial="0"/>
  </states>
  <parameters>
    <parameter name="alpha" lower="0.1" upper="2" scale="linear"/>
    <parameter name="beta" lower="0" upper="0.1" scale="linear"/>
    <parameter name="gamma" lower="0" upper="0.1" scale="linear"/>
    <parameter name="c_p" lower="10" upper="1000" scale="log10"/>
    <parameter name="k_p" lower="1000000" upper="100000000" scale="log10"/>
    <parameter name="d_e" lower="5e-8" upper="5e-7" scale="log10"/>
  </parameters>
  <constants>
    <constant name="m_p" value="0.1"/>
  </constants>
  <inputs>
    <input name="V">24 + 24*sin(16*pi*t)</input>
  </inputs>
  <rhs>
    <equation state="x">v</equation>
    <equation state="v">(k_p*(d_e*V - h) - c_p*v - k_p*x)/m_p</equation>
    <equation state="h">alpha*d_e*V_dot - beta*abs(V_dot)*h - gamma*V_dot*abs(h)</equation>
  </rhs>
  <dataset path="piezo_bouc_wen.csv" time_column="t">
    <column name="displacement" signal="x"/>
  </dataset>
  <loss>
    <term signal="x" reduction="root_mean_square" scale="max_abs_of_data" window="0.05 0.5"/>
  </loss>
  <solver method="tr_bdf2" rtol="1e-6" atol="1e-12 1e-9 1e-12" t0="0" t1="0.5"/>
  <optimizer>
    <pso swarm_size="32" iterations="40" w="0.7" c1="1.5" c2="1.5" seed="7"/>
    <lbfgs max_iterations="30" memory="10" grad_tolerance="1e-8" loss_rel_tolerance="1e-10"/>
  </optimizer>
  <outputs>params loss_history trajectory report</outputs>
</deck>
)xml";

inline const char* arc_xml = R"xml(<deck name="arc_runaway">
  <states>
    <state name="c1" initial="1"/>
    <state name="c2" initial="0.05"/>
    <state name="T" initial="380"/>
  </states>
  <parameters>
    <parameter name="A1" lower="1e10" upper="1e13" scale="log10"/>
    <parameter name="Ea1" lower="1.9e-19" upper="2.1e-19" scale="linear"/>
    <parameter name="h1" lower="20" upper="200" scale="linear"/>
    <parameter name="A2" lower="1e15" upper="1e19" scale="log10"/>
    <parameter name="Ea2" lower="2.4e-19" upper="2.7e-19" scale="linear"/>
    <parameter name="h2" lower="10" upper="100" scale="linear"/>
    <parameter name="m2" lower="1" upper="6" scale="linear"/>
    <parameter name="n2" lower="1" upper="4" scale="linear"/>
  </parameters>
  <constants>
    <constant name="kb" value="1.380649e-23"/>
  </constants>
  <rhs>
    <equation state="c1">-A1*exp(-Ea1/(kb*T))*c1</equation>
    <equation state="c2">A2*exp(-Ea2/(kb*T))*max(c2, 0)^n2*max(1 - c2, 0)^m2</equation>
    <equation state="T">abs(h1*A1*exp(-Ea1/(kb*T))*c1) + abs(h2*A2*exp(-Ea2/(kb*T))*max(c2, 0)^n2*max(1 - c2, 0)^m2)</equation>
  </rhs>
  <dataset path="arc_runaway.csv" time_column="t" rate_source="column">
    <column name="T" signal="T"/>
    <column name="dTdt" signal="rate(T)"/>
  </dataset>
  <loss>
    <term signal="rate(T)" transform="log10" weight="1"/>
    <term signal="T" weight="0.0001"/>
  </loss>
  <solver method="tr_bdf2" rtol="1e-6" atol="1e-10 1e-10 1e-6" t0="0" t1="20000"/>
  <optimizer>
    <pso swarm_size="32" iterations="40" w="0.7" c1="1.5" c2="1.5" seed="7"/>
    <lbfgs max_iterations="40" memory="10" grad_tolerance="1e-8" loss_rel_tolerance="1e-10"/>
  </optimizer>
  <outputs>params loss_history trajectory report</outputs>
</deck>
)xml";

inline std::vector<BenchmarkCase> make_registry() {
  std::vector<BenchmarkCase> r;
  {
    BenchmarkCase c;
    c.name = "robertson";
    c.deck_file = "robertson.xml";
    c.deck_xml = robertson_xml;
    c.truth = {{"k1", 0.04}, {"k2", 3e7}, {"k3", 1e4}};
    c.times = logspace(-5.0, 5.0, 60);
    c.columns = {{"y1", "y1"}, {"y2", "y2"}, {"y3", "y3"}};
    c.reference = reference_solver(Method::tr_bdf2, {1e-12, 1e-16, 1e-12});
    r.push_back(std::move(c));
  }
  {
    BenchmarkCase c;
    c.name = "vanderpol";
    c.deck_file = "vanderpol.xml";
    c.deck_xml = vanderpol_xml;
    c.truth = {{"mu", 10.0}};
    c.times = linspace(0.0, 40.0, 400);
    c.columns = {{"x1", "x1"}, {"x2", "x2"}};
    c.reference = reference_solver(Method::dopri5, {1e-12});
    r.push_back(std::move(c));
  }
  {
    BenchmarkCase c;
    c.name = "piezo_bouc_wen";
    c.deck_file = "piezo_bouc_wen.xml";
    c.deck_xml = piezo_xml;
    c.truth = {{"alpha", 0.5}, {"beta", 0.02}, {"gamma", 0.01}, {"c_p", 200.0}, {"k_p", 1e7}, {"d_e", 1.2e-7}};
    c.synthetic = false;
    c.times = linspace(0.0, 0.5, 501);
    c.columns = {{"displacement", "x"}};
    c.noise = {{"displacement", 3e-8, false}};
    c.reference = reference_solver(Method::dopri5, {1e-15, 1e-12, 1e-15});
    r.push_back(std::move(c));
  }
  {
    BenchmarkCase c;
    c.name = "arc_runaway";
    c.deck_file = "arc_runaway.xml";
    c.deck_xml = arc_xml;
    c.truth = {{"A1", 4.057e11}, {"Ea1", 2e-19}, {"h1", 80.0},  {"A2", 1.22e17},
               {"Ea2", 2.565e-19}, {"h2", 49.7},  {"m2", 4.744}, {"n2", 2.407}};
    c.synthetic = false;
    c.times = linspace(0.0, 20000.0, 1001);
    c.columns = {{"T", "T"}, {"dTdt", "rate(T)"}};
    c.noise = {{"T", 0.05, false}, {"dTdt", 0.02, true}};
    c.reference = reference_solver(Method::tr_bdf2, {1e-13, 1e-13, 1e-9});
    r.push_back(std::move(c));
  }
  return r;
}

}  // namespace detail

inline const std::vector<BenchmarkCase>& benchmark_registry() {
  static const std::vector<BenchmarkCase> r = detail::make_registry();
  return r;
}

inline std::vector<std::string> list_benchmarks() {
  std::vector<std::string> names;
  for (const auto& c : benchmark_registry()) names.push_back(c.name);
  return names;
}

inline const BenchmarkCase& get_benchmark(std::string_view name) {
  for (const auto& c : benchmark_registry())
    if (c.name == name) return c;
  throw std::invalid_argument("unknown benchmark '" + std::string(name) + "'");
}

/// Noise-free data table for `theta` on the case grid from the reference
/// solve; rate signals come from the right-hand side.
inline DataTable simulate_table(const BenchmarkCase& c, const std::vector<double>& theta) {
  const auto model = compile(c.deck());
  const auto traj = integrate(model, theta, c.times, c.reference);
  if (!traj.ok()) throw std::runtime_error("reference solve failed for '" + c.name + "': " + std::string(to_string(traj.status)));
  DataTable t;
  t.names.push_back("t");
  t.columns.push_back(c.times);
  ModelWorkspace ws;
  std::vector<double> y(model.n_states()), dy(model.n_states());
  for (const auto& [column, signal] : c.columns) {
    const auto ref = parse_signal(signal);
    const auto idx = static_cast<Eigen::Index>(model.state_index(ref->state));
    std::vector<double> col(c.times.size());
    for (std::size_t r = 0; r < c.times.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      if (!ref->rate) {
        col[r] = traj.states(row, idx);
        continue;
      }
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = traj.states(row, static_cast<Eigen::Index>(i));
      model.rhs(c.times[r], y, theta, dy, ws);
      col[r] = dy[static_cast<std::size_t>(idx)];
    }
    t.names.push_back(column);
    t.columns.push_back(std::move(col));
  }
  return t;
}

/// Data CSV for a case: reference solve at the case parameters plus the
/// case's Gaussian noise (scaled by noise_scale) drawn from `seed`.
inline std::string generate_synthetic(const BenchmarkCase& c, std::uint64_t seed, double noise_scale = 1.0) {
  auto table = simulate_table(c, c.truth_values());
  auto rng = SplitMix64::stream(seed, stream_label::noise, 0);
  for (const auto& n : c.noise) {
    if (n.sd == 0.0 || noise_scale == 0.0) continue;
    auto& col = table.columns[static_cast<std::size_t>(table.find(n.column))];
    for (auto& v : col) {
      const double z = rng.normal();
      v = n.multiplicative ? v * std::exp(noise_scale * n.sd * z) : v + noise_scale * n.sd * z;
    }
  }
  return to_csv(table);
}

inline std::string generate_synthetic(std::string_view name, std::uint64_t seed, double noise_scale = 1.0) {
  return generate_synthetic(get_benchmark(name), seed, noise_scale);
}

/// Same reference data with additive Gaussian noise of standard deviation
/// `sd` on every data column instead of the case's own noise model.
inline std::string generate_synthetic_additive(const BenchmarkCase& c, std::uint64_t seed, double sd) {
  BenchmarkCase copy = c;
  copy.noise.clear();
  for (const auto& col : c.columns) copy.noise.push_back({col.first, sd, false});
  return generate_synthetic(copy, seed);
}

}  // namespace odefit
