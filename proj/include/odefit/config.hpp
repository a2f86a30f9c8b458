#pragma once

// Plain configuration records shared by the deck, solver, loss and
// optimizer layers.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace odefit {

enum class Method { dopri5, tr_bdf2 };

struct StepController {
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 10.0;
  // PI exponents, divided by (error order + 1) inside each method.
  double pi_alpha = 0.7;
  double pi_beta = 0.4;
};

struct SolverConfig {
  Method method = Method::tr_bdf2;
  double rtol = 1e-6;
  std::vector<double> atol{1e-9};  // one entry, or one per state
  double t0 = 0.0;
  std::optional<double> t1;        // defaults to the last output time
  std::size_t max_steps = 100000;
  std::optional<double> initial_step;
  // With adaptive = false every step has size initial_step (no error
  // control). Used for order studies.
  bool adaptive = true;
  StepController controller;

  double atol_for(std::size_t i) const { return atol.size() == 1 ? atol.front() : atol.at(i); }
};

enum class Transform { identity, log10 };
enum class Reduction { mean_square, root_mean_square };

/// One additive contribution to the calibration objective.
///
/// residual_i = (transform(sim_i) - transform(data_i)) / scale
/// mean_square:      weight * mean(residual^2)
/// root_mean_square: weight * sqrt(mean(residual^2))
struct LossTerm {
  std::string signal;  // "x" or "rate(x)"
  Transform transform = Transform::identity;
  double weight = 1.0;
  double scale = 1.0;
  bool scale_max_abs = false;  // use max |data| of the signal instead of `scale`
  std::optional<std::pair<double, double>> window;
  Reduction reduction = Reduction::mean_square;

  friend bool operator==(const LossTerm&, const LossTerm&) = default;
};

struct PsoConfig {
  std::size_t swarm_size = 64;
  std::size_t iterations = 300;
  double w = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  std::uint64_t seed = 7;

  friend bool operator==(const PsoConfig&, const PsoConfig&) = default;
};

struct LbfgsConfig {
  std::size_t max_iterations = 200;
  std::size_t memory = 10;
  double grad_tolerance = 1e-10;
  double loss_rel_tolerance = 1e-12;

  friend bool operator==(const LbfgsConfig&, const LbfgsConfig&) = default;
};

struct OptimizerConfig {
  PsoConfig pso;
  LbfgsConfig lbfgs;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

inline bool operator==(const StepController& a, const StepController& b) {
  return a.safety == b.safety && a.min_factor == b.min_factor && a.max_factor == b.max_factor &&
         a.pi_alpha == b.pi_alpha && a.pi_beta == b.pi_beta;
}

inline bool operator==(const SolverConfig& a, const SolverConfig& b) {
  return a.method == b.method && a.rtol == b.rtol && a.atol == b.atol && a.t0 == b.t0 && a.t1 == b.t1 &&
         a.max_steps == b.max_steps && a.initial_step == b.initial_step && a.adaptive == b.adaptive &&
         a.controller == b.controller;
}

}  // namespace odefit
