#pragma once

// Two-stage calibration: particle swarm, then L-BFGS from the swarm's best.

#include <chrono>
#include <string>
#include <vector>

#include "odefit/lbfgs.hpp"
#include "odefit/pso.hpp"

namespace odefit {

struct HistoryRow {
  std::string stage;  // "pso" or "lbfgs"
  std::size_t iteration = 0;
  double loss = 0.0;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> theta_pso;
  std::vector<double> theta_final;
  double loss_pso = 0.0;
  double loss_final = 0.0;
  std::vector<HistoryRow> history;
  std::vector<LbfgsRow> lbfgs_history;
  std::string refine_status;  // L-BFGS stop reason, or why refinement was skipped
  Trajectory trajectory;      // at the data times, final parameters
  double pso_seconds = 0.0;
  double lbfgs_seconds = 0.0;
};

inline FitResult two_stage_fit(const CompiledModel& model, const BoundDataset& data, const std::vector<LossTerm>& terms,
                               const ParamSpace& space, const SolverConfig& solver, const OptimizerConfig& opt,
                               std::size_t workers = default_workers()) {
  using clock = std::chrono::steady_clock;
  const LossPlan plan(model, data, terms);
  FitResult out;
  out.names = model.param_names();

  const auto t0 = clock::now();
  const auto pso = run_pso(model, plan, space, solver, opt.pso, workers);
  out.pso_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  out.theta_pso = pso.theta;
  out.loss_pso = pso.loss;
  for (std::size_t k = 0; k < pso.history.size(); ++k) out.history.push_back({"pso", k, pso.history[k]});

  out.theta_final = pso.theta;
  out.loss_final = pso.loss;
  if (opt.lbfgs.max_iterations == 0) {
    out.refine_status = "skipped: max_iterations is 0";
  } else if (!loss_gradient_ready(terms, data)) {
    out.refine_status = "skipped: a log10 term has non-positive data samples";
  } else {
    const auto t1 = clock::now();
    const auto ref = refine_internal(model, plan, space, solver, pso.u, opt.lbfgs);
    out.lbfgs_seconds = std::chrono::duration<double>(clock::now() - t1).count();
    out.refine_status = ref.status;
    out.lbfgs_history = ref.history;
    for (const auto& row : ref.history) out.history.push_back({"lbfgs", row.iteration, row.loss});
    if (ref.loss <= pso.loss) {
      out.theta_final = ref.theta;
      out.loss_final = ref.loss;
    }
  }
  out.trajectory = integrate(model, out.theta_final, data.times, solver);
  return out;
}

}  // namespace odefit
