#pragma once

// Bounded particle swarm optimization over the internal unit box.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "odefit/concurrency.hpp"
#include "odefit/config.hpp"
#include "odefit/loss.hpp"
#include "odefit/scaling.hpp"

namespace odefit {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 generator; all optimizer randomness is derived from it so that
/// streams are identical across platforms and standard libraries.
struct SplitMix64 {
  std::uint64_t state = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(state += 0x9e3779b97f4a7c15ULL); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1p-53; }

  /// Standard normal by Box-Muller (one value per call).
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Independent stream `index` under `label` derived from a root seed.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t label, std::uint64_t index) {
    return SplitMix64{mix(mix(seed ^ mix(label)) + 0x9e3779b97f4a7c15ULL * (index + 1))};
  }
};

namespace stream_label {
inline constexpr std::uint64_t particle = 1;
inline constexpr std::uint64_t noise = 2;
}  // namespace stream_label

using Fitness = std::function<double(std::span<const double>)>;

struct Swarm {
  ParamSpace space;
  Eigen::MatrixXd positions;   // P x M, internal coordinates
  Eigen::MatrixXd velocities;  // P x M
  Eigen::MatrixXd personal_best;
  std::vector<double> personal_best_value;
  Eigen::VectorXd global_best;
  double global_best_value = std::numeric_limits<double>::infinity();
  std::size_t iteration = 0;
  std::vector<SplitMix64> rng;  // one stream per particle
  double w = 0.7, c1 = 1.5, c2 = 1.5;
  bool evaluated = false;

  std::size_t size() const { return static_cast<std::size_t>(positions.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(positions.cols()); }

  std::vector<double> position(std::size_t i) const {
    std::vector<double> u(dims());
    for (std::size_t j = 0; j < dims(); ++j) u[j] = positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return u;
  }
};

/// Positions uniform over the unit box, velocities uniform in [-0.25, 0.25].
/// Bests stay unset until the first evaluation.
inline Swarm init_swarm(const ParamSpace& space, std::size_t size, std::uint64_t seed, double w = 0.7,
                        double c1 = 1.5, double c2 = 1.5) {
  if (size < 2) throw std::invalid_argument("swarm size must be at least 2");
  Swarm s;
  s.space = space;
  s.w = w;
  s.c1 = c1;
  s.c2 = c2;
  const auto p = static_cast<Eigen::Index>(size);
  const auto m = static_cast<Eigen::Index>(space.size());
  s.positions.resize(p, m);
  s.velocities.resize(p, m);
  for (std::size_t i = 0; i < size; ++i) {
    s.rng.push_back(SplitMix64::stream(seed, stream_label::particle, i));
    auto& g = s.rng.back();
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < m; ++j) s.positions(r, j) = g.uniform();
    for (Eigen::Index j = 0; j < m; ++j) s.velocities(r, j) = 0.5 * g.uniform() - 0.25;
  }
  s.personal_best = s.positions;
  s.personal_best_value.assign(size, std::numeric_limits<double>::infinity());
  s.global_best = s.positions.row(0).transpose();
  return s;
}

namespace detail {

inline std::vector<double> evaluate_particles(const Swarm& s, const Fitness& fitness, std::size_t workers) {
  std::vector<double> f(s.size());
  parallel_for(
      s.size(),
      [&](std::size_t i) {
        const double v = fitness(s.space.to_external(s.position(i)));
        f[i] = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
      },
      workers);
  return f;
}

// Sequential best update in particle order; strict less-than keeps ties.
inline void update_bests(Swarm& s, const std::vector<double>& f) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (f[i] < s.personal_best_value[i]) {
      s.personal_best_value[i] = f[i];
      s.personal_best.row(r) = s.positions.row(r);
    }
    if (s.personal_best_value[i] < s.global_best_value) {
      s.global_best_value = s.personal_best_value[i];
      s.global_best = s.personal_best.row(r).transpose();
    }
  }
}

}  // namespace detail

/// First evaluation: sets personal and global bests.
inline void evaluate_swarm(Swarm& s, const Fitness& fitness, std::size_t workers = default_workers()) {
  detail::update_bests(s, detail::evaluate_particles(s, fitness, workers));
  s.evaluated = true;
}

/// One iteration: velocity update with fresh per-dimension r1, r2, position
/// update, clamp to the box (zeroing the violating velocity component),
/// evaluation, best update.
inline void pso_step(Swarm& s, const Fitness& fitness, std::size_t workers = default_workers()) {
  if (!s.evaluated) throw std::logic_error("pso_step requires an evaluated swarm");
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    auto& g = s.rng[i];
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(s.dims()); ++j) {
      const double r1 = g.uniform();
      const double r2 = g.uniform();
      double& v = s.velocities(r, j);
      double& x = s.positions(r, j);
      v = s.w * v + s.c1 * r1 * (s.personal_best(r, j) - x) + s.c2 * r2 * (s.global_best[j] - x);
      x += v;
      if (x < 0.0) {
        x = 0.0;
        v = 0.0;
      } else if (x > 1.0) {
        x = 1.0;
        v = 0.0;
      }
    }
  }
  detail::update_bests(s, detail::evaluate_particles(s, fitness, workers));
  ++s.iteration;
}

struct PsoResult {
  std::vector<double> theta;  // external coordinates
  std::vector<double> u;      // internal coordinates
  double loss = std::numeric_limits<double>::infinity();
  std::vector<double> history;  // global best after init and after each step
};

/// Full swarm run on an arbitrary fitness of external parameters.
inline PsoResult run_pso(const ParamSpace& space, const Fitness& fitness, const PsoConfig& cfg,
                         std::size_t workers = default_workers()) {
  Swarm s = init_swarm(space, cfg.swarm_size, cfg.seed, cfg.w, cfg.c1, cfg.c2);
  evaluate_swarm(s, fitness, workers);
  if (!std::isfinite(s.global_best_value))
    throw InfeasibleError(
        "no feasible particle found: every initial particle failed to produce a finite loss; widen solver "
        "tolerances or parameter bounds");
  PsoResult out;
  out.history.push_back(s.global_best_value);
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    pso_step(s, fitness, workers);
    out.history.push_back(s.global_best_value);
  }
  out.u.assign(s.global_best.data(), s.global_best.data() + s.global_best.size());
  out.theta = space.to_external(out.u);
  out.loss = s.global_best_value;
  return out;
}

inline PsoResult run_pso(const CompiledModel& model, const LossPlan& plan, const ParamSpace& space,
                         const SolverConfig& solver, const PsoConfig& cfg, std::size_t workers = default_workers()) {
  return run_pso(
      space, [&](std::span<const double> theta) { return loss_value(model, theta, plan, solver); }, cfg, workers);
}

}  // namespace odefit
