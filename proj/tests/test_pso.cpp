#include <gtest/gtest.h>

#include <cstring>

#include "odefit/bench.hpp"
#include "odefit/pso.hpp"

using namespace odefit;

namespace {

ParamSpace box(std::size_t m, double lo = -1.0, double hi = 1.0) {
  std::vector<ParamBound> b;
  for (std::size_t i = 0; i < m; ++i) b.push_back({"p" + std::to_string(i), lo, hi, ParamScale::linear});
  return ParamSpace(b);
}

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

PsoConfig pso_config(std::size_t size, std::size_t iters, std::uint64_t seed = 7) {
  PsoConfig c;
  c.swarm_size = size;
  c.iterations = iters;
  c.seed = seed;
  return c;
}

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(InitSwarm, ShapeAndRanges) {
  const auto s = init_swarm(box(1), 2, 3);
  EXPECT_EQ(s.positions.rows(), 2);
  EXPECT_EQ(s.positions.cols(), 1);
  EXPECT_EQ(s.velocities.rows(), 2);
  EXPECT_EQ(s.velocities.cols(), 1);
  const auto big = init_swarm(box(4), 500, 3);
  EXPECT_GE(big.positions.minCoeff(), 0.0);
  EXPECT_LE(big.positions.maxCoeff(), 1.0);
  EXPECT_GE(big.velocities.minCoeff(), -0.25);
  EXPECT_LE(big.velocities.maxCoeff(), 0.25);
  // Roughly uniform: mean near the centre of each range.
  EXPECT_NEAR(big.positions.mean(), 0.5, 0.03);
  EXPECT_NEAR(big.velocities.mean(), 0.0, 0.015);
  EXPECT_FALSE(big.evaluated);
}

TEST(InitSwarm, SizeBelowTwoIsRejected) {
  EXPECT_THROW(init_swarm(box(2), 1, 7), std::invalid_argument);
  EXPECT_THROW(init_swarm(box(2), 0, 7), std::invalid_argument);
}

TEST(InitSwarm, SeedDeterminism) {
  const auto a = init_swarm(box(3), 16, 42), b = init_swarm(box(3), 16, 42), c = init_swarm(box(3), 16, 43);
  EXPECT_TRUE(same_bits(a.positions, b.positions));
  EXPECT_TRUE(same_bits(a.velocities, b.velocities));
  EXPECT_FALSE(same_bits(a.positions, c.positions));
}

TEST(InitSwarm, LogScaledMidpoint) {
  const ParamSpace space({{"k2", 1e5, 1e9, ParamScale::log10}});
  EXPECT_NEAR(space.to_external(0, 0.5), 1e7, 1e7 * 1e-14);
  EXPECT_DOUBLE_EQ(space.to_internal(0, 1e5), 0.0);
  EXPECT_DOUBLE_EQ(space.to_internal(0, 1e9), 1.0);
}

TEST(PsoStep, RequiresEvaluatedSwarm) {
  auto s = init_swarm(box(2), 4, 1);
  EXPECT_THROW(pso_step(s, sphere, 1), std::logic_error);
}

TEST(PsoStep, SphereConverges) {
  for (std::size_t size : {30u, 64u}) {
    const auto r = run_pso(box(3), sphere, pso_config(size, 200), 1);
    EXPECT_LE(r.loss, 1e-6) << size;
    EXPECT_EQ(r.history.size(), 201u);
    EXPECT_DOUBLE_EQ(sphere(r.theta), r.loss);
  }
}

TEST(PsoStep, FrozenWithZeroCoefficients) {
  auto s = init_swarm(box(3), 8, 5, 0.0, 0.0, 0.0);
  evaluate_swarm(s, sphere, 1);
  pso_step(s, sphere, 1);
  EXPECT_TRUE(s.velocities.isZero(0.0));
  const Eigen::MatrixXd frozen = s.positions;
  for (int k = 0; k < 5; ++k) pso_step(s, sphere, 1);
  EXPECT_TRUE(same_bits(frozen, s.positions));
}

TEST(PsoStep, FailedEvaluationsCountAsInfinite) {
  // Fitness fails on half the box; the swarm keeps going.
  const auto f = [](std::span<const double> x) { return x[0] > 0.0 ? std::nan("") : sphere(x); };
  auto s = init_swarm(box(2), 16, 9);
  evaluate_swarm(s, f, 1);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.space.to_external(0, s.positions(static_cast<Eigen::Index>(i), 0)) > 0.0)
      EXPECT_TRUE(std::isinf(s.personal_best_value[i]));
  for (int k = 0; k < 50; ++k) pso_step(s, f, 1);
  EXPECT_TRUE(std::isfinite(s.global_best_value));
  EXPECT_LE(s.space.to_external(0, s.global_best[0]), 0.0);
}

TEST(PsoStep, TiesKeepIncumbent) {
  // Constant fitness: nothing is ever strictly better, so the bests stay at
  // the initial positions.
  const auto flat = [](std::span<const double>) { return 1.0; };
  auto s = init_swarm(box(2), 6, 2);
  evaluate_swarm(s, flat, 1);
  const Eigen::MatrixXd pb = s.personal_best;
  const Eigen::VectorXd gb = s.global_best;
  for (int k = 0; k < 10; ++k) pso_step(s, flat, 1);
  EXPECT_TRUE(same_bits(pb, s.personal_best));
  EXPECT_TRUE(same_bits(gb, s.global_best));
  EXPECT_TRUE(same_bits(gb, pb.row(0).transpose()));
}

TEST(RunPso, InfeasibleStartRaises) {
  const auto bad = [](std::span<const double>) { return std::numeric_limits<double>::infinity(); };
  try {
    run_pso(box(2), bad, pso_config(8, 3), 1);
    FAIL();
  } catch (const InfeasibleError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("no feasible particle found"), std::string::npos);
    EXPECT_NE(m.find("tolerances"), std::string::npos);
  }
}

TEST(RunPso, SameSeedSameResult) {
  const auto rosen = [](std::span<const double> x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const auto space = box(2, -2.0, 2.0);
  const auto a = run_pso(space, rosen, pso_config(20, 60, 11), 1);
  const auto b = run_pso(space, rosen, pso_config(20, 60, 11), 1);
  const auto c = run_pso(space, rosen, pso_config(20, 60, 12), 1);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.history, b.history);
  EXPECT_NE(a.theta, c.theta);
}

TEST(RunPso, ModelFitnessOnVanDerPol) {
  const auto& bc = get_benchmark("vanderpol");
  auto deck = bc.deck();
  deck.dataset.table = parse_csv(generate_synthetic(bc, 7, 0.0));
  const auto m = compile(deck);
  const LossPlan plan(m, bind_dataset(deck), deck.loss);
  const auto r = run_pso(m, plan, ParamSpace::from_deck(deck), deck.solver, pso_config(8, 6), 1);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_EQ(r.loss, loss_value(m, r.theta, plan, deck.solver));
  EXPECT_EQ(r.history.back(), r.loss);
}

TEST(Property, BoundsNeverViolated) {
  // Pull every particle hard towards a corner outside the box.
  const auto pull = [](std::span<const double> x) { return -x[0] + x[1] - 10 * x[2]; };
  auto s = init_swarm(box(3), 24, 4, 0.9, 2.0, 2.0);
  evaluate_swarm(s, pull, 1);
  for (int k = 0; k < 100; ++k) {
    pso_step(s, pull, 1);
    ASSERT_GE(s.positions.minCoeff(), 0.0) << k;
    ASSERT_LE(s.positions.maxCoeff(), 1.0) << k;
  }
}

TEST(Property, GlobalBestMonotoneAndIsMinOfPersonalBests) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (double c2 : {1.5, 0.0}) {
      auto s = init_swarm(box(4), 12, seed, 0.7, 1.5, c2);
      const auto f = [](std::span<const double> x) { return sphere(x) + std::sin(7 * x[0]) * 0.3; };
      evaluate_swarm(s, f, 1);
      double prev = s.global_best_value;
      for (int k = 0; k < 60; ++k) {
        pso_step(s, f, 1);
        EXPECT_LE(s.global_best_value, prev);
        prev = s.global_best_value;
        const double min_pb = *std::min_element(s.personal_best_value.begin(), s.personal_best_value.end());
        EXPECT_EQ(s.global_best_value, min_pb);
      }
    }
  }
}

TEST(Property, WorkerCountDoesNotChangeResults) {
  const auto f = [](std::span<const double> x) { return sphere(x) + 0.1 * std::cos(13 * x[1]); };
  const auto space = box(3);
  const auto a = run_pso(space, f, pso_config(33, 40), 1);
  for (std::size_t workers : {2u, 4u, 7u}) {
    const auto b = run_pso(space, f, pso_config(33, 40), workers);
    EXPECT_EQ(a.u, b.u) << workers;
    EXPECT_EQ(a.history, b.history) << workers;
  }
}

TEST(Property, PowerOfTwoLossScalingKeepsDecisions) {
  // Multiplying every weight by a common factor scales each loss exactly when
  // the factor is a power of two, so all comparisons come out the same.
  const auto& bc = get_benchmark("vanderpol");
  auto deck = bc.deck();
  deck.dataset.table = parse_csv(generate_synthetic(bc, 7, 1.0));
  const auto m = compile(deck);
  const auto data = bind_dataset(deck);
  const LossPlan plan(m, data, deck.loss);
  auto scaled_terms = deck.loss;
  for (auto& t : scaled_terms) t.weight *= 64.0;
  const LossPlan scaled(m, data, scaled_terms);
  const auto space = ParamSpace::from_deck(deck);
  const auto a = run_pso(m, plan, space, deck.solver, pso_config(8, 8), 1);
  const auto b = run_pso(m, scaled, space, deck.solver, pso_config(8, 8), 1);
  EXPECT_EQ(a.u, b.u);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) EXPECT_EQ(64.0 * a.history[k], b.history[k]);
}

TEST(SplitMix, StreamsAreIndependentAndReproducible) {
  auto a = SplitMix64::stream(7, stream_label::particle, 0);
  auto b = SplitMix64::stream(7, stream_label::particle, 1);
  auto a2 = SplitMix64::stream(7, stream_label::particle, 0);
  auto n = SplitMix64::stream(7, stream_label::noise, 0);
  const double x = a.uniform();
  EXPECT_EQ(x, a2.uniform());
  EXPECT_NE(x, b.uniform());
  EXPECT_NE(x, n.uniform());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
