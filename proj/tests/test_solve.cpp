#include <gtest/gtest.h>

#include <cstring>

#include "odefit/bench.hpp"
#include "odefit/solve.hpp"

using namespace odefit;
using odefit::detail::linspace;
using odefit::detail::logspace;

namespace {

CompiledModel scalar_model(const std::string& rhs, const std::string& initial = "1") {
  return compile(parse_deck(R"(<deck name="s"><states><state name="y" initial=")" + initial +
                            R"("/></states><parameters><parameter name="k" lower="0.1" upper="10"/></parameters><rhs><equation state="y">)" +
                            rhs + R"(</equation></rhs><dataset path="none.csv"/></deck>)"));
}

SolverConfig config(Method m, double rtol, std::vector<double> atol, double t1) {
  SolverConfig c;
  c.method = m;
  c.rtol = rtol;
  c.atol = std::move(atol);
  c.t1 = t1;
  c.max_steps = 1000000;
  return c;
}

const std::vector<double> kOne{1.0};

}  // namespace

TEST(Integrate, ExponentialDecayDopri5) {
  const auto m = scalar_model("-y");
  const std::vector<double> times{1.0};
  const auto tr = integrate(m, kOne, times, config(Method::dopri5, 1e-10, {1e-10}, 1.0));
  ASSERT_EQ(tr.status, SolveStatus::success);
  EXPECT_NEAR(tr.states(0, 0), 0.36787944117144233, 1e-8);
  EXPECT_EQ(tr.times, times);
  EXPECT_GT(tr.stats.accepted, 0u);
  EXPECT_GT(tr.stats.rhs_evals, tr.stats.accepted);
}

TEST(Integrate, ExponentialDecayTrBdf2) {
  const auto m = scalar_model("-y");
  const std::vector<double> times{0.25, 0.5, 1.0};
  const auto tr = integrate(m, kOne, times, config(Method::tr_bdf2, 1e-8, {1e-10}, 1.0));
  ASSERT_EQ(tr.status, SolveStatus::success);
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_NEAR(tr.states(static_cast<Eigen::Index>(i), 0), std::exp(-times[i]), 2e-6);
  EXPECT_GT(tr.stats.jacobian_evals, 0u);
}

TEST(Integrate, RobertsonMatchesTightReference) {
  // Reference from an independent Radau solve at rtol 1e-13 (agrees with an
  // LSODA solve to 1e-14).
  const double y1_ref = 0.98517211386100;
  const double y2_ref = 3.3863953789750e-05;
  const double y3_ref = 0.014794022185215;
  const auto m = compile(get_benchmark("robertson").deck());
  const std::vector<double> th{0.04, 3e7, 1e4}, times{0.4};
  const auto tr = integrate(m, th, times, config(Method::tr_bdf2, 1e-8, {1e-10, 1e-14, 1e-10}, 0.4));
  ASSERT_EQ(tr.status, SolveStatus::success);
  EXPECT_NEAR(tr.states(0, 0), y1_ref, 1e-6 * y1_ref);
  EXPECT_NEAR(tr.states(0, 1), y2_ref, 1e-4 * y2_ref);
  EXPECT_NEAR(tr.states(0, 2), y3_ref, 1e-5 * y3_ref);
  // The explicit method at tight tolerance agrees as well.
  const auto ex = integrate(m, th, times, config(Method::dopri5, 1e-10, {1e-12, 1e-16, 1e-12}, 0.4));
  ASSERT_EQ(ex.status, SolveStatus::success);
  EXPECT_NEAR(ex.states(0, 0), y1_ref, 1e-8);
}

TEST(Integrate, ExplicitMethodExhaustsStepsOnStiffRobertson) {
  const auto m = compile(get_benchmark("robertson").deck());
  const std::vector<double> th{0.04, 3e7, 1e4}, times{1e5};
  auto cfg = config(Method::dopri5, 1e-6, {1e-8}, 1e5);
  cfg.max_steps = 1000;
  const auto tr = integrate(m, th, times, cfg);
  EXPECT_EQ(tr.status, SolveStatus::max_steps_exceeded);
  EXPECT_TRUE(std::isnan(tr.states(0, 0)));
  EXPECT_FALSE(tr.ok());
}

TEST(Integrate, NonFiniteRhsIsReported) {
  const auto m = scalar_model("ln(-k)*y");
  const std::vector<double> times{1.0};
  for (auto method : {Method::dopri5, Method::tr_bdf2}) {
    const auto tr = integrate(m, kOne, times, config(method, 1e-6, {1e-9}, 1.0));
    EXPECT_EQ(tr.status, SolveStatus::nonfinite_state);
  }
}

TEST(Integrate, BlowUpStopsWithoutThrowing) {
  const auto m = scalar_model("y^2");
  const std::vector<double> times{0.5, 2.0};
  for (auto method : {Method::dopri5, Method::tr_bdf2}) {
    Trajectory tr;
    ASSERT_NO_THROW(tr = integrate(m, kOne, times, config(method, 1e-6, {1e-9}, 2.0)));
    EXPECT_FALSE(tr.ok());
    EXPECT_NEAR(tr.states(0, 0), 2.0, 1e-4);
    EXPECT_TRUE(std::isnan(tr.states(1, 0)));
  }
}

TEST(Integrate, PreconditionViolationsThrow) {
  const auto m = scalar_model("-y");
  const auto cfg = config(Method::dopri5, 1e-6, {1e-9}, 1.0);
  EXPECT_THROW(integrate(m, kOne, std::vector<double>{0.5, 0.5}, cfg), std::invalid_argument);
  EXPECT_THROW(integrate(m, kOne, std::vector<double>{0.5, 2.0}, cfg), std::invalid_argument);
  EXPECT_THROW(integrate(m, kOne, std::vector<double>{-1.0}, cfg), std::invalid_argument);
  EXPECT_THROW(integrate(m, std::vector<double>{1.0, 2.0}, std::vector<double>{0.5}, cfg), std::invalid_argument);
  auto bad = cfg;
  bad.rtol = 0.0;
  EXPECT_THROW(integrate(m, kOne, std::vector<double>{0.5}, bad), std::invalid_argument);
  bad = cfg;
  bad.atol = {-1.0};
  EXPECT_THROW(integrate(m, kOne, std::vector<double>{0.5}, bad), std::invalid_argument);
  bad = cfg;
  bad.adaptive = false;
  EXPECT_THROW(integrate(m, kOne, std::vector<double>{0.5}, bad), std::invalid_argument);
}

TEST(Integrate, OutputAtInitialTime) {
  const auto m = scalar_model("-y", "3");
  const auto tr = integrate(m, kOne, std::vector<double>{0.0, 1.0}, config(Method::tr_bdf2, 1e-8, {1e-10}, 1.0));
  ASSERT_TRUE(tr.ok());
  EXPECT_EQ(tr.states(0, 0), 3.0);
}

TEST(Property, ConvergenceOrders) {
  const auto m = scalar_model("-y");
  const std::vector<double> times{1.0};
  auto error = [&](Method method, double h) {
    auto cfg = config(method, 1e-13, {1e-15}, 1.0);
    cfg.adaptive = false;
    cfg.initial_step = h;
    const auto tr = integrate(m, kOne, times, cfg);
    EXPECT_TRUE(tr.ok());
    return std::fabs(tr.states(0, 0) - std::exp(-1.0));
  };
  for (double h : {0.1, 0.05}) {
    EXPECT_GE(error(Method::dopri5, h) / error(Method::dopri5, h / 2), 16.0 * 0.7) << h;
    EXPECT_GE(error(Method::tr_bdf2, h) / error(Method::tr_bdf2, h / 2), 4.0 * 0.7) << h;
  }
}

TEST(Property, RobertsonConservationDrift) {
  const auto m = compile(get_benchmark("robertson").deck());
  const std::vector<double> th{0.04, 3e7, 1e4};
  const auto times = logspace(-5.0, 4.0, 80);
  const double rtol = 1e-8;
  const auto tr = integrate(m, th, times, config(Method::tr_bdf2, rtol, {1e-10, 1e-14, 1e-10}, 1e4));
  ASSERT_TRUE(tr.ok());
  for (Eigen::Index r = 0; r < tr.states.rows(); ++r)
    EXPECT_LE(std::fabs(tr.states.row(r).sum() - 1.0), 100.0 * rtol) << times[static_cast<std::size_t>(r)];
}

TEST(Property, Determinism) {
  const auto m = compile(get_benchmark("vanderpol").deck());
  const std::vector<double> mu{10.0};
  const auto times = linspace(0.0, 40.0, 200);
  for (auto method : {Method::dopri5, Method::tr_bdf2}) {
    const auto cfg = config(method, 1e-8, {1e-10}, 40.0);
    const auto a = integrate(m, mu, times, cfg);
    const auto b = integrate(m, mu, times, cfg);
    ASSERT_TRUE(a.ok());
    EXPECT_EQ(std::memcmp(a.states.data(), b.states.data(), sizeof(double) * static_cast<std::size_t>(a.states.size())), 0);
    EXPECT_EQ(a.stats.accepted, b.stats.accepted);
  }
}

TEST(Property, OutputGridDoesNotChangeSteps) {
  const auto m = compile(get_benchmark("vanderpol").deck());
  const std::vector<double> mu{10.0};
  for (auto method : {Method::dopri5, Method::tr_bdf2}) {
    const auto cfg = config(method, 1e-7, {1e-9}, 20.0);
    const auto dense = integrate(m, mu, linspace(0.0, 20.0, 333), cfg);
    const auto sparse = integrate(m, mu, std::vector<double>{7.77, 20.0}, cfg);
    ASSERT_TRUE(dense.ok() && sparse.ok());
    EXPECT_EQ(dense.stats.accepted, sparse.stats.accepted);
    EXPECT_EQ(dense.states(332, 0), sparse.states(1, 0));
    EXPECT_EQ(dense.states(332, 1), sparse.states(1, 1));
  }
}

TEST(Property, StepEndpointOutputsAreExact) {
  const auto m = compile(get_benchmark("vanderpol").deck());
  const std::vector<double> mu{3.0};
  for (auto method : {Method::dopri5, Method::tr_bdf2}) {
    auto cfg = config(method, 1e-8, {1e-10}, 1.0);
    cfg.adaptive = false;
    cfg.initial_step = 0.125;
    const auto grid = integrate(m, mu, linspace(0.0, 1.0, 9), cfg);
    cfg.t1 = 0.5;
    const auto half = integrate(m, mu, std::vector<double>{0.5}, cfg);
    ASSERT_TRUE(grid.ok() && half.ok());
    EXPECT_EQ(grid.states(4, 0), half.states(0, 0));
    EXPECT_EQ(grid.states(4, 1), half.states(0, 1));
  }
}

TEST(Property, DenseOutputAccuracy) {
  const auto m = scalar_model("-y");
  const auto times = linspace(0.0, 5.0, 101);
  for (auto method : {Method::dopri5, Method::tr_bdf2}) {
    const auto tr = integrate(m, kOne, times, config(method, 1e-9, {1e-12}, 5.0));
    ASSERT_TRUE(tr.ok());
    for (std::size_t i = 0; i < times.size(); ++i)
      EXPECT_NEAR(tr.states(static_cast<Eigen::Index>(i), 0), std::exp(-times[i]), method == Method::dopri5 ? 1e-8 : 1e-6);
  }
}

TEST(Stiffness, SpectralRadiusMatchesEigenvalues) {
  // Oracle values from a dense eigensolver.
  const auto rob = compile(get_benchmark("robertson").deck());
  const std::vector<double> th{0.04, 3e7, 1e4};
  EXPECT_NEAR(spectral_radius_estimate(rob.jac_y(0.0, rob.initial_state(th), th)), 0.04, 1e-6);
  const auto vdp = compile(get_benchmark("vanderpol").deck());
  const std::vector<double> mu{10.0};
  EXPECT_NEAR(spectral_radius_estimate(vdp.jac_y(0.0, vdp.initial_state(mu), mu)), 29.96662955, 1e-4);
  Eigen::MatrixXd j(2, 2);
  j << -1000.0, 0.0, 0.0, -1.0;
  EXPECT_NEAR(spectral_radius_estimate(j), 1000.0, 1e-6);
}

TEST(Stiffness, Verdicts) {
  const auto rob = get_benchmark("robertson").deck();
  EXPECT_EQ(stiffness_probe(compile(rob), std::vector<double>{0.04, 3e7, 1e4}, rob.solver),
            StiffnessVerdict::suggests_implicit);
  const auto vdp = get_benchmark("vanderpol").deck();
  EXPECT_EQ(stiffness_probe(compile(vdp), std::vector<double>{10.0}, vdp.solver), StiffnessVerdict::suggests_implicit);
  EXPECT_EQ(stiffness_probe(scalar_model("-y"), kOne, config(Method::dopri5, 1e-6, {1e-9}, 10.0)),
            StiffnessVerdict::suggests_explicit);
}

TEST(Export, TrajectoryCsv) {
  const auto m = scalar_model("-y");
  const auto tr = integrate(m, kOne, std::vector<double>{0.5, 1.0}, config(Method::dopri5, 1e-10, {1e-12}, 1.0));
  const auto csv = trajectory_to_csv(tr, m.state_names(), "time");
  const auto back = parse_csv(csv);
  EXPECT_EQ(back.names, (std::vector<std::string>{"time", "y"}));
  EXPECT_EQ(back.columns[0], tr.times);
  EXPECT_EQ(back.columns[1][1], tr.states(1, 0));
}
