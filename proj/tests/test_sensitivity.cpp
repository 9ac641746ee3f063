#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "phaseopt/errors.hpp"
#include "problems.hpp"

namespace {

using namespace phaseopt;
using namespace phaseopt::testing;

double max_abs(const Trajectory& t) { return std::max(std::abs(t.min()), std::abs(t.max())); }

class SensitivityTest : public ::testing::Test {
 protected:
  void SetUp() override {
    u = interior_control(p, 1);
    sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
  }
  Problem p = default_problem(32, 64);
  Trajectory u;
  StateSolution sol;
};

TEST_F(SensitivityTest, ZeroDirectionGivesZeroTangent) {
  const Trajectory zero(p.tgrid.levels(), p.grid.cells(), 0.0);
  const auto t = solve_tangent(sol.state, zero, p.data, p.grid, p.tgrid, p.pot, p.cfg);
  EXPECT_EQ(max_abs(t.xi), 0.0);
  EXPECT_EQ(max_abs(t.eta), 0.0);
  const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg);
  const auto d = duality_pairing(sol.state, t, adj, zero, p.data, p.grid, p.tgrid);
  EXPECT_EQ(d.lhs, 0.0);
  EXPECT_EQ(d.rhs, 0.0);
}

TEST_F(SensitivityTest, TangentIsLinearWithZeroInitialLevel) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const Trajectory h = random_direction(p, seed);
    const auto t1 = solve_tangent(sol.state, h, p.data, p.grid, p.tgrid, p.pot, p.cfg);
    const auto t2 = solve_tangent(sol.state, 2.0 * h, p.data, p.grid, p.tgrid, p.pot, p.cfg);
    EXPECT_EQ(t1.xi[0].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(t1.eta[0].cwiseAbs().maxCoeff(), 0.0);
    const double scale = 1.0 + max_abs(t1.xi) + max_abs(t1.eta);
    EXPECT_LT(max_abs(t2.xi - 2.0 * t1.xi), 1e-12 * scale);
    EXPECT_LT(max_abs(t2.eta - 2.0 * t1.eta), 1e-12 * scale);
  }
}

TEST_F(SensitivityTest, TaylorRemainderIsSecondOrder) {
  for (std::uint64_t seed : {3u, 4u}) {
    const Trajectory h = random_direction(p, seed);
    const auto rep = tangent_remainder_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, h, {1e-1, 1e-2, 1e-3});
    ASSERT_TRUE(rep.slope.has_value());
    EXPECT_GE(*rep.slope, 1.7);
    EXPECT_LE(*rep.slope, 2.3);
  }
}

TEST_F(SensitivityTest, TerminalConditionsAreExact) {
  for (AdjointMode mode : {AdjointMode::Discrete, AdjointMode::Pde}) {
    const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, mode);
    const int n = p.tgrid.steps();
    EXPECT_EQ(adj.q[n].cwiseAbs().maxCoeff(), 0.0);
    const Field mismatch = p.data.delta * adj.p[n] - (sol.state.rho[n] - p.data.rho_T);
    EXPECT_LE(mismatch.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST_F(SensitivityTest, MetTargetsGiveZeroAdjoint) {
  ProblemData met = p.data;
  met.rho_T = sol.state.rho[p.tgrid.steps()];
  met.mu_T = sol.state.mu;
  for (AdjointMode mode : {AdjointMode::Discrete, AdjointMode::Pde}) {
    const auto adj = solve_adjoint(sol.state, met, p.grid, p.tgrid, p.pot, p.cfg, mode);
    EXPECT_EQ(max_abs(adj.p), 0.0);
    EXPECT_EQ(max_abs(adj.q), 0.0);
  }
}

TEST_F(SensitivityTest, DiscreteDualityIsExact) {
  const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Discrete);
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Trajectory h = random_direction(p, seed);
    const auto t = solve_tangent(sol.state, h, p.data, p.grid, p.tgrid, p.pot, p.cfg);
    const auto d = duality_pairing(sol.state, t, adj, h, p.data, p.grid, p.tgrid);
    EXPECT_LE(std::abs(d.lhs - d.rhs), 1e-8 * (1.0 + std::abs(d.lhs)));
    EXPECT_NE(d.lhs, 0.0);
  }
}

TEST_F(SensitivityTest, DiscreteGradientMatchesFiniteDifference) {
  const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Discrete);
  const Trajectory g = reduced_gradient(u, adj.q, p.data.beta2);
  for (std::uint64_t seed = 20; seed < 23; ++seed) {
    const Trajectory h = random_direction(p, seed);
    const double value = inner_product(p.grid, p.tgrid, g, h, kControlRule);
    const double lambda = 1e-6;
    const double j0 = cost(sol.state, u, p.data, p.grid, p.tgrid);
    const Trajectory ul = u + lambda * h;
    const auto sl = solve_state(p.data, ul, p.grid, p.tgrid, p.pot, p.cfg);
    const double fd = (cost(sl.state, ul, p.data, p.grid, p.tgrid) - j0) / lambda;
    EXPECT_LE(std::abs(value - fd), 1e-5 * (1.0 + std::abs(value)));
    EXPECT_LE(std::abs(value - fd), 1e-4 * std::abs(value));
  }
}

TEST(Sensitivity, DualityExactWithCouplingSweepsAndInTwoDimensions) {
  for (int variant = 0; variant < 2; ++variant) {
    Problem p = variant == 0 ? default_problem(24, 32) : default_problem(8, 16, 2);
    if (variant == 0) p.cfg.coupling_iters = 3;
    const auto u = interior_control(p, 5);
    const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
    const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Discrete);
    const Trajectory h = random_direction(p, 6);
    const auto t = solve_tangent(sol.state, h, p.data, p.grid, p.tgrid, p.pot, p.cfg);
    const auto d = duality_pairing(sol.state, t, adj, h, p.data, p.grid, p.tgrid);
    EXPECT_LE(std::abs(d.lhs - d.rhs), 1e-8 * (1.0 + std::abs(d.lhs))) << "variant " << variant;
  }
}

TEST(Sensitivity, PdeModeDualityConvergesUnderRefinement) {
  const double pi = std::numbers::pi;
  std::vector<double> mismatch;
  for (int f : {1, 2, 4}) {
    const Problem p = default_problem(16 * f, 32 * f);
    const auto u = space_time(p, [&](double t, double x) { return 0.5 + 0.2 * std::sin(pi * t) * std::cos(pi * x); });
    const auto h = space_time(p, [&](double t, double x) { return std::sin(2 * pi * t) + 0.5 * std::cos(2 * pi * x); });
    const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
    const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Pde);
    const auto t = solve_tangent(sol.state, h, p.data, p.grid, p.tgrid, p.pot, p.cfg);
    const auto d = duality_pairing(sol.state, t, adj, h, p.data, p.grid, p.tgrid);
    mismatch.push_back(std::abs(d.lhs - d.rhs));
  }
  EXPECT_GE(mismatch[0] / mismatch[1], 1.5);
  EXPECT_GE(mismatch[1] / mismatch[2], 1.5);
}

TEST(Sensitivity, AdjointModesAgreeUnderRefinement) {
  std::vector<double> gap;
  for (int steps : {64, 128, 256}) {
    const Problem p = default_problem(32, steps);
    const auto u = space_time(p, [](double t, double x) { return 0.5 + 0.3 * std::sin(3.0 * t) * std::cos(2.0 * x); });
    const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
    const auto a = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Discrete);
    const auto b = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Pde);
    double worst = 0.0;
    for (int k = 0; k < p.tgrid.levels(); ++k) worst = std::max(worst, norm(p.grid, InnerKind::L2, a.q[k] - b.q[k]));
    gap.push_back(worst);
  }
  EXPECT_GE(gap[0] / gap[1], 1.3);
  EXPECT_GE(gap[1] / gap[2], 1.3);
}

TEST(Sensitivity, RejectsMismatchedDirection) {
  const Problem p = default_problem(8, 4);
  const auto u = interior_control(p, 1);
  const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
  EXPECT_THROW(solve_tangent(sol.state, Trajectory(3, 8), p.data, p.grid, p.tgrid, p.pot, p.cfg), ShapeMismatch);
}

}  // namespace
