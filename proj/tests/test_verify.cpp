#include <gtest/gtest.h>

#include <cmath>

#include "phaseopt/errors.hpp"
#include "problems.hpp"

namespace {

using namespace phaseopt;
using namespace phaseopt::testing;

TEST(LoglogSlope, FitsPowerLaws) {
  std::vector<LadderPoint> ladder;
  for (double l : {1e-1, 1e-2, 1e-3}) ladder.push_back({l, 3.0 * l * l});
  ASSERT_TRUE(loglog_slope(ladder).has_value());
  EXPECT_NEAR(*loglog_slope(ladder), 2.0, 1e-12);
  EXPECT_FALSE(loglog_slope({{1e-1, 0.0}, {1e-2, 0.0}}).has_value());
  EXPECT_FALSE(loglog_slope({{1e-1, 1.0}}).has_value());
}

class VerifyTest : public ::testing::Test {
 protected:
  Problem p = default_problem(32, 64);
  Trajectory u = interior_control(p, 1);
  Trajectory zero = Trajectory(p.tgrid.levels(), p.grid.cells(), 0.0);
};

TEST_F(VerifyTest, FdGradientZeroDirection) {
  const auto rep = fd_gradient_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, zero, {1e-1, 1e-2});
  for (const auto& pt : rep.ladder) EXPECT_EQ(pt.error, 0.0);
  EXPECT_FALSE(rep.slope.has_value());
}

TEST_F(VerifyTest, FdGradientFirstOrderLadder) {
  const Trajectory h = random_direction(p, 2);
  const auto rep = fd_gradient_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, h, {1e-1, 1e-2, 1e-3, 1e-4});
  ASSERT_TRUE(rep.slope.has_value());
  EXPECT_GE(*rep.slope, 0.8);
  EXPECT_LE(*rep.slope, 1.2);
  // A first-order remainder gives a ratio of exactly 10 up to an O(lambda) correction of either sign.
  EXPECT_GE(rep.ladder[0].error / rep.ladder[1].error, 10.0 * 0.99);
}

TEST_F(VerifyTest, FdGradientRejectsInfeasiblePerturbation) {
  const Trajectory big(p.tgrid.levels(), p.grid.cells(), 10.0);
  EXPECT_THROW(fd_gradient_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, big, {1e-1}), InfeasibleControl);
}

TEST_F(VerifyTest, RemainderZeroDirectionAndQuartering) {
  const auto none = tangent_remainder_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, zero, {1e-1, 1e-2});
  for (const auto& pt : none.ladder) EXPECT_EQ(pt.error, 0.0);

  const Trajectory h = random_direction(p, 3);
  const auto rep = tangent_remainder_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, h, {1e-1, 3e-2, 1e-2, 3e-3});
  ASSERT_TRUE(rep.slope.has_value());
  EXPECT_GE(*rep.slope, 1.7);
  EXPECT_LE(*rep.slope, 2.3);
  const auto halves = tangent_remainder_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, h, {2e-2, 1e-2});
  const double q = halves.ladder[0].error / halves.ladder[1].error;
  EXPECT_GT(q, 4.0 / 1.5);
  EXPECT_LT(q, 4.0 * 1.5);
}

TEST_F(VerifyTest, StabilityDegenerateForEqualControls) {
  const auto rep = stability_ratio_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, u);
  EXPECT_TRUE(rep.degenerate);
  EXPECT_EQ(rep.ratio, 0.0);
  EXPECT_EQ(rep.ratio_strong, 0.0);
}

TEST(Stability, RatiosFiniteAndStableUnderRefinement) {
  const Problem coarse = default_problem(32, 64);
  const Problem fine = default_problem(64, 128);
  double lo = 1e300, hi = 0.0, hi_fine = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Trajectory u1 = random_control(coarse.grid, coarse.tgrid, 0.0, 1.0, 2 * seed);
    const Trajectory u2 = random_control(coarse.grid, coarse.tgrid, 0.0, 1.0, 2 * seed + 1);
    const auto rc = stability_ratio_check(coarse.data, coarse.grid, coarse.tgrid, coarse.pot, coarse.cfg, u1, u2);
    ASSERT_TRUE(std::isfinite(rc.ratio));
    ASSERT_TRUE(std::isfinite(rc.ratio_strong));
    EXPECT_FALSE(rc.degenerate);
    EXPECT_GT(rc.ratio, 0.0);
    lo = std::min(lo, rc.ratio);
    hi = std::max(hi, rc.ratio);
    if (seed < 5) {
      const auto rf = stability_ratio_check(fine.data, fine.grid, fine.tgrid, fine.pot, fine.cfg,
                                            prolong_trajectory(coarse.grid, fine.grid, u1),
                                            prolong_trajectory(coarse.grid, fine.grid, u2));
      ASSERT_TRUE(std::isfinite(rf.ratio));
      hi_fine = std::max(hi_fine, rf.ratio);
    }
  }
  EXPECT_LT(hi / lo, 1e3);
  EXPECT_LT(hi_fine, 10.0 * hi);
}

TEST(OdeOracle, StationaryTripleIsExact) {
  Problem p = uniform_problem(8, 16, 0.5, 0.0);
  const auto rep = ode_oracle_check(p.data, Trajectory(p.tgrid.levels(), p.grid.cells(), 0.0), p.grid, p.tgrid, p.pot, p.cfg);
  EXPECT_LE(rep.max_error, 1e-12);
}

TEST(OdeOracle, FirstOrderAndToleranceInsensitive) {
  std::vector<double> errors;
  for (int steps : {128, 256}) {
    Problem p = uniform_problem(8, steps, 0.4, 0.2);
    const Trajectory u(p.tgrid.levels(), p.grid.cells(), 0.1);
    errors.push_back(ode_oracle_check(p.data, u, p.grid, p.tgrid, p.pot, p.cfg).max_error);
    if (steps == 128) {
      p.cfg.newton_tol = 1e-8;
      const double loose = ode_oracle_check(p.data, u, p.grid, p.tgrid, p.pot, p.cfg).max_error;
      p.cfg.newton_tol = 1e-12;
      const double tight = ode_oracle_check(p.data, u, p.grid, p.tgrid, p.pot, p.cfg).max_error;
      EXPECT_LT(std::abs(loose - tight), 0.01 * tight);
    }
  }
  EXPECT_GT(errors[1] / errors[0], 0.35);
  EXPECT_LT(errors[1] / errors[0], 0.65);
}

TEST(OdeOracle, RejectsNonuniformData) {
  const Problem p = default_problem(8, 8);
  EXPECT_THROW(ode_oracle_check(p.data, Trajectory(p.tgrid.levels(), p.grid.cells(), 0.1), p.grid, p.tgrid, p.pot, p.cfg),
               InvalidArgument);
  Problem q = uniform_problem(8, 8, 0.4, 0.2);
  EXPECT_THROW(ode_oracle_check(q.data, interior_control(q, 1), q.grid, q.tgrid, q.pot, q.cfg), InvalidArgument);
}

TEST(BoundsCheck, StationaryRandomAndTampered) {
  Problem p = uniform_problem(16, 16, 0.5, 0.0);
  auto sol = solve_state(p.data, Trajectory(p.tgrid.levels(), p.grid.cells(), 0.0), p.grid, p.tgrid, p.pot, p.cfg);
  auto rep = bounds_check(sol.state, sol.diagnostics);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.rho_lower, 0.5);
  EXPECT_EQ(rep.rho_upper, 0.5);
  EXPECT_EQ(rep.mu_upper, 0.0);

  const Problem d = default_problem();
  sol = solve_state(d.data, random_control(d.grid, d.tgrid, 0.0, 1.0, 9), d.grid, d.tgrid, d.pot, d.cfg);
  EXPECT_TRUE(bounds_check(sol.state, sol.diagnostics).pass);

  sol.state.rho[5][7] = 1.2;
  rep = bounds_check(sol.state, sol.diagnostics);
  EXPECT_FALSE(rep.pass);
  ASSERT_TRUE(rep.violation.has_value());
  EXPECT_EQ(rep.violation->quantity, "rho");
  EXPECT_EQ(rep.violation->level, 5);
  EXPECT_EQ(rep.violation->cell, 7);
  EXPECT_EQ(rep.violation->value, 1.2);
}

TEST(RandomControl, DeterministicAndInRange) {
  const Problem p = default_problem(16, 8);
  const Trajectory a = random_control(p.grid, p.tgrid, 0.2, 0.6, 42);
  const Trajectory b = random_control(p.grid, p.tgrid, 0.2, 0.6, 42);
  const Trajectory c = random_control(p.grid, p.tgrid, 0.2, 0.6, 43);
  for (int k = 0; k < p.tgrid.levels(); ++k) EXPECT_EQ(a[k], b[k]);
  EXPECT_GT((a - c).max(), 0.0);
  EXPECT_GE(a.min(), 0.2);
  EXPECT_LE(a.max(), 0.6);
}

TEST(Refinement, ProlongationIsPiecewiseConstantAndLinearInTime) {
  const Problem p = default_problem(4, 2, 2);
  const RefinedProblem r = refine_problem(p.data, p.grid, p.tgrid);
  EXPECT_EQ(r.grid.n(0), 8);
  EXPECT_EQ(r.grid.n(1), 8);
  EXPECT_EQ(r.tgrid.steps(), 4);
  EXPECT_EQ(r.data.rho0[r.grid.index(3, 5)], p.data.rho0[p.grid.index(1, 2)]);
  Trajectory v(p.tgrid.levels(), p.grid.cells());
  v[0].setConstant(1.0);
  v[1].setConstant(3.0);
  v[2].setConstant(4.0);
  const Trajectory f = prolong_trajectory(p.grid, r.grid, v);
  ASSERT_EQ(f.levels(), 5);
  EXPECT_EQ(f[1][0], 2.0);
  EXPECT_EQ(f[3][7], 3.5);
  EXPECT_EQ(f[4][63], 4.0);
  EXPECT_THROW(prolong_field(p.grid, p.grid, p.data.rho0), InvalidArgument);
}

TEST(Reports, HashAndJson) {
  EXPECT_EQ(config_hash("abc"), config_hash("abc"));
  EXPECT_NE(config_hash("abc"), config_hash("abd"));
  EXPECT_EQ(config_hash("").size(), 16u);
  CheckReport r{"grad", true, {{"slope", 1.0}}, 7, config_hash("x")};
  const auto j = r.to_json();
  EXPECT_EQ(j.at("name"), "grad");
  EXPECT_EQ(j.at("pass"), true);
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("metrics").at("slope"), 1.0);
  EXPECT_EQ(j.at("config_hash"), config_hash("x"));
}

}  // namespace
