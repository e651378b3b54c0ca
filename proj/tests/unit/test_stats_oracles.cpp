#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "test_support.hpp"
#include "vpfp/quadrature.hpp"
#include "vpfp/oracle/kinetic.hpp"
#include "vpfp/stats_oracles.hpp"

using namespace vpfp;
using vpfp::testing::loglog_slope;

namespace {

// E[f(x, v)] over one Cartesian factor by 2-D adaptive quadrature.
template <class F>
double factor_moment(const GreenEval& g, F&& f) {
  const double t = g.time;
  const double rv = 14 * std::sqrt(2 * t), wx = std::sqrt(t * t * t / 6);
  return quad::integrate(
             [&](double v) {
               const double c = 0.5 * t * v;
               return quad::integrate([&](double x) { return f(x, v) * g.factor(x, v); }, c - 14 * wx, c + 14 * wx,
                                      {1e-300, 1e-13, 400})
                   .value;
             },
             -rv, rv, {1e-300, 1e-13, 400})
      .value;
}

}  // namespace

TEST(KineticGreen, NormalizationMatchesTensorGridAtTimeOne) {
  const GreenEval g(1.0);
  // h_x = 0.5, h_v = 0.7: aliasing error ~ exp(-(2 pi/h)^2 Sigma_jj / 2) < 1e-9
  const double grid = oracle::tensor_grid_mass(g, 21, 5.0, 25, 8.4);
  EXPECT_NEAR(grid, 1.0, 1e-6);
  EXPECT_NEAR(g.normalization, 0.020947986097634486, 1e-17);
}

TEST(KineticGreen, UnitMassAtSeveralTimes) {
  for (double t : {0.1, 0.5, 1.0, 2.0}) EXPECT_NEAR(green_total_mass(GreenEval(t)), 1.0, 1e-6) << t;
}

TEST(KineticGreen, SymmetryAndVelocityPeak) {
  const GreenEval g(0.7);
  CounterStream rng(1, 0);
  for (int k = 0; k < 50; ++k) {
    const Vec3 x = rng.normal3(), v = rng.normal3();
    EXPECT_NEAR(kinetic_green(g, x, v), kinetic_green(g, x * -1.0, v * -1.0), 1e-15);
    EXPECT_LT(kinetic_green(g, {}, v), kinetic_green(g, {}, {}));
  }
  EXPECT_THROW(GreenEval(0.0), InvalidArgument);
}

TEST(KineticGreen, FactorizesOverCoordinates) {
  const GreenEval g(0.3);
  const Vec3 x{0.1, -0.05, 0.2}, v{0.4, 0.3, -0.9};
  EXPECT_NEAR(kinetic_green(g, x, v), g.factor(x.x, v.x) * g.factor(x.y, v.y) * g.factor(x.z, v.z),
              1e-12 * kinetic_green(g, x, v));
}

TEST(FreeMoments, ClosedFormAgreesWithLyapunovAndQuadrature) {
  const auto m = free_kinetic_moments(1.0, 1.0);
  EXPECT_DOUBLE_EQ(m.var_v, 2.0);
  EXPECT_DOUBLE_EQ(m.cov_xv, 1.0);
  EXPECT_DOUBLE_EQ(m.var_x, 2.0 / 3.0);
  for (double sigma : {0.5, 1.0, 2.0}) {
    const auto ode = oracle::lyapunov_covariance(sigma, 1.3);
    const auto cf = free_kinetic_moments(sigma, 1.3);
    EXPECT_NEAR(ode[0], cf.var_x, 1e-12);
    EXPECT_NEAR(ode[1], cf.cov_xv, 1e-12);
    EXPECT_NEAR(ode[2], cf.var_v, 1e-12);
  }
  const auto zero = free_kinetic_moments(0.0, 2.0);
  EXPECT_EQ(zero.var_v + zero.cov_xv + zero.var_x, 0.0);

  const GreenEval g(0.5);
  const auto half = free_kinetic_moments(1.0, 0.5);
  EXPECT_NEAR(factor_moment(g, [](double, double v) { return v * v; }), half.var_v, 1e-5);
  EXPECT_NEAR(factor_moment(g, [](double x, double v) { return x * v; }), half.cov_xv, 1e-5);
  EXPECT_NEAR(factor_moment(g, [](double x, double) { return x * x; }), half.var_x, 1e-5);
}

TEST(KineticGreen, MarginalCdfMatchesQuadratureOfKernel) {
  const GreenEval g(1.0);
  const quad::Tolerance o{1e-300, 1e-12, 400};
  auto inner = [&](auto f, double c, double w) { return quad::integrate(f, c - 14 * w, c + 14 * w, o).value; };
  for (double x0 : {-1.0, -0.2, 0.4, 1.1}) {
    const double qx = quad::integrate(
                          [&](double x) { return inner([&](double v) { return g.factor(x, v); }, 1.5 * x, std::sqrt(0.5)); },
                          -12.0, x0, o)
                          .value;
    EXPECT_NEAR(green_marginal_cdf(g, false, x0), qx, 1e-7);
    const double qv = quad::integrate(
                          [&](double v) { return inner([&](double x) { return g.factor(x, v); }, 0.5 * v, std::sqrt(1.0 / 6)); },
                          -20.0, 2 * x0, o)
                          .value;
    EXPECT_NEAR(green_marginal_cdf(g, true, 2 * x0), qv, 1e-7);
  }
}

TEST(MixedNorms, SupL1NormScalesLikeTimeToMinusFourAndAHalf) {
  std::vector<double> ts, ns, ds;
  for (int k = 0; k < 6; ++k) {
    const double t = 0.05 * std::pow(10.0, k / 5.0);
    ts.push_back(t);
    ns.push_back(green_sup_l1_norm(GreenEval(t)));
    ds.push_back(green_shift_difference_norm(GreenEval(t), 1e-4) / 2e-4);
  }
  EXPECT_NEAR(loglog_slope(ts, ns), -4.5, 0.1);
  EXPECT_NEAR(loglog_slope(ts, ds), -6.0, 0.2);
}

TEST(MixedNorms, SupL1NormClosedFormAtOrigin) {
  // int G(0, v) dv = C t^-6 (pi t)^{3/2}
  const double t = 0.4;
  const double expected = GreenEval::kNormalization * std::pow(t, -6) * std::pow(std::numbers::pi * t, 1.5);
  EXPECT_NEAR(green_sup_l1_norm(GreenEval(t)), expected, 1e-8 * expected);
}

TEST(KolmogorovSmirnov, NormalSamplePassesAndShiftedFails) {
  CounterStream rng(3, 0);
  std::vector<double> s(20000), shifted(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    shifted[i] = s[i] + 0.1;
  }
  auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
  const double crit = ks_critical_value(s.size(), 0.01);
  EXPECT_LT(ks_statistic(s, cdf), crit);
  EXPECT_GT(ks_statistic(shifted, cdf), crit);
  EXPECT_NEAR(ks_critical_value(10000, 0.01), 0.016276, 1e-6);
}

TEST(Concentration, Examples) {
  const ScalarGenerator rademacher = [](CounterStream& r) { return r.uniform() < 0.5 ? -1.0 : 1.0; };
  const ScalarGenerator zero = [](CounterStream&) { return 0.0; };
  const auto one = [](double) { return 1.0; };
  EXPECT_EQ(concentration_check(rademacher, one, 10000, 5.0, 300, 1), 0.0);
  EXPECT_EQ(concentration_check(zero, one, 100, 5.0, 50, 1), 0.0);
  EXPECT_EQ(concentration_check(rademacher, one, 101, 0.0, 50, 1), 1.0);
}

TEST(BrownianMax, LimitsAndReflectionValue) {
  const auto far = brownian_max_tail(1.0, 100.0, 200, 1, 100);
  EXPECT_EQ(far.empirical, 0.0);
  const auto zero = brownian_max_tail(1.0, 0.0, 200, 1, 100);
  EXPECT_EQ(zero.empirical, 1.0);
  EXPECT_DOUBLE_EQ(zero.analytic, 1.0);
  const auto r = brownian_max_tail(1.0, 1.0, 20000, 2, 200);
  EXPECT_NEAR(r.analytic, 0.31731050786291410, 1e-15);
  EXPECT_LE(std::fabs(r.empirical - r.analytic), 3 * r.std_error);
  EXPECT_LT(r.grid_only, r.empirical);
  EXPECT_LE(r.analytic, brownian_tail_bound(1.0, 1.0));
}

TEST(Collisions, Examples) {
  PhaseState apart({{0, 0, 0}, {10, 0, 0}}, {{}, {}});
  for (auto c : collision_candidate_count(apart, 0.3, 0.01, 0.0, 2)) EXPECT_EQ(c, 0u);
  PhaseState together(std::vector<Vec3>(6, Vec3{1, 2, 3}), std::vector<Vec3>(6, Vec3{0.5, 0, 0}));
  for (auto c : collision_candidate_count(together, 0.3, 0.01, 0.005, 6)) EXPECT_EQ(c, 5u);
  EXPECT_THROW(collision_candidate_count(together, 0.3, 0.01, 0.02, 6), InvalidArgument);
}

TEST(Collisions, ConstantFromL3Norm) {
  // ||N(0, I)||_3 = 1/(2 pi sqrt 3); C* = that times (4 pi/3)^{2/3}
  EXPECT_NEAR(collision_constant(DensityModel::gaussian(1.0)), 0.23877301527512339, 1e-10);
  const double ball = collision_constant(DensityModel::uniform_ball(2.0));
  // uniform on radius R: ||rho||_3 = |B|^{-2/3}, C* = R^-2
  EXPECT_NEAR(ball, 0.25, 1e-10);
}

TEST(Collisions, MeanCountBelowBound) {
  const std::size_t n = 1024;
  CounterStream rng(5, 0);
  const auto s = sample_initial_phase(DensityModel::gaussian(1.0), VelocityModel::truncated_gaussian(1.0), n, rng);
  const double dt = std::pow(double(n), -0.09);
  const auto counts = collision_candidate_count(s, 0.3, dt, 0.5 * dt, n);
  double mean = 0;
  for (auto c : counts) mean += c;
  mean /= n;
  EXPECT_LT(mean, collision_bound(collision_constant(DensityModel::gaussian(1.0)), 0.3, dt, n));
}
