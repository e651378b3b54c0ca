#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "test_support.hpp"
#include "vpfp/fields.hpp"
#include "vpfp/quadrature.hpp"

using namespace vpfp;
using vpfp::testing::loglog_slope;

namespace {

KernelConfig config(long long n, double delta = 1.0 / 3, double a = 1.0) {
  KernelConfig c;
  c.strength = a;
  c.n_particles = n;
  c.cutoff_exponent = delta;
  c.wide_cutoff_exponent = 0.3;
  return c;
}

double total_mass(const DensityModel& d) {
  const double top = d.outer_radius();
  return quad::integrate([&](double r) { return 4 * std::numbers::pi * r * r * d.radial_density(r); }, 0.0, top,
                         {1e-12, 1e-12, 2000})
      .value;
}

// Angular average of rho over the sphere {|y - c| = t}, |c| = s, split where
// the sphere crosses the density's support boundary so each piece is smooth.
double angular_mean(const DensityModel& d, double t, double s, int nodes) {
  const quad::GaussLegendre gl(nodes);
  auto f = [&](double mu) { return d.radial_density(std::sqrt(std::max(0.0, t * t + s * s + 2 * t * s * mu))); };
  const double big = d.support_radius();
  double cut = 2.0;
  if (std::isfinite(big) && t > 0 && s > 0) cut = (big * big - t * t - s * s) / (2 * t * s);
  if (cut > -1.0 && cut < 1.0) return 0.5 * (gl.integrate(f, -1.0, cut) + gl.integrate(f, cut, 1.0));
  return 0.5 * gl.integrate(f, -1.0, 1.0);
}

// Independent route to M(s, r): integrate rho over the ball in spherical
// coordinates around the ball centre.
double ball_mass_direct(const DensityModel& d, double s, double r) {
  return quad::integrate([&](double t) { return 4 * std::numbers::pi * t * t * angular_mean(d, t, s, 64); }, 0.0, r,
                         {1e-11, 1e-11, 2000})
      .value;
}

double sphere_mean_direct(const DensityModel& d, double u, double s) { return angular_mean(d, u, s, 200); }

DensityModel custom_density() {
  // (1 - r^2)^2 on the ball of radius 2, unnormalized
  return DensityModel(RadialCustom([](double r) { return std::pow(1.0 - r * r / 4.0, 2); }, 2.0));
}

double r_squared_linear(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  const double cov = sxy - sx * sy / n;
  return cov * cov / ((sxx - sx * sx / n) * (syy - sy * sy / n));
}

}  // namespace

TEST(Densities, UnitMass) {
  EXPECT_NEAR(total_mass(DensityModel::gaussian(1.0)), 1.0, 1e-6);
  EXPECT_NEAR(total_mass(DensityModel::gaussian(0.3)), 1.0, 1e-6);
  EXPECT_NEAR(total_mass(DensityModel::uniform_ball(2.0)), 1.0, 1e-6);
  EXPECT_NEAR(total_mass(custom_density()), 1.0, 1e-6);
  EXPECT_THROW(DensityModel::gaussian(0.0), InvalidArgument);
  EXPECT_THROW(DensityModel::uniform_ball(-1.0), InvalidArgument);
}

TEST(Densities, EnclosedChargeMatchesQuadrature) {
  for (const auto& d : {DensityModel::gaussian(1.3), DensityModel::uniform_ball(0.7), custom_density()}) {
    for (double r : {0.1, 0.5, 0.69, 1.0, 1.9, 3.0}) {
      const double q = quad::integrate([&](double t) { return 4 * std::numbers::pi * t * t * d.radial_density(t); },
                                       0.0, r, {1e-13, 1e-13, 2000})
                           .value;
      EXPECT_NEAR(d.enclosed_charge(r), q, 1e-9) << d.name() << " r=" << r;
    }
  }
}

TEST(Densities, BallMassClosedFormsAgreeWithDirectIntegration) {
  for (const auto& d : {DensityModel::gaussian(1.0), DensityModel::gaussian(0.5), DensityModel::uniform_ball(1.0),
                        custom_density()}) {
    for (double s : {0.0, 1e-3, 0.05, 0.4, 1.1, 2.5}) {
      for (double r : {0.01, 0.3, 0.9, 1.6, 4.0}) {
        EXPECT_NEAR(d.ball_mass(s, r), ball_mass_direct(d, s, r), 2e-7) << d.name() << " s=" << s << " r=" << r;
      }
    }
  }
}

TEST(Densities, SphereMeanClosedFormsAgreeWithDirectIntegration) {
  for (const auto& d : {DensityModel::gaussian(1.0), DensityModel::gaussian(2.0), DensityModel::uniform_ball(1.0),
                        custom_density()}) {
    for (double s : {0.0, 0.02, 0.5, 1.5}) {
      for (double u : {1e-3, 0.2, 0.8, 1.3, 3.0}) {
        const double want = sphere_mean_direct(d, u, s);
        EXPECT_NEAR(d.sphere_mean(u, s), want, 1e-9 * want + 1e-12) << d.name() << " s=" << s << " u=" << u;
      }
    }
  }
}

TEST(Sampling, RejectsEmptyEnsemble) {
  CounterStream rng(1, 0);
  EXPECT_THROW(sample_initial_phase(DensityModel::gaussian(1), VelocityModel::truncated_gaussian(1), 0, rng),
               InvalidArgument);
}

TEST(Sampling, GaussianCovarianceNearIdentity) {
  CounterStream rng(2, 0);
  const auto s = sample_initial_phase(DensityModel::gaussian(1), VelocityModel::truncated_gaussian(1), 100000, rng);
  double cov[3][3] = {};
  Vec3 mean;
  for (const auto& x : s.positions) mean += x;
  mean = mean / static_cast<double>(s.size());
  for (const auto& x : s.positions)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) EXPECT_NEAR(cov[a][b] / 100000.0, a == b ? 1.0 : 0.0, 0.02);
}

TEST(Sampling, MomentsForEveryDensityKind) {
  for (const auto& d : {DensityModel::uniform_ball(1.5), custom_density()}) {
    CounterStream rng(3, 0);
    const auto pts = d.sample(rng, 100000);
    double m2 = 0.0;
    for (const auto& x : pts) m2 += norm2(x);
    EXPECT_NEAR(m2 / pts.size() / 3.0, d.second_moment_per_axis(), 0.02 * d.second_moment_per_axis()) << d.name();
  }
}

TEST(Sampling, TruncatedVelocityHasCompactSupport) {
  CounterStream rng(4, 0);
  const auto model = VelocityModel::truncated_gaussian(1.0, 3.0);
  int outside = 0;
  for (int i = 0; i < 1000000; ++i) outside += norm(model.sample(rng)) > 3.0;
  EXPECT_EQ(outside, 0);
  EXPECT_EQ(model.evaluate({3.1, 0, 0}), 0.0);
  EXPECT_EQ(VelocityModel::truncated_gaussian(2.0).cutoff(), 8.0);
  EXPECT_EQ(VelocityModel::uniform_ball(2.0).evaluate({0, 2.01, 0}), 0.0);
}

TEST(Sampling, Deterministic) {
  CounterStream a(77, 5), b(77, 5);
  const auto d = DensityModel::gaussian(1);
  const auto v = VelocityModel::truncated_gaussian(1);
  EXPECT_EQ(sample_initial_phase(d, v, 500, a), sample_initial_phase(d, v, 500, b));
}

TEST(MeanField, UniformBallExteriorIsExactCoulomb) {
  const auto c = config(1024);
  const auto d = DensityModel::uniform_ball(1.0);
  const Vec3 x{0.9, 0.7, -0.5};
  ASSERT_GT(norm(x), 1.0 + c.cutoff_length());
  const Vec3 f = meanfield_force_exact(c, BumpProfile{}, d, x).value;
  EXPECT_EQ(f, coulomb(c, x));
  // unregularized kernel: total charge enclosed
  const Vec3 g = meanfield_force_exact(c, PointChargeProfile{}, d, Vec3{1.05, 0, 0}).value;
  EXPECT_EQ(g, coulomb(c, {1.05, 0, 0}));
}

TEST(MeanField, OriginAndZeroStrength) {
  EXPECT_EQ(meanfield_force_exact(config(1024), BumpProfile{}, DensityModel::gaussian(1), {0, 0, 0}).value,
            (Vec3{0, 0, 0}));
  EXPECT_EQ(meanfield_force_exact(config(1024, 1.0 / 3, 0.0), BumpProfile{}, DensityModel::gaussian(1), {1, 2, 3}).value,
            (Vec3{0, 0, 0}));
  EXPECT_EQ(meanfield_force_sup_norm(config(1024, 1.0 / 3, 0.0), BumpProfile{}, DensityModel::gaussian(1)), 0.0);
}

TEST(MeanField, RadialFieldIsParallelToPosition) {
  CounterStream rng(5, 0);
  const auto c = config(4096);
  for (const auto& d : {DensityModel::gaussian(1.0), DensityModel::uniform_ball(1.0), custom_density()}) {
    for (int i = 0; i < 20; ++i) {
      const Vec3 x = rng.normal3();
      const Vec3 f = meanfield_force_exact(c, BumpProfile{}, d, x).value;
      const Vec3 cross{f.y * x.z - f.z * x.y, f.z * x.x - f.x * x.z, f.x * x.y - f.y * x.x};
      EXPECT_LE(norm(cross), 1e-10 * norm(f) * norm(x));
      EXPECT_GT(dot(f, x), 0.0);
    }
  }
}

TEST(MeanField, GaussianMatchesMonteCarlo) {
  const auto c = config(1024);
  const auto d = DensityModel::gaussian(1.0);
  const auto kernel = make_kernel(c, BumpProfile{});
  const Vec3 x{1, 0, 0};
  CounterStream rng(6, 0);
  const int n = 400000;
  Vec3 sum, sum2;
  for (int i = 0; i < n; ++i) {
    const Vec3 k = kernel(x - d.sample(rng));
    sum += k;
    sum2 += Vec3{k.x * k.x, k.y * k.y, k.z * k.z};
  }
  const Vec3 mean = sum / n;
  const Vec3 exact = meanfield_force_exact(c, BumpProfile{}, d, x).value;
  for (int a = 0; a < 3; ++a) {
    const double se = std::sqrt((sum2[a] / n - mean[a] * mean[a]) / n);
    EXPECT_NEAR(mean[a], exact[a], 3 * se) << a;
  }
}

TEST(MeanField, SupNormIndependentOfN) {
  const auto d = DensityModel::gaussian(1.0);
  double lo = INFINITY, hi = 0.0;
  for (int e = 8; e <= 16; ++e) {
    const double v = meanfield_force_sup_norm(config(1LL << e), BumpProfile{}, d);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT((hi - lo) / lo, 0.05);
}

TEST(MeanField, UniformBallSupMatchesGridScan) {
  const auto c = config(1LL << 16);
  const auto d = DensityModel::uniform_ball(1.0);
  double scan = 0.0;
  for (int k = 1; k <= 20000; ++k) {
    const double r = 3.0 * k / 20000;
    scan = std::max(scan, norm(meanfield_force_exact(c, BumpProfile{}, d, {r, 0, 0}).value));
  }
  const double sup = meanfield_force_sup_norm(c, BumpProfile{}, d);
  EXPECT_NEAR(sup, scan, 1e-6 * scan);
  // unmollified charge: max_r Q(r)/r^2 = 1 at r = 1
  EXPECT_NEAR(sup, 1.0, 0.02);
  EXPECT_LE(sup, 1.0);
}

TEST(EllConvolution, FarFieldOfUniformBall) {
  const auto v = ell_convolution(config(1024), DensityModel::uniform_ball(1.0), {10, 0, 0}).value;
  EXPECT_NEAR(v, 216.0 / 1000.0, 0.05 * 216.0 / 1000.0);
}

TEST(EllConvolution, MatchesMonteCarlo) {
  const auto c = config(4096);
  const auto d = DensityModel::gaussian(1.0);
  const CutoffMajorant ell_n(c);
  const Vec3 x{0.4, -0.3, 0.2};
  CounterStream rng(7, 0);
  const int n = 400000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double l = ell_n(x - d.sample(rng));
    s += l;
    s2 += l * l;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(ell_convolution(c, d, x).value, mean, 3 * se);
}

TEST(EllConvolution, SupGrowsLikeLogN) {
  const auto d = DensityModel::gaussian(1.0);
  std::vector<double> logn, sup, ns, sup2;
  for (int e = 8; e <= 20; ++e) {
    const auto c = config(1LL << e);
    logn.push_back(std::log(c.n()));
    ns.push_back(c.n());
    sup.push_back(ell_convolution_sup(c, d));
    sup2.push_back(ell_power_convolution_sup(c, d, 2));
  }
  EXPECT_GE(r_squared_linear(logn, sup), 0.99);
  EXPECT_NEAR(loglog_slope(ns, sup2), 1.0, 0.1);
}
