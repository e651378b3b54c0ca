#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vpfp/dynamics.hpp"

using namespace vpfp;

namespace {

KernelConfig config(long long n, double delta = 1.0 / 3, double a = 1.0) {
  KernelConfig c;
  c.strength = a;
  c.n_particles = n;
  c.cutoff_exponent = delta;
  return c;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  CounterStream rng(seed, 0);
  std::vector<Vec3> p(n);
  for (auto& q : p) q = rng.normal3() * scale;
  return p;
}

template <class Profile>
std::vector<Vec3> naive_force(const KernelConfig& cfg, const Profile& profile, const std::vector<Vec3>& x) {
  const auto k = make_kernel(cfg, profile);
  std::vector<Vec3> f(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j)
      if (j != i) f[i] += k(x[i] - x[j]);
    f[i] = f[i] / static_cast<double>(x.size() - 1);
  }
  return f;
}

SimParams free_params(double sigma, double horizon, double dt, std::uint64_t seed = 1) {
  SimParams p;
  p.sigma = sigma;
  p.horizon = horizon;
  p.dt = dt;
  p.seed = seed;
  return p;
}

const ForceField zero_force = [](const PhaseState&, std::span<Vec3> out) {
  for (auto& f : out) f = {};
};

}  // namespace

TEST(PairwiseForce, TwoParticlesOutsideCutoffFeelExactCoulomb) {
  const auto cfg = config(2);
  PhaseState s({{1, 0, 0}, {0, 0, 0}}, {{}, {}});
  const auto f = pairwise_force(cfg, BumpProfile{}, s);
  EXPECT_NEAR(f[0].x, 1.0, 1e-14);
  EXPECT_NEAR(f[1].x, -1.0, 1e-14);
  EXPECT_EQ(f[0].y, 0.0);
  EXPECT_EQ(f[1].z, 0.0);
}

TEST(PairwiseForce, CoincidentParticlesFeelNoForce) {
  PhaseState s(std::vector<Vec3>(9, Vec3{0.3, -1, 2}), std::vector<Vec3>(9));
  for (const auto& f : pairwise_force(config(9), WendlandProfile{}, s)) EXPECT_EQ(f, Vec3{});
}

TEST(PairwiseForce, MatchesDoubleLoop) {
  for (std::size_t n : {7u, 37u}) {
    const auto cfg = config(static_cast<long long>(n));
    // scale so some pairs fall inside the cut-off
    const auto x = random_points(n, 11, 0.3);
    PhaseState s(x, std::vector<Vec3>(n));
    const auto fast = pairwise_force(cfg, BumpProfile{}, s);
    const auto ref = naive_force(cfg, BumpProfile{}, x);
    const auto fast_w = pairwise_force(cfg, WendlandProfile{}, s);
    const auto ref_w = naive_force(cfg, WendlandProfile{}, x);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(norm(fast[i] - ref[i]), 1e-13 * std::max(1.0, norm(ref[i])));
      EXPECT_LE(norm(fast_w[i] - ref_w[i]), 1e-13 * std::max(1.0, norm(ref_w[i])));
    }
  }
}

TEST(PairwiseForce, ThreadCountDoesNotChangeBits) {
  const auto x = random_points(301, 5);
  PhaseState s(x, std::vector<Vec3>(x.size()));
  const auto one = pairwise_force(config(301), BumpProfile{}, s, Exec{1, true});
  const auto four = pairwise_force(config(301), BumpProfile{}, s, Exec{4, true});
  EXPECT_EQ(one, four);
}

TEST(PairwiseForce, RejectsSingleParticle) {
  PhaseState s(1);
  EXPECT_THROW(pairwise_force(config(2), BumpProfile{}, s), InvalidArgument);
}

TEST(PairwiseEll, CoincidentParticlesSeePeak) {
  const auto cfg = config(64);
  PhaseState s(std::vector<Vec3>(5, Vec3{1, 1, 1}), std::vector<Vec3>(5));
  for (double l : pairwise_ell(cfg, s)) EXPECT_DOUBLE_EQ(l, std::pow(64.0, 1.0));
}

TEST(PairwiseEll, FarPairIsOneEighthOfPeak) {
  const auto cfg = config(2);
  const double d = 12.0 * std::pow(2.0, -1.0 / 3);
  PhaseState s({{0, 0, 0}, {0, d, 0}}, {{}, {}});
  for (double l : pairwise_ell(cfg, s)) EXPECT_NEAR(l, 2.0 / 8.0, 1e-14);
}

TEST(PairwiseEll, MatchesDoubleLoopAndStaysInRange) {
  const auto cfg = config(5);
  const auto x = random_points(5, 3, 0.5);
  const auto l = pairwise_ell(cfg, PhaseState(x, std::vector<Vec3>(5)));
  const CutoffMajorant ell_n(cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    double ref = 0;
    for (std::size_t j = 0; j < 5; ++j)
      if (j != i) ref += ell_n(x[i] - x[j]);
    ref /= 4.0;
    EXPECT_NEAR(l[i], ref, 1e-13 * ref);
    EXPECT_GT(l[i], 0.0);
    EXPECT_LE(l[i], ell_n.peak() * (1 + 1e-15));
  }
}

TEST(ReferenceEnsemble, TrivialCases) {
  const Vec3 x{0.2, 0.1, -0.4};
  PhaseState one({x}, {{}});
  EXPECT_EQ(reference_ensemble_force(config(16), BumpProfile{}, one, x), Vec3{});
  PhaseState many(random_points(20, 9), std::vector<Vec3>(20));
  EXPECT_EQ(reference_ensemble_force(config(16, 1.0 / 3, 0.0), BumpProfile{}, many, x), Vec3{});
}

TEST(ReferenceEnsemble, ConvergesToExactMeanField) {
  const auto cfg = config(1000);
  const auto density = DensityModel::gaussian(1.0);
  CounterStream rng(2024, 0);
  const std::size_t m = 100000;
  PhaseState ens(density.sample(rng, m), std::vector<Vec3>(m));
  const Vec3 x{0.4, -0.3, 0.5};
  const auto est = reference_ensemble_force(cfg, BumpProfile{}, ens, x);
  const auto exact = meanfield_force_exact(cfg, BumpProfile{}, density, x).value;
  const auto k = make_kernel(cfg, BumpProfile{});
  Vec3 sq{};
  for (const auto& y : ens.positions) {
    const Vec3 d = k(x - y) - exact;
    sq += Vec3{d.x * d.x, d.y * d.y, d.z * d.z};
  }
  for (int c = 0; c < 3; ++c) {
    const double se = std::sqrt(sq[c] / (m - 1.0) / m);
    EXPECT_LE(std::fabs(est[c] - exact[c]), 3 * se) << "component " << c;
  }
}

TEST(ReferenceEnsemble, SelfExclusionIsOnlyTheWeight) {
  const std::size_t n = 50;
  const auto cfg = config(n);
  const PointsSoA cloud(random_points(n, 4, 0.4));
  std::vector<Vec3> pair(n), ref(n);
  pairwise_force(cfg, BumpProfile{}, cloud, pair);
  reference_ensemble_force(cfg, BumpProfile{}, cloud, cloud, ref);
  for (std::size_t i = 0; i < n; ++i)
    EXPECT_LE(norm(pair[i] * ((n - 1.0) / n) - ref[i]), 1e-14 * std::max(1.0, norm(ref[i])));
}

TEST(Step, FreeStreaming) {
  PhaseState s({{0, 0, 0}}, {{1, 0, 0}});
  const auto p = free_params(0.0, 1.0, 0.01);
  const NoiseSource noise(1);
  for (std::size_t k = 0; k < 25; ++k) s = step(s, zero_force, p, noise, k);
  EXPECT_NEAR(s.positions[0].x, 0.25, 1e-14);
  EXPECT_EQ(s.velocities[0], (Vec3{1, 0, 0}));
}

TEST(Step, NoiseFreeStepIsExplicitEuler) {
  PhaseState s({{1, 2, 3}, {0, 0, 1}}, {{0.5, 0, 0}, {0, -1, 0}});
  const ForceField f = [](const PhaseState& st, std::span<Vec3> out) {
    for (std::size_t i = 0; i < st.size(); ++i) out[i] = st.positions[i] * -2.0;
  };
  const auto p = free_params(0.0, 1.0, 0.1);
  const auto next = step(s, f, p, NoiseSource(3), 0);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(next.positions[i], s.positions[i] + s.velocities[i] * 0.1);
    EXPECT_EQ(next.velocities[i], s.velocities[i] + s.positions[i] * -2.0 * 0.1);
  }
  auto kd = p;
  kd.integrator = Integrator::kick_drift;
  const auto semi = step(s, f, kd, NoiseSource(3), 0);
  EXPECT_EQ(semi.positions[0], s.positions[0] + semi.velocities[0] * 0.1);
}

TEST(Step, ForceTimesDtIsInvariant) {
  PhaseState s({{1, 0, 0}}, {{0, 0, 0}});
  auto scaled = [](double c) {
    return ForceField([c](const PhaseState&, std::span<Vec3> out) { out[0] = Vec3{1, 2, 3} * c; });
  };
  const auto a = step(s, scaled(1.0), free_params(0.0, 1.0, 0.2), NoiseSource(0), 0);
  const auto b = step(s, scaled(4.0), free_params(0.0, 1.0, 0.05), NoiseSource(0), 0);
  EXPECT_NEAR(norm(a.velocities[0] - b.velocities[0]), 0.0, 1e-15);
}

TEST(Step, BlowUpNamesParticleAndStep) {
  PhaseState s(3);
  const ForceField bad = [](const PhaseState&, std::span<Vec3> out) {
    out[0] = {};
    out[1] = {};
    out[2] = {INFINITY, 0, 0};
  };
  try {
    step(s, bad, free_params(0.0, 1.0, 0.1), NoiseSource(0), 17);
    FAIL() << "expected IntegrationBlowUp";
  } catch (const IntegrationBlowUp& e) {
    EXPECT_EQ(e.particle(), 2u);
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(Step, FreeKineticMomentsAtTimeOne) {
  // Each "particle" is an independent path; sigma = 1, dt = 0.01.
  const std::size_t runs = 20000;
  PhaseState s(runs);
  const auto p = free_params(1.0, 1.0, 0.01, 77);
  const NoiseSource noise(p.seed);
  std::vector<Vec3> zero(runs);
  for (std::size_t k = 0; k < p.num_steps(); ++k) advance(s, zero, p, noise, k);
  for (int c = 0; c < 3; ++c) {
    double vv = 0, xv = 0, xx = 0;
    for (std::size_t i = 0; i < runs; ++i) {
      vv += s.velocities[i][c] * s.velocities[i][c];
      xv += s.positions[i][c] * s.velocities[i][c];
      xx += s.positions[i][c] * s.positions[i][c];
    }
    // standard errors at n = 2e4: Var(v) 0.02, Cov 0.011, Var(x) 0.0067
    EXPECT_NEAR(vv / runs, 2.0, 0.08);
    EXPECT_NEAR(xv / runs, 1.0, 0.05);
    EXPECT_NEAR(xx / runs, 2.0 / 3.0, 0.03);
  }
}

TEST(Simulate, MomentumConservedWithoutNoise) {
  const std::size_t n = 64;
  const auto cfg = config(n);
  PhaseState s(random_points(n, 21, 0.5), random_points(n, 22, 0.2));
  auto p = free_params(0.0, 1.0, 1e-3);
  Vec3 p0{};
  double scale = 0;
  for (const auto& v : s.velocities) {
    p0 += v;
    scale += norm(v);
  }
  const auto out = simulate(cfg, BumpProfile{}, s, p);
  Vec3 p1{};
  for (const auto& v : out.velocities) p1 += v;
  EXPECT_LE(norm(p1 - p0) / scale, 1e-10);
}

TEST(Simulate, SameSeedIsBitIdentical) {
  const std::size_t n = 40;
  PhaseState s(random_points(n, 1), random_points(n, 2));
  auto p = free_params(0.5, 0.05, 1e-3, 99);
  const auto a = simulate(config(n), BumpProfile{}, s, p);
  const auto b = simulate(config(n), BumpProfile{}, s, p, Exec{3, true});
  EXPECT_EQ(a, b);
  p.seed = 100;
  EXPECT_FALSE(a == simulate(config(n), BumpProfile{}, s, p));
}

TEST(SimParams, StepCountAndValidation) {
  EXPECT_EQ(free_params(0, 0.5, 5e-4).num_steps(), 1000u);
  EXPECT_EQ(free_params(0, 1.0, 0.3).num_steps(), 4u);
  EXPECT_EQ(free_params(0, 1.0, 0.1).num_steps(), 10u);
  EXPECT_THROW(free_params(0, 1.0, 2.0).validate(), InvalidArgument);
  EXPECT_THROW(free_params(-1, 1.0, 0.1).validate(), InvalidArgument);
  EXPECT_NO_THROW(free_params(0, 1.0, 0.1).validate());
}

TEST(DistanceNorm, Examples) {
  PhaseState a(random_points(100, 1), random_points(100, 2));
  EXPECT_EQ(distance_norm(a, a, 100), 0.0);
  PhaseState b = a;
  b.velocities[7].y += 0.5;
  EXPECT_NEAR(distance_norm(a, b, 100), 0.5, 1e-15);
  PhaseState c = a;
  c.positions[3].z -= 0.1;
  c.positions[4].x += 0.05;
  EXPECT_NEAR(distance_norm(a, c, 100), 0.21459660262893472, 1e-15);
  EXPECT_THROW(distance_norm(a, PhaseState(99), 100), DimensionMismatch);
}

TEST(RunCoupled, StartsAtZeroAndRecordsConsistently) {
  const auto cfg = config(8);
  auto p = free_params(0.5, 0.1, 1e-3, 5);
  const auto rec = run_coupled(cfg, BumpProfile{}, DensityModel::gaussian(1.0),
                               VelocityModel::truncated_gaussian(1.0), 8, 64, p);
  ASSERT_FALSE(rec.times.empty());
  EXPECT_EQ(rec.distances.front(), 0.0);
  EXPECT_EQ(rec.times.size(), rec.distances.size());
  EXPECT_EQ(rec.times.size(), rec.running_max.size());
  EXPECT_EQ(rec.times.size(), 11u);
  for (std::size_t k = 1; k < rec.times.size(); ++k) {
    EXPECT_GT(rec.times[k], rec.times[k - 1]);
    EXPECT_GE(rec.running_max[k], rec.running_max[k - 1]);
    EXPECT_GE(rec.running_max[k], rec.distances[k]);
  }
  EXPECT_GT(rec.max_distance(), 0.0);
  EXPECT_NEAR(rec.times.back(), 0.1, 1e-15);
}

TEST(RunCoupled, NoNoiseNoChargeStaysTogether) {
  const auto cfg = config(8, 1.0 / 3, 0.0);
  auto p = free_params(0.0, 0.1, 1e-2, 5);
  const auto rec = run_coupled(cfg, BumpProfile{}, DensityModel::gaussian(1.0),
                               VelocityModel::truncated_gaussian(1.0), 8, 64, p);
  for (double d : rec.distances) EXPECT_EQ(d, 0.0);
}

TEST(RunCoupled, ReferenceUsesDisjointNoise) {
  // With zero charge the ensemble's first particle would track Phi's first
  // particle only if they shared noise keys.
  const auto cfg = config(4, 1.0 / 3, 0.0);
  auto p = free_params(1.0, 0.05, 1e-2, 8);
  PhaseState init(4);
  const auto rec = run_coupled(cfg, BumpProfile{}, init, PhaseState(8), p);
  EXPECT_NE(rec.final_phi.velocities[0], rec.final_reference.velocities[0]);
  EXPECT_EQ(rec.final_phi, rec.final_psi);
}

TEST(RunCoupled, SnapshotsAtRequestedSteps) {
  auto p = free_params(0.5, 0.02, 1e-3, 1);
  PhaseState init(random_points(4, 1), random_points(4, 2));
  CouplingOptions opt;
  opt.snapshot_every = 10;
  const auto rec = run_coupled(config(4), BumpProfile{}, init, PhaseState(random_points(16, 3), random_points(16, 4)),
                               p, {}, opt);
  ASSERT_EQ(rec.snapshots.size(), 3u);
  EXPECT_EQ(rec.snapshots[0].phi, init);
  EXPECT_NEAR(rec.snapshots[2].time, 0.02, 1e-15);
}

TEST(Consistency, MockedKernelsGiveTheirDifference) {
  std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  const double r = consistency_residual_core(
      pts, [](std::span<const Vec3> x) { return std::vector<Vec3>(x.size(), Vec3{0.75, 0, 0}); },
      [](const Vec3&) { return Vec3{0.25, 0, 0}; });
  EXPECT_DOUBLE_EQ(r, 0.5);
  const double rl = consistency_residual_core(
      pts, [](std::span<const Vec3> x) { return std::vector<double>(x.size(), 3.0); },
      [](const Vec3&) { return 1.0; });
  EXPECT_DOUBLE_EQ(rl, 2.0);
}

TEST(Consistency, ZeroChargeGivesZero) {
  CounterStream rng(1, 0);
  EXPECT_EQ(consistency_residual(config(100, 1.0 / 3, 0.0), BumpProfile{}, DensityModel::gaussian(1.0),
                                 VelocityModel::truncated_gaussian(1.0), 100, rng),
            0.0);
}

TEST(Consistency, ResidualIsSmallAndReproducible) {
  const auto cfg = config(500);
  const auto d = DensityModel::gaussian(1.0);
  const auto v = VelocityModel::truncated_gaussian(1.0);
  CounterStream a(3, 0), b(3, 0);
  const double ra = consistency_residual(cfg, BumpProfile{}, d, v, 500, a);
  const double rb = consistency_residual(cfg, BumpProfile{}, d, v, 500, b);
  EXPECT_EQ(ra, rb);
  EXPECT_GT(ra, 0.0);
  EXPECT_LT(ra, 0.5);
  CounterStream c(4, 0);
  const double rl = ell_consistency_residual(cfg, d, v, 500, c);
  EXPECT_GT(rl, 0.0);
  EXPECT_TRUE(std::isfinite(rl));
}

TEST(Consistency, DistinctSamplerReturnsDistinctPoints) {
  CounterStream rng(10, 0);
  const auto pts = sample_distinct_positions(DensityModel::uniform_ball(1.0), 1000, rng);
  EXPECT_EQ(pts.size(), 1000u);
}
