#pragma once

// Built-in oracle checks behind `vpfp selftest`.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vpfp/dynamics.hpp"
#include "vpfp/experiments.hpp"
#include "vpfp/kernels.hpp"
#include "vpfp/measures.hpp"
#include "vpfp/oracle/convolution.hpp"
#include "vpfp/oracle/kinetic.hpp"
#include "vpfp/stats_oracles.hpp"

namespace vpfp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline double slope_over(const std::vector<long long>& ns, const std::function<double(long long)>& f) {
  std::vector<double> xs, ys;
  for (long long n : ns) {
    xs.push_back(static_cast<double>(n));
    ys.push_back(f(n));
  }
  return fit_power_law(xs, ys).slope;
}

inline double brute_force_wasserstein(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double c = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) c += std::pow(euclidean(a.point(i), b.point(perm[i])), p);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best / static_cast<double>(a.size()), 1.0 / p);
}

}  // namespace detail

inline std::vector<CheckResult> run_selftest(std::uint64_t seed = 0) {
  using detail::num;
  std::vector<CheckResult> out;
  auto check = [&](std::string name, bool ok, std::string detail) { out.push_back({std::move(name), ok, std::move(detail)}); };
  const BumpProfile bump;

  {
    KernelConfig cfg;
    cfg.n_particles = 4096;
    const auto k = make_kernel(cfg, bump);
    CounterStream rng(seed, 0, Domain::oracle);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      const Vec3 x = rng.direction() * (cfg.cutoff_length() * (1.0 + 4.0 * rng.uniform()));
      const Vec3 e = coulomb(cfg, x);
      worst = std::max(worst, norm(k(x) - e) / norm(e));
    }
    check("kernel matches coulomb outside the cut-off", worst <= 1e-12, "max rel dev " + num(worst));
    const Vec3 y{0.01, -0.02, 0.003};
    const double odd = norm(k(y) + k(y * -1.0));
    check("kernel is odd and vanishes at 0", odd == 0.0 && norm(k({})) == 0.0, "|k(y)+k(-y)| " + num(odd));
  }
  {
    KernelConfig cfg;
    cfg.n_particles = 1000;
    CounterStream rng(seed, 1, Domain::oracle);
    const auto k = make_kernel(cfg, bump);
    double worst = 0;
    for (int i = 0; i < 5; ++i) {
      const Vec3 x = rng.direction() * (cfg.cutoff_length() * (0.05 + 0.9 * rng.uniform()));
      const Vec3 q = oracle::convolved_coulomb(cfg, bump, x);
      worst = std::max(worst, norm(k(x) - q) / norm(q));
    }
    check("shell theorem against direct convolution", worst <= 1e-6, "max rel dev " + num(worst));
  }
  {
    const std::vector<long long> ns{1 << 10, 1 << 14, 1 << 17, 1 << 20};
    KernelConfig cfg;
    const double s2 = detail::slope_over(ns, [&](long long n) {
      cfg.n_particles = n;
      return kernel_l2_norm(cfg, bump).value;
    });
    const double sg = detail::slope_over(ns, [&](long long n) {
      cfg.n_particles = n;
      return kernel_gradient_sup(cfg, bump);
    });
    check("||k^N||_2 slope delta/2", std::fabs(s2 - 1.0 / 6) <= 0.03, "slope " + num(s2));
    check("sup |grad k^N| slope 3 delta", std::fabs(sg - 1.0) <= 0.05, "slope " + num(sg));
    cfg.cutoff_exponent = 0.9;
    const double s1 = detail::slope_over(ns, [&](long long n) {
      cfg.n_particles = n;
      return singular_part_l1_norm(cfg, bump).value;
    });
    check("||k1^N||_1 slope -lambda2", std::fabs(s1 + 0.3) <= 0.05, "slope " + num(s1));
  }
  {
    const double grid = oracle::tensor_grid_mass(GreenEval(1.0), 21, 5.0, 25, 8.4);
    check("Green normalization against 6-D grid", std::fabs(grid - 1.0) <= 1e-6, "grid mass " + num(grid));
    double worst = 0;
    for (double t : {0.1, 0.5, 1.0, 2.0}) worst = std::max(worst, std::fabs(green_total_mass(GreenEval(t)) - 1.0));
    check("Green unit mass at t = 0.1 .. 2", worst <= 1e-6, "max |mass - 1| " + num(worst));
    const auto ode = oracle::lyapunov_covariance(1.0, 1.0);
    const auto cf = free_kinetic_moments(1.0, 1.0);
    const double dev = std::max({std::fabs(ode[0] - cf.var_x), std::fabs(ode[1] - cf.cov_xv), std::fabs(ode[2] - cf.var_v)});
    check("free moments against covariance ODE", dev <= 1e-12, "max dev " + num(dev));
  }
  {
    std::vector<double> ts, a, b;
    for (int k = 0; k < 6; ++k) {
      const double t = 0.05 * std::pow(10.0, k / 5.0);
      ts.push_back(t);
      a.push_back(green_sup_l1_norm(GreenEval(t)));
      b.push_back(green_shift_difference_norm(GreenEval(t), 1e-4));
    }
    const double sa = fit_power_law(ts, a).slope, sb = fit_power_law(ts, b).slope;
    check("||G_t||_{inf,1} slope -4.5", std::fabs(sa + 4.5) <= 0.1, "slope " + num(sa));
    check("shifted difference slope -6", std::fabs(sb + 6.0) <= 0.2, "slope " + num(sb));
  }
  {
    const auto r = brownian_max_tail(1.0, 1.0, 20000, seed, 200);
    const double z = std::fabs(r.empirical - r.analytic) / r.std_error;
    check("Brownian maximum against reflection", z <= 3.0, "z " + num(z));
    const ScalarGenerator rademacher = [](CounterStream& g) { return g.uniform() < 0.5 ? -1.0 : 1.0; };
    const double f = concentration_check(rademacher, [](double) { return 1.0; }, 10000, 5.0, 200, seed);
    check("concentration of bounded means", f == 0.0, "exceedance " + num(f));
  }
  {
    // zero-force kinetic diffusion vs the Green marginals
    SimParams p;
    p.sigma = 1.0;
    p.horizon = 1.0;
    p.dt = 1e-3;
    p.seed = seed;
    const std::size_t n = 10000;
    PhaseState s{std::vector<Vec3>(n), std::vector<Vec3>(n)};
    const std::vector<Vec3> zero(n);
    const NoiseSource noise(seed);
    for (std::size_t k = 0; k < p.num_steps(); ++k) advance(s, zero, p, noise, k, 0);
    std::vector<double> xs(n), vs(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = s.positions[i].x;
      vs[i] = s.velocities[i].x;
    }
    const GreenEval g(1.0);
    const double crit = ks_critical_value(n, 0.01);
    const double kx = ks_statistic(xs, [&](double x) { return green_marginal_cdf(g, false, x); });
    const double kv = ks_statistic(vs, [&](double v) { return green_marginal_cdf(g, true, v); });
    check("KS of free diffusion against Green marginals", kx < crit && kv < crit,
          "D_x " + num(kx) + ", D_v " + num(kv) + ", crit " + num(crit));
  }
  {
    CounterStream rng(seed, 2, Domain::oracle);
    double worst = 0;
    for (int inst = 0; inst < 50; ++inst) {
      const std::size_t n = 1 + inst % 6, d = 1 + inst % 3;
      std::vector<double> a(n * d), b(n * d);
      for (auto& c : a) c = rng.normal();
      for (auto& c : b) c = rng.normal();
      const EmpiricalMeasure ma(d, a), mb(d, b);
      for (double p : {1.0, 2.0})
        worst = std::max(worst, std::fabs(wasserstein_exact(ma, mb, p) - detail::brute_force_wasserstein(ma, mb, p)));
    }
    check("assignment solver against brute force", worst <= 1e-12, "max dev " + num(worst));
  }
  {
    const double c = collision_constant(DensityModel::gaussian(1.0));
    const double closed = std::pow(4.0 * std::numbers::pi / 3.0, 2.0 / 3.0) / (2.0 * std::numbers::pi * std::sqrt(3.0));
    check("collision constant from the L3 norm", std::fabs(c - closed) <= 1e-10, "C* " + num(c));
  }
  return out;
}

}  // namespace vpfp
