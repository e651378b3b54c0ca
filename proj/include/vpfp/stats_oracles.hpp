#pragma once

// Analytic and Monte Carlo oracles: the free kinetic Fokker-Planck kernel,
// its moments and mixed norms, concentration and Brownian-maximum checks, and
// collision-candidate counts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "vpfp/errors.hpp"
#include "vpfp/fields.hpp"
#include "vpfp/phase_state.hpp"
#include "vpfp/quadrature.hpp"
#include "vpfp/random.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp {

// --- kinetic kernel --------------------------------------------------------------

/// G(x, v, t) = C t^-6 exp(-|v|^2/(4t) - 3|x - t v/2|^2 / t^3), the fundamental
/// solution of d_t + v.grad_x - Lap_v started from (0, 0).
///
/// int exp(-|v|^2/4t) dv = (4 pi t)^{3/2} and int exp(-3|y|^2/t^3) dy =
/// (pi t^3/3)^{3/2}, so C = 3^{3/2} / (8 pi^3).
struct GreenEval {
  static constexpr double kNormalization =
      3.0 * std::numbers::sqrt3 / (8.0 * std::numbers::pi * std::numbers::pi * std::numbers::pi);

  double time;
  double normalization;

  explicit GreenEval(double t) : time(t), normalization(kNormalization) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("GreenEval: time must be > 0");
  }

  /// One Cartesian factor: G = prod_k factor(x_k, v_k).
  double factor(double x, double v) const {
    const double t = time;
    const double y = x - 0.5 * t * v;
    return std::cbrt(normalization) / (t * t) * std::exp(-v * v / (4.0 * t) - 3.0 * y * y / (t * t * t));
  }
};

inline double kinetic_green(const GreenEval& g, const Vec3& x, const Vec3& v) {
  const double t = g.time;
  const Vec3 y = x - v * (0.5 * t);
  return g.normalization / std::pow(t, 6) * std::exp(-norm2(v) / (4.0 * t) - 3.0 * norm2(y) / (t * t * t));
}

/// Per-component second moments of dX = V dt, dV = sqrt(2 sigma) dB from rest.
struct KineticMoments {
  double var_v;
  double cov_xv;
  double var_x;
};

inline KineticMoments free_kinetic_moments(double sigma, double t) {
  if (!(t > 0.0)) throw InvalidArgument("free_kinetic_moments: t must be > 0");
  if (!(sigma >= 0.0)) throw InvalidArgument("free_kinetic_moments: sigma must be >= 0");
  return {2.0 * sigma * t, sigma * t * t, 2.0 / 3.0 * sigma * t * t * t};
}

/// CDF of one coordinate of G's position (is_velocity = false) or velocity
/// marginal; both are centred Gaussians with the free moments at sigma = 1.
inline double green_marginal_cdf(const GreenEval& g, bool is_velocity, double value) {
  const auto m = free_kinetic_moments(1.0, g.time);
  const double var = is_velocity ? m.var_v : m.var_x;
  return detail::std_normal_cdf(value / std::sqrt(var));
}

namespace detail {

// Integral over [c - radius, c + radius] of a function peaked at c with the
// given width; the breakpoints keep the adaptive rule from missing the peak.
template <class F>
double integrate_peak(F&& f, double c, double width, double radius, std::vector<double> extra = {}) {
  std::vector<double> breaks{c - radius, c + radius};
  for (double k : {-8.0, -2.0, 0.0, 2.0, 8.0})
    if (std::fabs(k * width) < radius) breaks.push_back(c + k * width);
  for (double e : extra)
    if (e > c - radius && e < c + radius) breaks.push_back(e);
  std::sort(breaks.begin(), breaks.end());
  return quad::integrate_pieces(f, breaks, {1e-300, 1e-12, 800}).value;
}

// sup over a symmetric interval of a smooth one-dimensional function.
template <class F>
double symmetric_sup(F&& f, double radius, int grid) {
  double best = -INFINITY;
  int best_k = 0;
  for (int k = -grid; k <= grid; ++k) {
    const double val = f(radius * k / grid);
    if (val > best) {
      best = val;
      best_k = k;
    }
  }
  const double lo = radius * (best_k - 1) / grid, hi = radius * (best_k + 1) / grid;
  return refine_max(f, lo, hi, best);
}

}  // namespace detail

/// int int G dx dv by nested adaptive quadrature of one Cartesian factor, cubed.
inline double green_total_mass(const GreenEval& g) {
  const double t = g.time;
  const auto m = free_kinetic_moments(1.0, t);
  const double rv = 12.0 * std::sqrt(m.var_v);
  const double wx = std::sqrt(t * t * t / 6.0);  // x-width at fixed v
  const double one = detail::integrate_peak(
      [&](double v) { return detail::integrate_peak([&](double x) { return g.factor(x, v); }, 0.5 * t * v, wx, 12 * wx); },
      0.0, std::sqrt(m.var_v), rv);
  return one * one * one;
}

/// ||G_t||_{inf,1} = sup_x int |G| dv. The inner v-integral is adaptive per
/// x node; the x-grid is truncated at 10 sqrt(max variance).
inline double green_sup_l1_norm(const GreenEval& g) {
  const auto m = free_kinetic_moments(1.0, g.time);
  const double rv = 10.0 * std::sqrt(std::max(m.var_v, m.var_x));
  const double rx = 10.0 * std::sqrt(std::max(m.var_x, 1e-300));
  const double wv = std::sqrt(0.5 * g.time);  // v-width at fixed x
  auto inner = [&](double x) {
    return detail::integrate_peak([&](double v) { return g.factor(x, v); }, 1.5 * x / g.time, wv, rv);
  };
  const double s = detail::symmetric_sup(inner, rx, 200);
  return s * s * s;
}

/// ||G_t(. - h e1) - G_t(. + h e1)||_{inf,1}, shifts in x only.
inline double green_shift_difference_norm(const GreenEval& g, double h) {
  if (!(h > 0.0)) throw InvalidArgument("green_shift_difference_norm: need h > 0");
  const auto m = free_kinetic_moments(1.0, g.time);
  const double rv = 10.0 * std::sqrt(std::max(m.var_v, m.var_x));
  const double rx = 10.0 * std::sqrt(m.var_x) + h;
  const double wv = std::sqrt(0.5 * g.time);
  auto plain = [&](double x) {
    return detail::integrate_peak([&](double v) { return g.factor(x, v); }, 1.5 * x / g.time, wv, rv);
  };
  auto diff = [&](double x) {
    auto f = [&](double v) { return std::fabs(g.factor(x - h, v) - g.factor(x + h, v)); };
    // the two shifted profiles cross at v = 2x/t, where the difference changes sign
    return detail::integrate_peak(f, 1.5 * x / g.time, wv, rv, {2.0 * x / g.time});
  };
  const double s1 = detail::symmetric_sup(diff, rx, 200);
  const double s2 = detail::symmetric_sup(plain, rx, 200);
  return s1 * s2 * s2;
}

// --- Kolmogorov-Smirnov ------------------------------------------------------

inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Asymptotic one-sample critical value sqrt(-log(alpha/2)/2) / sqrt(n).
inline double ks_critical_value(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(static_cast<double>(n));
}

// --- concentration -------------------------------------------------------------

using ScalarGenerator = std::function<double(CounterStream&)>;

/// Fraction of trials with |mean of n draws| >= c_alpha sqrt(g(n)) log(n) / sqrt(n).
/// Ties at the threshold count as exceedances.
inline double concentration_check(const ScalarGenerator& generator, const std::function<double(double)>& g_of_n,
                                  std::size_t n, double c_alpha, std::size_t trials, std::uint64_t seed) {
  if (n == 0 || trials == 0) throw InvalidArgument("concentration_check: need n >= 1 and trials >= 1");
  const double nn = static_cast<double>(n);
  const double threshold = c_alpha * std::sqrt(g_of_n(nn)) * std::log(nn) / std::sqrt(nn);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    CounterStream rng(seed, k, Domain::oracle);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += generator(rng);
    if (std::fabs(sum / nn) >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

// --- Brownian maximum ------------------------------------------------------------

struct BrownianTail {
  double empirical = 0.0;  // continuous-time estimate (grid plus bridge crossings)
  double std_error = 0.0;
  double grid_only = 0.0;  // fraction of paths whose grid values reach b
  double analytic = 0.0;   // 2 (1 - Phi(b / sqrt(dt)))
};

/// P(max_{s <= dt} B(s) >= b) for scalar Brownian motion from 0.
///
/// Each path is sampled on `grid` steps. Between grid points the path is a
/// Brownian bridge, which crosses b with probability exp(-2 (b-a0)(b-a1)/h);
/// the estimator averages the conditional exceedance probability given the grid.
inline BrownianTail brownian_max_tail(double delta_t, double b, std::size_t trials, std::uint64_t seed,
                                      std::size_t grid = 1000) {
  if (!(delta_t > 0.0)) throw InvalidArgument("brownian_max_tail: delta_t must be > 0");
  if (!(b >= 0.0)) throw InvalidArgument("brownian_max_tail: b must be >= 0");
  if (trials < 2 || grid == 0) throw InvalidArgument("brownian_max_tail: need trials >= 2 and grid >= 1");
  const double h = delta_t / static_cast<double>(grid);
  const double sh = std::sqrt(h);
  double sum = 0.0, sum2 = 0.0;
  std::size_t grid_hits = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    CounterStream rng(seed, k, Domain::oracle);
    double a = 0.0;
    double survive = 1.0;  // P(no crossing | grid) so far
    bool hit = b <= 0.0;
    for (std::size_t j = 0; j < grid && !hit; ++j) {
      const double next = a + sh * rng.normal();
      if (next >= b) {
        hit = true;
      } else {
        survive *= 1.0 - std::exp(-2.0 * (b - a) * (b - next) / h);
      }
      a = next;
    }
    const double p = hit ? 1.0 : 1.0 - survive;
    if (hit) ++grid_hits;
    sum += p;
    sum2 += p * p;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), static_cast<double>(grid_hits) / n,
          2.0 * (1.0 - detail::std_normal_cdf(b / std::sqrt(delta_t)))};
}

/// C1 (sqrt(dt)/b) exp(-C2 b^2/dt); the reflection value satisfies it with
/// C1 = sqrt(2/pi), C2 = 1/2 (Mills ratio).
inline double brownian_tail_bound(double delta_t, double b, double c1 = std::sqrt(2.0 / std::numbers::pi),
                                  double c2 = 0.5) {
  return c1 * std::sqrt(delta_t) / b * std::exp(-c2 * b * b / delta_t);
}

// --- collision candidates -------------------------------------------------------------

/// N^-lambda2 + log(N) dt^{3/2}
inline double collision_radius(double lambda2, double dt_block, double n) {
  return std::pow(n, -lambda2) + std::log(n) * std::pow(dt_block, 1.5);
}

/// For each i, the number of j != i with |x_i - x_j + s (v_i - v_j)| <= radius,
/// s = t_offset.
inline std::vector<std::size_t> collision_candidate_count(const PhaseState& state, double lambda2, double dt_block,
                                                          double t_offset, std::size_t n) {
  if (state.size() != n) throw DimensionMismatch("collision_candidate_count: state size differs from n");
  if (!(t_offset >= 0.0) || t_offset > dt_block) throw InvalidArgument("collision_candidate_count: need 0 <= t_offset <= dt_block");
  const double r = collision_radius(lambda2, dt_block, static_cast<double>(n));
  const double r2 = r * r;
  std::vector<double> px(n), py(n), pz(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = state.positions[i] + state.velocities[i] * t_offset;
    px[i] = p.x;
    py[i] = p.y;
    pz[i] = p.z;
  }
  std::vector<std::size_t> count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = px[i] - px[j], dy = py[i] - py[j], dz = pz[i] - pz[j];
      c += (dx * dx + dy * dy + dz * dz <= r2) ? 1 : 0;
    }
    count[i] = c - 1;  // drop j = i
  }
  return count;
}

/// ||rho||_3 for a radial density, by quadrature of 4 pi r^2 rho^3.
inline double density_l3_norm(const DensityModel& density) {
  const double top = density.outer_radius();
  std::vector<double> breaks{0.0, top};
  if (std::isfinite(density.support_radius())) breaks = {0.0, std::min(top, density.support_radius())};
  const auto res = quad::integrate_pieces(
      [&](double r) {
        const double p = density.radial_density(r);
        return 4.0 * std::numbers::pi * r * r * p * p * p;
      },
      breaks, {1e-14, 1e-12, 500});
  if (!res.converged) throw QuadratureError("density_l3_norm", res.error);
  return std::cbrt(res.value);
}

/// C* = ||rho||_3 (4 pi / 3)^{2/3}. Free streaming with independent velocities
/// convolves rho with a probability density, which cannot raise the L^3 norm,
/// so the t = 0 value bounds the whole block.
inline double collision_constant(const DensityModel& density) {
  return density_l3_norm(density) * std::pow(4.0 * std::numbers::pi / 3.0, 2.0 / 3.0);
}

/// 2 C* N (3 N^-lambda2 + log(N) dt^{3/2})^2
inline double collision_bound(double c_star, double lambda2, double dt_block, double n) {
  const double r = 3.0 * std::pow(n, -lambda2) + std::log(n) * std::pow(dt_block, 1.5);
  return 2.0 * c_star * n * r * r;
}

}  // namespace vpfp
