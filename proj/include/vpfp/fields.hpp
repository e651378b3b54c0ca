#pragma once

// Mean-field convolutions k^N * rho and l^N * rho for radial reference
// densities, and i.i.d. sampling from those densities.
//
// For radial rho everything reduces to one-dimensional integrals:
//  * k^N * rho = k * (psi_delta^N * rho); the smoothed density is radial, so
//    the shell theorem gives a x/|x|^3 times its enclosed mass
//        Qs(r) = int_{B(0,1)} psi(w) M(|w| N^-delta, r) dw,
//    where M(s, r) is the rho-mass of a ball of radius r centred at distance s.
//  * l^N * rho(x) = int_0^inf 4 pi u^2 l^N(u) S(u, |x|) du with S(u, s) the
//    mean of rho over a sphere of radius u centred at distance s.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vpfp/errors.hpp"
#include "vpfp/kernels.hpp"
#include "vpfp/phase_state.hpp"
#include "vpfp/quadrature.hpp"
#include "vpfp/random.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp {

namespace detail {

/// sinh(z)/z without cancellation near 0.
inline double sinhc(double z) {
  if (std::fabs(z) < 1e-4) return 1.0 + z * z / 6.0;
  return std::sinh(z) / z;
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Fraction of a sphere of radius u, centred at distance s from the origin,
/// lying inside the origin-centred ball of radius r.
inline double cap_fraction(double u, double s, double r) {
  if (u + s <= r) return 1.0;
  if (std::fabs(u - s) >= r) return 0.0;
  return (r * r - (u - s) * (u - s)) / (4.0 * u * s);
}

}  // namespace detail

// --- densities ----------------------------------------------------------------

struct IsotropicGaussian {
  double std = 1.0;

  double density(double r) const {
    const double z = r / std;
    return std::exp(-0.5 * z * z) / (std::pow(2.0 * std::numbers::pi, 1.5) * std * std * std);
  }
  double enclosed(double r) const {
    const double u = r / std;
    return std::erf(u / std::numbers::sqrt2) - std::sqrt(2.0 / std::numbers::pi) * u * std::exp(-0.5 * u * u);
  }
  double ball_mass(double s, double r) const {
    if (r <= 0.0) return 0.0;
    const double u = r / std;
    const double w = s / std;
    if (w == 0.0) return enclosed(r);
    const double slab = detail::std_normal_cdf(u + w) - detail::std_normal_cdf(w - u);
    double rim;
    if (u * w < 1.0) {
      rim = 2.0 * std::exp(-0.5 * (u * u + w * w)) / std::sqrt(2.0 * std::numbers::pi) * u * detail::sinhc(u * w);
    } else {
      rim = (std::exp(-0.5 * (u - w) * (u - w)) - std::exp(-0.5 * (u + w) * (u + w))) /
            (w * std::sqrt(2.0 * std::numbers::pi));
    }
    return std::clamp(slab - rim, 0.0, 1.0);
  }
  double sphere_mean(double radius, double s) const {
    const double u = radius / std;
    const double w = s / std;
    const double c = 1.0 / (std::pow(2.0 * std::numbers::pi, 1.5) * std * std * std);
    if (u * w < 1.0) return c * std::exp(-0.5 * (u * u + w * w)) * detail::sinhc(u * w);
    return c * (std::exp(-0.5 * (u - w) * (u - w)) - std::exp(-0.5 * (u + w) * (u + w))) / (2.0 * u * w);
  }
  double outer_radius() const { return 12.0 * std; }  // mass beyond < 1e-29
  double support_radius() const { return INFINITY; }
  double second_moment_per_axis() const { return std * std; }
  Vec3 sample(CounterStream& rng) const { return rng.normal3() * std; }
};

struct UniformBall {
  double radius = 1.0;

  double density(double r) const {
    return r < radius ? 3.0 / (4.0 * std::numbers::pi * radius * radius * radius) : 0.0;
  }
  double enclosed(double r) const {
    if (r >= radius) return 1.0;
    const double q = r / radius;
    return q * q * q;
  }
  double ball_mass(double s, double r) const {
    const double big = radius;
    if (r <= 0.0) return 0.0;
    if (s + r <= big) return (r * r * r) / (big * big * big);
    if (s + big <= r) return 1.0;
    if (s >= r + big) return 0.0;
    // lens volume of two intersecting balls
    const double lens = std::numbers::pi * (big + r - s) * (big + r - s) *
                        (s * s + 2.0 * s * r - 3.0 * r * r + 2.0 * s * big + 6.0 * r * big - 3.0 * big * big) /
                        (12.0 * s);
    return std::clamp(lens / (4.0 / 3.0 * std::numbers::pi * big * big * big), 0.0, 1.0);
  }
  double sphere_mean(double u, double s) const {
    if (u == 0.0) return density(s);
    if (s == 0.0) return density(u);
    return density(0.0) * detail::cap_fraction(u, s, radius);
  }
  double outer_radius() const { return radius; }
  double support_radius() const { return radius; }
  double second_moment_per_axis() const { return radius * radius / 5.0; }
  Vec3 sample(CounterStream& rng) const { return rng.direction() * (radius * std::cbrt(rng.uniform())); }
};

/// Any normalizable radial profile with compact support. The profile need not
/// be normalized; mass, CDF and sampling tables are built at construction.
class RadialCustom {
 public:
  RadialCustom(std::function<double(double)> profile, double support, int table_size = 4096)
      : profile_(std::move(profile)), support_(support) {
    if (!(support_ > 0.0)) throw InvalidArgument("RadialCustom: support radius must be positive");
    const double raw = quad::integrate([&](double r) { return 4.0 * std::numbers::pi * r * r * profile_(r); }, 0.0,
                                       support_, {1e-13, 1e-13, 4000})
                           .value;
    if (!(raw > 0.0)) throw InvalidArgument("RadialCustom: profile has no mass");
    scale_ = 1.0 / raw;
    radii_.resize(static_cast<std::size_t>(table_size) + 1);
    cdf_.resize(radii_.size());
    for (std::size_t k = 0; k < radii_.size(); ++k) {
      radii_[k] = support_ * static_cast<double>(k) / table_size;
      cdf_[k] = k == 0 ? 0.0 : cdf_[k - 1] + shell_mass(radii_[k - 1], radii_[k]);
    }
    for (double& c : cdf_) c /= cdf_.back();
  }

  double density(double r) const { return r < support_ ? scale_ * profile_(r) : 0.0; }
  double enclosed(double r) const {
    if (r >= support_) return 1.0;
    return std::min(1.0, shell_mass(0.0, r));
  }
  double ball_mass(double s, double r) const {
    if (s == 0.0) return enclosed(r);
    auto f = [&](double u) {
      return 4.0 * std::numbers::pi * u * u * density(u) * detail::cap_fraction(u, s, r);
    };
    const double lo = std::max(0.0, s - r);
    const double hi = std::min(support_, s + r);
    if (hi <= lo) return 0.0;
    const double breaks[] = {0.0, lo, std::clamp(r - s, lo, hi), hi};
    return quad::integrate_pieces(f, breaks, {1e-13, 1e-12, 2000}).value;
  }
  double sphere_mean(double u, double s) const {
    if (u == 0.0) return density(s);
    if (s == 0.0) return density(u);
    const double lo = std::fabs(u - s);
    const double hi = std::min(support_, u + s);
    if (hi <= lo) return 0.0;
    const auto r = quad::integrate([&](double t) { return density(t) * t; }, lo, hi, {1e-14, 1e-12, 2000});
    return r.value / (2.0 * u * s);
  }
  double outer_radius() const { return support_; }
  double support_radius() const { return support_; }
  double second_moment_per_axis() const {
    return quad::integrate([&](double r) { return 4.0 * std::numbers::pi * r * r * r * r * density(r); }, 0.0,
                           support_, {1e-13, 1e-13, 2000})
               .value /
           3.0;
  }
  Vec3 sample(CounterStream& rng) const {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cdf_.begin()));
    const double t = (u - cdf_[k - 1]) / std::max(1e-300, cdf_[k] - cdf_[k - 1]);
    const double r = radii_[k - 1] + t * (radii_[k] - radii_[k - 1]);
    return rng.direction() * r;
  }

 private:
  double shell_mass(double a, double b) const {
    return quad::integrate([&](double r) { return 4.0 * std::numbers::pi * r * r * density(r); }, a, b,
                           {1e-15, 1e-13, 400})
        .value;
  }

  std::function<double(double)> profile_;
  double support_;
  double scale_ = 1.0;
  std::vector<double> radii_;
  std::vector<double> cdf_;
};

/// Reference density rho for positions: a closed family of radial kinds.
class DensityModel {
 public:
  using Kind = std::variant<IsotropicGaussian, UniformBall, RadialCustom>;

  DensityModel(Kind kind) : kind_(std::move(kind)) {}  // NOLINT(google-explicit-constructor)

  static DensityModel gaussian(double std) {
    if (!(std > 0.0)) throw InvalidArgument("gaussian density: std must be positive");
    return DensityModel(IsotropicGaussian{std});
  }
  static DensityModel uniform_ball(double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("uniform-ball density: radius must be positive");
    return DensityModel(UniformBall{radius});
  }

  std::string name() const {
    return std::visit(
        [](const auto& d) -> std::string {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, IsotropicGaussian>) return "isotropic-gaussian";
          else if constexpr (std::is_same_v<T, UniformBall>) return "uniform-ball";
          else return "radial-custom";
        },
        kind_);
  }

  double evaluate(const Vec3& x) const { return radial_density(norm(x)); }
  double radial_density(double r) const {
    return std::visit([&](const auto& d) { return d.density(r); }, kind_);
  }
  double enclosed_charge(double r) const {
    return std::visit([&](const auto& d) { return d.enclosed(r); }, kind_);
  }
  double ball_mass(double s, double r) const {
    return std::visit([&](const auto& d) { return d.ball_mass(s, r); }, kind_);
  }
  double sphere_mean(double u, double s) const {
    return std::visit([&](const auto& d) { return d.sphere_mean(u, s); }, kind_);
  }
  double outer_radius() const {
    return std::visit([](const auto& d) { return d.outer_radius(); }, kind_);
  }
  double support_radius() const {
    return std::visit([](const auto& d) { return d.support_radius(); }, kind_);
  }
  double second_moment_per_axis() const {
    return std::visit([](const auto& d) { return d.second_moment_per_axis(); }, kind_);
  }
  Vec3 sample(CounterStream& rng) const {
    return std::visit([&](const auto& d) { return d.sample(rng); }, kind_);
  }
  std::vector<Vec3> sample(CounterStream& rng, std::size_t count) const {
    std::vector<Vec3> out(count);
    for (auto& p : out) p = sample(rng);
    return out;
  }

  const Kind& kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Initial velocity law; compactly supported in |v| <= cutoff.
class VelocityModel {
 public:
  enum class Kind { truncated_gaussian, uniform_ball };

  static VelocityModel truncated_gaussian(double std, double cutoff = NAN) {
    if (!(std > 0.0)) throw InvalidArgument("truncated-gaussian velocity: std must be positive");
    if (std::isnan(cutoff)) cutoff = 4.0 * std;
    if (!(cutoff > 0.0)) throw InvalidArgument("truncated-gaussian velocity: cutoff must be positive");
    return VelocityModel(Kind::truncated_gaussian, std, cutoff);
  }
  static VelocityModel uniform_ball(double cutoff) {
    if (!(cutoff > 0.0)) throw InvalidArgument("uniform-ball velocity: cutoff must be positive");
    return VelocityModel(Kind::uniform_ball, 0.0, cutoff);
  }

  Kind kind() const { return kind_; }
  double std() const { return std_; }
  double cutoff() const { return cutoff_; }
  std::string name() const { return kind_ == Kind::truncated_gaussian ? "truncated-gaussian" : "uniform-ball"; }

  double evaluate(const Vec3& v) const {
    const double r = norm(v);
    if (r > cutoff_) return 0.0;
    if (kind_ == Kind::uniform_ball) return 3.0 / (4.0 * std::numbers::pi * cutoff_ * cutoff_ * cutoff_);
    const IsotropicGaussian g{std_};
    return g.density(r) / g.enclosed(cutoff_);
  }

  Vec3 sample(CounterStream& rng) const {
    if (kind_ == Kind::uniform_ball) return rng.direction() * (cutoff_ * std::cbrt(rng.uniform()));
    for (;;) {
      const Vec3 v = rng.normal3() * std_;
      if (norm(v) <= cutoff_) return v;
    }
  }

 private:
  VelocityModel(Kind k, double std, double cutoff) : kind_(k), std_(std), cutoff_(cutoff) {}
  Kind kind_;
  double std_;
  double cutoff_;
};

/// N i.i.d. draws (x, v) with x ~ density and v ~ velocity.
inline PhaseState sample_initial_phase(const DensityModel& density, const VelocityModel& velocity, std::size_t n,
                                       CounterStream& rng) {
  if (n == 0) throw InvalidArgument("sample_initial_phase: empty ensemble");
  PhaseState s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.positions[i] = density.sample(rng);
    s.velocities[i] = velocity.sample(rng);
  }
  return s;
}

// --- convolutions -------------------------------------------------------------------

struct FieldValue {
  Vec3 value;
  double error = 0.0;  // achieved absolute error bound on |value|
};

struct ScalarValue {
  double value = 0.0;
  double error = 0.0;
};

/// Enclosed charge of psi_delta^N * rho within radius r.
template <BlobProfile Profile>
ScalarValue smoothed_enclosed_charge(const KernelConfig& cfg, const Profile& profile, const DensityModel& density,
                                     double r) {
  if constexpr (std::is_same_v<Profile, PointChargeProfile>) {
    return {density.enclosed_charge(r), 0.0};
  } else {
    const double eps = cfg.cutoff_length();
    if (r >= density.support_radius() + eps) return {1.0, 0.0};
    auto integrand = [&](double w) {
      return 4.0 * std::numbers::pi * w * w * profile.density(w) * density.ball_mass(w * eps, r);
    };
    quad::Tolerance tol{1e-8 * std::min(1.0, r * r), 1e-12, 500};
    const auto res = quad::integrate(integrand, 0.0, 1.0, tol);
    if (!res.converged) throw QuadratureError("smoothed_enclosed_charge", res.error);
    return {res.value, res.error};
  }
}

/// (k^N * rho)(x) for radial rho.
template <BlobProfile Profile>
FieldValue meanfield_force_exact(const KernelConfig& cfg, const Profile& profile, const DensityModel& density,
                                 const Vec3& x) {
  const double r2 = norm2(x);
  if (r2 == 0.0 || cfg.strength == 0.0) return {};
  const double r = std::sqrt(r2);
  const auto q = smoothed_enclosed_charge(cfg, profile, density, r);
  const double scale = cfg.strength / (r2 * r);
  return {x * (scale * q.value), std::fabs(cfg.strength) * q.error / r2};
}

/// Golden-section refinement of a scalar maximum bracketed by [lo, hi].
template <class F>
double refine_max(F&& f, double lo, double hi, double best, int iterations = 60) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int k = 0; k < iterations; ++k) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::max(best, std::max(fc, fd));
}

/// Grid scan plus local refinement of sup over radii of a radial quantity.
template <class F>
double radial_sup(F&& f, double r_max, int grid = 400) {
  double best = -INFINITY;
  int best_k = 0;
  std::vector<double> vals(static_cast<std::size_t>(grid) + 1);
  for (int k = 0; k <= grid; ++k) {
    const double r = r_max * k / grid;
    vals[static_cast<std::size_t>(k)] = f(r);
    if (vals[static_cast<std::size_t>(k)] > best) {
      best = vals[static_cast<std::size_t>(k)];
      best_k = k;
    }
  }
  const double lo = r_max * std::max(0, best_k - 1) / grid;
  const double hi = r_max * std::min(grid, best_k + 1) / grid;
  return refine_max(f, lo, hi, best);
}

inline double density_scale(const DensityModel& density) {
  return std::sqrt(density.second_moment_per_axis());
}

/// sup_x |k^N * rho| over a radial grid.
template <BlobProfile Profile>
double meanfield_force_sup_norm(const KernelConfig& cfg, const Profile& profile, const DensityModel& density) {
  if (cfg.strength == 0.0) return 0.0;
  const double r_max = 6.0 * density_scale(density);
  return radial_sup(
      [&](double r) { return r == 0.0 ? 0.0 : norm(meanfield_force_exact(cfg, profile, density, {r, 0, 0}).value); },
      r_max);
}

/// ((l^N)^power * rho)(x), integrated over the zones [0, 6 N^-delta], [6 N^-delta, 1], [1, inf).
inline ScalarValue ell_power_convolution(const KernelConfig& cfg, const DensityModel& density, const Vec3& x,
                                         int power = 1) {
  const CutoffMajorant ell_n(cfg);
  const double s = norm(x);
  auto integrand = [&](double u) {
    const double l = ell_n.at_radius(u);
    const double lp = power == 1 ? l : std::pow(l, power);
    return 4.0 * std::numbers::pi * u * u * lp * density.sphere_mean(u, s);
  };
  const double top = s + density.outer_radius();
  std::vector<double> breaks{0.0, ell_n.breakpoint(), 1.0, top};
  // the density itself may have kinks (compact support) at |u - s| = R
  if (std::isfinite(density.support_radius())) {
    breaks.push_back(std::fabs(s - density.support_radius()));
    breaks.push_back(s + density.support_radius());
  }
  for (double& b : breaks) b = std::min(b, top);
  std::sort(breaks.begin(), breaks.end());
  const auto res = quad::integrate_pieces(integrand, breaks, {1e-8, 1e-10, 2000});
  if (!res.converged) throw QuadratureError("ell_convolution", res.error);
  return {res.value, res.error};
}

inline ScalarValue ell_convolution(const KernelConfig& cfg, const DensityModel& density, const Vec3& x) {
  return ell_power_convolution(cfg, density, x, 1);
}

inline double ell_power_convolution_sup(const KernelConfig& cfg, const DensityModel& density, int power = 1) {
  const double r_max = 4.0 * density_scale(density);
  return radial_sup([&](double r) { return ell_power_convolution(cfg, density, {r, 0, 0}, power).value; }, r_max,
                    120);
}

inline double ell_convolution_sup(const KernelConfig& cfg, const DensityModel& density) {
  return ell_power_convolution_sup(cfg, density, 1);
}

}  // namespace vpfp
