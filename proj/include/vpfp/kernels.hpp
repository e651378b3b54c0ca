#pragma once

// Coulomb interaction, its blob-mollified version k^N, the cut-off majorant
// l^N and the short/long range splitting k^N = k1 + k2.
//
// For a radial mollifier psi the convolution k * psi_delta^N is the field of
// the enclosed mollifier mass (shell theorem):
//     k^N(x) = a x / |x|^3 * m(|x| N^delta),
// with m(s) the mass of psi in the ball of radius s. Inside the cut-off we
// write m(s) = s^3 R(s) so the expression has no singularity at x = 0:
//     k^N(x) = a x N^{3 delta} R(|x| N^delta),  |x| < N^-delta.

#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vpfp/errors.hpp"
#include "vpfp/quadrature.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp {

struct KernelConfig {
  double strength = 1.0;             // a; > 0 repulsive, < 0 attractive
  long long n_particles = 1024;      // N
  double cutoff_exponent = 1.0 / 3;  // delta
  double wide_cutoff_exponent = 0.3; // lambda2

  /// Human-readable invariant violations. In permissive mode the theorem
  /// windows for delta and lambda2 are not reported.
  std::vector<std::string> violations(bool permissive = false) const {
    std::vector<std::string> out;
    if (n_particles < 2) out.push_back("n_particles must be >= 2");
    if (!std::isfinite(strength)) out.push_back("strength must be finite");
    if (!permissive) {
      if (!(cutoff_exponent >= 1.0 / 3 && cutoff_exponent < 1.0))
        out.push_back("cutoff_exponent must lie in [1/3, 1)");
      if (!(wide_cutoff_exponent > 0.0 && wide_cutoff_exponent < 1.0 / 3))
        out.push_back("wide_cutoff_exponent must lie in (0, 1/3)");
      if (!(wide_cutoff_exponent < cutoff_exponent))
        out.push_back("wide_cutoff_exponent must be smaller than cutoff_exponent");
    } else {
      if (!(cutoff_exponent > 0.0)) out.push_back("cutoff_exponent must be positive");
      if (!(wide_cutoff_exponent > 0.0)) out.push_back("wide_cutoff_exponent must be positive");
    }
    return out;
  }

  void validate(bool permissive = false) const {
    const auto v = violations(permissive);
    if (!v.empty()) throw InvalidArgument("KernelConfig: " + v.front());
  }

  double n() const { return static_cast<double>(n_particles); }
  /// N^-delta
  double cutoff_length() const { return std::pow(n(), -cutoff_exponent); }
  /// N^-lambda2
  double wide_cutoff_length() const { return std::pow(n(), -wide_cutoff_exponent); }
};

// --- mollifier profiles ----------------------------------------------------

/// A radial C^2 blob with support in the unit ball and unit mass.
///   density(r)          psi at radius r
///   enclosed_mass(s)    m(s), mass within radius s
///   mass_ratio(s)       R(s) = m(s)/s^3 on [0, 1]
///   mass_ratio_slope(s) R'(s)/s on [0, 1]
template <class P>
concept BlobProfile = requires(const P& p, double r) {
  { p.density(r) } -> std::convertible_to<double>;
  { p.enclosed_mass(r) } -> std::convertible_to<double>;
  { p.mass_ratio(r) } -> std::convertible_to<double>;
  { p.mass_ratio_slope(r) } -> std::convertible_to<double>;
};

/// Profiles whose R depends on s^2 only; lets hot loops skip a square root.
template <class P>
concept EvenBlobProfile = BlobProfile<P> && requires(const P& p, double s2) {
  { p.mass_ratio_sq(s2) } -> std::convertible_to<double>;
  { p.mass_ratio_slope_sq(s2) } -> std::convertible_to<double>;
};

/// psi(r) = c (1 - r^2)^3 on the unit ball.
struct BumpProfile {
  /// c = 315 / (64 pi), fixes unit mass.
  static constexpr double kPeak = 1.5666814710608447;

  static constexpr const char* name() { return "bump"; }

  double density(double r) const {
    if (r >= 1.0) return 0.0;
    const double w = 1.0 - r * r;
    return kPeak * w * w * w;
  }
  double enclosed_mass(double s) const {
    if (s >= 1.0) return 1.0;
    return s * s * s * mass_ratio_sq(s * s);
  }
  double mass_ratio(double s) const { return mass_ratio_sq(s * s); }
  double mass_ratio_slope(double s) const { return mass_ratio_slope_sq(s * s); }

  // R(s) = (105 - 189 u + 135 u^2 - 35 u^3) / 16,  u = s^2.
  // Generic so the force loops can evaluate it on SIMD registers.
  template <class T>
  static constexpr T mass_ratio_sq(T u) {
    return (105.0 + u * (-189.0 + u * (135.0 - 35.0 * u))) * (1.0 / 16.0);
  }
  // R'(s)/s = (-189 + 270 u - 105 u^2) / 8
  static constexpr double mass_ratio_slope_sq(double u) {
    return (-189.0 + u * (270.0 - 105.0 * u)) * (1.0 / 8.0);
  }
};

/// Wendland C^2 profile psi(r) = c (1 - r)^4 (1 + 4 r), c = 21 / (2 pi).
struct WendlandProfile {
  static constexpr double kPeak = 3.3422538049298023;

  static constexpr const char* name() { return "wendland"; }

  double density(double r) const {
    if (r >= 1.0) return 0.0;
    const double w = 1.0 - r;
    return kPeak * w * w * w * w * (1.0 + 4.0 * r);
  }
  double enclosed_mass(double s) const {
    if (s >= 1.0) return 1.0;
    return s * s * s * mass_ratio(s);
  }
  // R(s) = 14 - 84 s^2 + 140 s^3 - 90 s^4 + 21 s^5
  double mass_ratio(double s) const {
    return 14.0 + s * s * (-84.0 + s * (140.0 + s * (-90.0 + 21.0 * s)));
  }
  // R'(s)/s = -168 + 420 s - 360 s^2 + 105 s^3
  double mass_ratio_slope(double s) const { return -168.0 + s * (420.0 + s * (-360.0 + 105.0 * s)); }
};

/// Degenerate "profile" of a point charge: k^N collapses to the bare Coulomb
/// field. Only meaningful for checks that expect divergence.
struct PointChargeProfile {
  static constexpr const char* name() { return "point"; }
  double density(double) const { return 0.0; }
  double enclosed_mass(double s) const { return s > 0.0 ? 1.0 : 0.0; }
  double mass_ratio(double s) const { return s > 0.0 ? 1.0 / (s * s * s) : INFINITY; }
  double mass_ratio_slope(double s) const { return s > 0.0 ? -3.0 / (s * s * s * s * s) : -INFINITY; }
};

// --- evaluator ---------------------------------------------------------------

/// Precomputed scales for k^N at one (a, N, exponent). k^N(x) = factor(|x|^2) x.
template <BlobProfile Profile>
class MollifiedCoulomb {
 public:
  MollifiedCoulomb(double strength, double n, double exponent, Profile profile = {})
      : profile_(profile),
        strength_(strength),
        inv_cut_(std::pow(n, exponent)),
        inv_cut2_(inv_cut_ * inv_cut_),
        inv_cut3_(inv_cut2_ * inv_cut_) {}

  /// Scalar f with k^N(x) = f x, as a function of r2 = |x|^2.
  double factor(double r2) const {
    const double s2 = r2 * inv_cut2_;
    if (s2 < 1.0) {
      if constexpr (EvenBlobProfile<Profile>) {
        return strength_ * inv_cut3_ * profile_.mass_ratio_sq(s2);
      } else {
        return strength_ * inv_cut3_ * profile_.mass_ratio(std::sqrt(s2));
      }
    }
    return strength_ / (r2 * std::sqrt(r2));
  }

  Vec3 operator()(const Vec3& x) const { return x * factor(norm2(x)); }

  /// Jacobian d k^N_i / d x_j = f delta_ij + x_i x_j f'(r)/r.
  Mat3 jacobian(const Vec3& x) const {
    const double r2 = norm2(x);
    const double s2 = r2 * inv_cut2_;
    double f = 0.0;
    double slope = 0.0;  // f'(r)/r
    if (s2 < 1.0) {
      double ratio = 0.0;
      double ratio_slope = 0.0;
      if constexpr (EvenBlobProfile<Profile>) {
        ratio = profile_.mass_ratio_sq(s2);
        ratio_slope = profile_.mass_ratio_slope_sq(s2);
      } else {
        const double s = std::sqrt(s2);
        ratio = profile_.mass_ratio(s);
        ratio_slope = profile_.mass_ratio_slope(s);
      }
      f = strength_ * inv_cut3_ * ratio;
      slope = strength_ * inv_cut3_ * inv_cut2_ * ratio_slope;
    } else {
      const double r = std::sqrt(r2);
      f = strength_ / (r2 * r);
      slope = -3.0 * strength_ / (r2 * r2 * r);
    }
    Mat3 j;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) j(a, b) = (a == b ? f : 0.0) + x[a] * x[b] * slope;
    return j;
  }

  /// Enclosed mollifier mass at radius r, m(r N^exponent).
  double enclosed(double r) const { return profile_.enclosed_mass(r * inv_cut_); }

  double strength() const { return strength_; }
  double inverse_cutoff() const { return inv_cut_; }
  double scaled_peak() const { return inv_cut3_; }
  const Profile& profile() const { return profile_; }

 private:
  Profile profile_;
  double strength_;
  double inv_cut_;
  double inv_cut2_;
  double inv_cut3_;
};

template <BlobProfile Profile>
MollifiedCoulomb<Profile> make_kernel(const KernelConfig& cfg, const Profile& profile = {}) {
  return {cfg.strength, cfg.n(), cfg.cutoff_exponent, profile};
}

template <BlobProfile Profile>
MollifiedCoulomb<Profile> make_wide_kernel(const KernelConfig& cfg, const Profile& profile = {}) {
  return {cfg.strength, cfg.n(), cfg.wide_cutoff_exponent, profile};
}

/// The cut-off majorant l^N(x) = 6^3/|x|^3 for |x| >= 6 N^-delta, N^{3 delta} otherwise.
class CutoffMajorant {
 public:
  CutoffMajorant(double n, double delta)
      : peak_(std::pow(n, 3.0 * delta)), breakpoint_(6.0 * std::pow(n, -delta)), breakpoint2_(breakpoint_ * breakpoint_) {}
  explicit CutoffMajorant(const KernelConfig& cfg) : CutoffMajorant(cfg.n(), cfg.cutoff_exponent) {}

  double at_r2(double r2) const { return r2 >= breakpoint2_ ? 216.0 / (r2 * std::sqrt(r2)) : peak_; }
  double at_radius(double r) const { return r >= breakpoint_ ? 216.0 / (r * r * r) : peak_; }
  double operator()(const Vec3& x) const { return at_r2(norm2(x)); }

  double peak() const { return peak_; }
  double breakpoint() const { return breakpoint_; }

 private:
  double peak_;
  double breakpoint_;
  double breakpoint2_;
};

// --- free functions ------------------------------------------------------------

template <BlobProfile Profile>
double blob_density(const Profile& profile, const Vec3& x) {
  return profile.density(norm(x));
}

/// N^{3e} psi(N^e x); unit mass for every N.
template <BlobProfile Profile>
double scaled_blob(const Profile& profile, double exponent, long long n, const Vec3& x) {
  if (!(exponent > 0.0) || n < 2) throw InvalidArgument("scaled_blob: need exponent > 0 and n >= 2");
  const double scale = std::pow(static_cast<double>(n), exponent);
  return scale * scale * scale * profile.density(norm(x) * scale);
}

inline Vec3 coulomb(const KernelConfig& cfg, const Vec3& x) {
  const double r2 = norm2(x);
  if (r2 == 0.0) throw SingularOrigin();
  return x * (cfg.strength / (r2 * std::sqrt(r2)));
}

template <BlobProfile Profile>
Vec3 regularized_kernel(const KernelConfig& cfg, const Profile& profile, const Vec3& x) {
  return make_kernel(cfg, profile)(x);
}

template <BlobProfile Profile>
Mat3 kernel_gradient(const KernelConfig& cfg, const Profile& profile, const Vec3& x) {
  return make_kernel(cfg, profile).jacobian(x);
}

inline double ell(const KernelConfig& cfg, const Vec3& x) { return CutoffMajorant(cfg)(x); }

struct SplitKernel {
  Vec3 singular;  // k1^N, supported in |x| < N^-lambda2
  Vec3 regular;   // k2^N
};

template <BlobProfile Profile>
SplitKernel split_kernel(const KernelConfig& cfg, const Profile& profile, const Vec3& x) {
  const Vec3 full = make_kernel(cfg, profile)(x);
  const Vec3 wide = make_wide_kernel(cfg, profile)(x);
  return {full - wide, wide};
}

struct NormResult {
  double value = 0.0;
  double error = 0.0;
};

/// ||k^N||_2 by radial quadrature of a^2 m(r N^delta)^2 / r^2 (times 4 pi).
/// Throws QuadratureError when the integral does not converge, e.g. for the
/// unmollified Coulomb field.
template <BlobProfile Profile>
NormResult kernel_l2_norm(const KernelConfig& cfg, const Profile& profile) {
  const auto kernel = make_kernel(cfg, profile);
  const double cut = cfg.cutoff_length();
  auto inner = [&](double r) {
    const double m = kernel.enclosed(r);
    return m * m / (r * r);
  };
  // r = cut / t maps [cut, inf) onto (0, 1].
  auto outer = [&](double t) {
    const double m = kernel.enclosed(cut / t);
    return m * m / cut;
  };
  quad::Tolerance tol{1e-10, 1e-13, 200};
  const auto a = quad::integrate(inner, 0.0, cut, tol);
  const auto b = quad::integrate(outer, 0.0, 1.0, tol);
  if (!a.converged || !b.converged)
    throw QuadratureError("kernel_l2_norm: radial integral does not converge", a.error + b.error);
  const double sq = 4.0 * std::numbers::pi * cfg.strength * cfg.strength * (a.value + b.value);
  const double err = 4.0 * std::numbers::pi * cfg.strength * cfg.strength * (a.error + b.error);
  return {std::sqrt(sq), err / (2.0 * std::sqrt(sq))};
}

/// ||k1^N||_1 = 4 pi |a| int_0^{N^-lambda2} |m(r N^delta) - m(r N^lambda2)| dr.
template <BlobProfile Profile>
NormResult singular_part_l1_norm(const KernelConfig& cfg, const Profile& profile) {
  const auto full = make_kernel(cfg, profile);
  const auto wide = make_wide_kernel(cfg, profile);
  const double wide_cut = cfg.wide_cutoff_length();
  const double cut = std::min(cfg.cutoff_length(), wide_cut);
  auto f = [&](double r) { return std::fabs(full.enclosed(r) - wide.enclosed(r)); };
  const double breaks[] = {0.0, cut, std::max(cut, wide_cut)};
  const auto res = quad::integrate_pieces(f, breaks, {1e-14, 1e-12, 2000});
  if (!res.converged) throw QuadratureError("singular_part_l1_norm", res.error);
  const double scale = 4.0 * std::numbers::pi * std::fabs(cfg.strength);
  return {scale * res.value, scale * res.error};
}

/// sup |grad k^N| (Frobenius) over a dense radial grid on [0, 2 N^-delta].
/// Only |x| matters, so the grid runs along one axis.
template <BlobProfile Profile>
double kernel_gradient_sup(const KernelConfig& cfg, const Profile& profile, int grid = 4001) {
  const auto kernel = make_kernel(cfg, profile);
  const double top = 2.0 * cfg.cutoff_length();
  double best = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double r = top * k / (grid - 1);
    best = std::max(best, kernel.jacobian({r, 0.0, 0.0}).frobenius());
  }
  return best;
}

}  // namespace vpfp
