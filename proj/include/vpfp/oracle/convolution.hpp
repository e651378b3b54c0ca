#pragma once

// Independent check of the shell-theorem closed form: direct quadrature of
// (k * psi_eps)(x) = a * int_{S^2} zhat int_0^inf psi_eps(x - r zhat) dr dOmega.
// The r^2 Jacobian cancels the 1/r^2 of the kernel, leaving a smooth
// integrand on a (cos theta, phi, r) tensor grid. Not used by any production
// code path.

#include <cmath>
#include <numbers>

#include "vpfp/kernels.hpp"
#include "vpfp/quadrature.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp::oracle {

struct ConvolutionGrid {
  int polar = 96;     // Gauss-Legendre nodes in cos(theta)
  int azimuth = 96;   // trapezoid nodes in phi
  int radial = 24;    // Gauss-Legendre nodes along each ray
};

template <BlobProfile Profile>
Vec3 convolved_coulomb(const KernelConfig& cfg, const Profile& profile, const Vec3& x, ConvolutionGrid grid = {}) {
  const double eps = cfg.cutoff_length();
  const double inv_eps3 = 1.0 / (eps * eps * eps);
  const quad::GaussLegendre polar(grid.polar);
  const quad::GaussLegendre radial(grid.radial);

  // Orthonormal frame with the polar axis along x (or z when x = 0).
  const double rx = norm(x);
  const Vec3 e3 = rx > 0 ? x / rx : Vec3{0, 0, 1};
  const Vec3 helper = std::fabs(e3.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  Vec3 e1 = helper - e3 * dot(helper, e3);
  e1 = e1 / norm(e1);
  const Vec3 e2{e3.y * e1.z - e3.z * e1.y, e3.z * e1.x - e3.x * e1.z, e3.x * e1.y - e3.y * e1.x};

  Vec3 total;
  const double dphi = 2.0 * std::numbers::pi / grid.azimuth;
  for (std::size_t ip = 0; ip < polar.nodes.size(); ++ip) {
    const double mu = polar.nodes[ip];
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    for (int ia = 0; ia < grid.azimuth; ++ia) {
      const double phi = (ia + 0.5) * dphi;
      const Vec3 dir = e3 * mu + e1 * (sin_t * std::cos(phi)) + e2 * (sin_t * std::sin(phi));
      // Ray x - r dir inside the eps-ball: r^2 - 2 r b + c < 0.
      const double b = dot(x, dir);
      const double c = norm2(x) - eps * eps;
      const double disc = b * b - c;
      if (disc <= 0.0) continue;
      const double root = std::sqrt(disc);
      const double lo = std::max(0.0, b - root);
      const double hi = b + root;
      if (hi <= lo) continue;
      const double line = radial.integrate(
          [&](double r) { return inv_eps3 * profile.density(norm(x - dir * r) / eps); }, lo, hi);
      total += dir * (polar.weights[ip] * dphi * line);
    }
  }
  return total * cfg.strength;
}

}  // namespace vpfp::oracle
