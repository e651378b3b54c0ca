#pragma once

// Checks on the kinetic Green's function that share no code with it: a 6-D
// trapezoid tensor grid for the total mass, and RK4 on the covariance ODE
// of free kinetic diffusion.

#include <array>
#include <cmath>
#include <vector>

#include "vpfp/stats_oracles.hpp"

namespace vpfp::oracle {

/// Trapezoid sum of G over [-rx, rx]^3 x [-rv, rv]^3; spectrally accurate for
/// Gaussian integrands once the box holds the tails.
inline double tensor_grid_mass(const GreenEval& g, int nx, double rx, int nv, double rv) {
  std::vector<double> xs(static_cast<std::size_t>(nx)), vs(static_cast<std::size_t>(nv));
  for (int i = 0; i < nx; ++i) xs[static_cast<std::size_t>(i)] = -rx + 2 * rx * i / (nx - 1);
  for (int i = 0; i < nv; ++i) vs[static_cast<std::size_t>(i)] = -rv + 2 * rv * i / (nv - 1);
  const double hx = xs[1] - xs[0], hv = vs[1] - vs[0];
  double total = 0;
  for (double x1 : xs)
    for (double x2 : xs)
      for (double x3 : xs)
        for (double v1 : vs)
          for (double v2 : vs)
            for (double v3 : vs) total += kinetic_green(g, {x1, x2, x3}, {v1, v2, v3});
  return total * std::pow(hx * hv, 3);
}

/// (Var x, Cov(x, v), Var v) per coordinate at time t for dx = v dt,
/// dv = sqrt(2 sigma) dB started at the origin: RK4 on S' = A S + S A^T + Q.
inline std::array<double, 3> lyapunov_covariance(double sigma, double t, int steps = 2000) {
  auto rhs = [&](const std::array<double, 3>& s) { return std::array<double, 3>{2 * s[1], s[2], 2 * sigma}; };
  auto add = [](std::array<double, 3> a, const std::array<double, 3>& b, double c) {
    for (int i = 0; i < 3; ++i) a[static_cast<std::size_t>(i)] += c * b[static_cast<std::size_t>(i)];
    return a;
  };
  std::array<double, 3> s{0, 0, 0};
  const double h = t / steps;
  for (int k = 0; k < steps; ++k) {
    const auto k1 = rhs(s), k2 = rhs(add(s, k1, h / 2)), k3 = rhs(add(s, k2, h / 2)), k4 = rhs(add(s, k3, h));
    for (std::size_t i = 0; i < 3; ++i) s[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return s;
}

}  // namespace vpfp::oracle
