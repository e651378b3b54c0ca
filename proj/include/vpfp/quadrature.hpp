#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "vpfp/errors.hpp"

namespace vpfp::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;  // achieved error estimate
  int evaluations = 0;
  bool converged = false;
};

struct Tolerance {
  double absolute = 1e-10;
  double relative = 1e-12;
  int max_subdivisions = 2000;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[static_cast<std::size_t>(j)];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += kKronrodWeights[static_cast<std::size_t>(j)] * (f1 + f2);
    if (j % 2 == 1) gauss += kGaussWeights[static_cast<std::size_t>(j / 2)] * (f1 + f2);
  }
  return {a, b, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (G7/K15) integration of f over [a, b].
/// Does not throw; inspect Result::converged.
template <class F>
Result integrate(F&& f, double a, double b, Tolerance tol = {}) {
  Result out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gauss_kronrod(f, a, b);
  out.evaluations = 15;
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  int splits = 0;
  while (total_err > std::max(tol.absolute, tol.relative * std::fabs(total))) {
    if (splits >= tol.max_subdivisions) break;
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {  // interval exhausted in floating point
      heap.push(worst);
      break;
    }
    auto left = detail::gauss_kronrod(f, worst.a, mid);
    auto right = detail::gauss_kronrod(f, mid, worst.b);
    out.evaluations += 30;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }
  // Re-sum to remove drift from the incremental updates.
  total = 0.0;
  total_err = 0.0;
  std::vector<detail::Segment> segs;
  segs.reserve(heap.size());
  while (!heap.empty()) {
    segs.push_back(heap.top());
    heap.pop();
  }
  std::sort(segs.begin(), segs.end(), [](const auto& l, const auto& r) { return l.a < r.a; });
  for (const auto& s : segs) {
    total += s.value;
    total_err += s.error;
  }
  out.value = total;
  out.error = total_err;
  out.converged = std::isfinite(total) && total_err <= std::max(tol.absolute, tol.relative * std::fabs(total));
  return out;
}

/// Integrate over consecutive breakpoints; each piece gets the full tolerance
/// split evenly.
template <class F>
Result integrate_pieces(F&& f, std::span<const double> breaks, Tolerance tol = {}) {
  Result out;
  out.converged = true;
  if (breaks.size() < 2) return out;
  Tolerance piece = tol;
  piece.absolute = tol.absolute / static_cast<double>(breaks.size() - 1);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    if (!(breaks[k + 1] > breaks[k])) continue;
    const auto r = integrate(f, breaks[k], breaks[k + 1], piece);
    out.value += r.value;
    out.error += r.error;
    out.evaluations += r.evaluations;
    out.converged = out.converged && r.converged;
  }
  return out;
}

/// Same as integrate() but raises QuadratureError on non-convergence.
template <class F>
double integrate_checked(F&& f, double a, double b, Tolerance tol, const std::string& what) {
  const auto r = integrate(f, a, b, tol);
  if (!r.converged) throw QuadratureError(what + ": quadrature did not converge", r.error);
  return r.value;
}

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n)) {
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-16) break;
      }
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const auto lo = static_cast<std::size_t>(i);
      const auto hi = static_cast<std::size_t>(n - 1 - i);
      nodes[lo] = -x;
      nodes[hi] = x;
      weights[lo] = weights[hi] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  /// Fixed-order integral of f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) s += weights[k] * f(c + h * nodes[k]);
    return s * h;
  }
};

}  // namespace vpfp::quad
