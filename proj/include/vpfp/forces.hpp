#pragma once

// O(N^2) sums of k^N and l^N over particle clouds. The inner loops are
// branch-free over structure-of-arrays copies so they vectorize; the simd
// reductions use a fixed lane count per build, so results do not depend on
// the thread count.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "vpfp/kernels.hpp"
#include "vpfp/parallel.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp {

/// Structure-of-arrays copy of a point cloud.
struct PointsSoA {
  std::vector<double> x, y, z;

  PointsSoA() = default;
  explicit PointsSoA(std::span<const Vec3> pts) { assign(pts); }

  void assign(std::span<const Vec3> pts) {
    x.resize(pts.size());
    y.resize(pts.size());
    z.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      x[i] = pts[i].x;
      y[i] = pts[i].y;
      z[i] = pts[i].z;
    }
  }
  std::size_t size() const { return x.size(); }
};

namespace detail {

template <BlobProfile Profile>
struct PairFactor {
  double strength;
  double inv_cut2;
  double peak;  // strength * N^{3 delta}
  Profile profile;

  explicit PairFactor(const MollifiedCoulomb<Profile>& k)
      : strength(k.strength()),
        inv_cut2(k.inverse_cutoff() * k.inverse_cutoff()),
        peak(k.strength() * k.scaled_peak()),
        profile(k.profile()) {}

  // f(r2) with k^N(d) = f d; equal to MollifiedCoulomb::factor.
  double operator()(double r2) const {
    const double s2 = r2 * inv_cut2;
    const bool inside = s2 < 1.0;
    const double rr = inside ? 1.0 : r2;
    const double outer = strength / (rr * std::sqrt(rr));
    double inner;
    if constexpr (EvenBlobProfile<Profile>) {
      inner = peak * profile.mass_ratio_sq(inside ? s2 : 0.0);
    } else {
      inner = peak * profile.mass_ratio(std::sqrt(inside ? s2 : 0.0));
    }
    return inside ? inner : outer;
  }
};

#if defined(__AVX512F__)
template <class P>
concept SimdEvenProfile = requires(__m512d u) {
  P::mass_ratio_sq(u);
};

// 1/r^3 from the 14-bit reciprocal square root estimate and two Newton steps.
template <BlobProfile Profile>
  requires SimdEvenProfile<Profile>
Vec3 kernel_row_avx512(const PairFactor<Profile>& factor, double xi, double yi, double zi, const double* sx,
                       const double* sy, const double* sz, std::size_t m) {
  const __m512d X = _mm512_set1_pd(xi), Y = _mm512_set1_pd(yi), Z = _mm512_set1_pd(zi);
  const __m512d one = _mm512_set1_pd(1.0), half = _mm512_set1_pd(0.5), three_halves = _mm512_set1_pd(1.5);
  const __m512d ic2 = _mm512_set1_pd(factor.inv_cut2), strength = _mm512_set1_pd(factor.strength),
                peak = _mm512_set1_pd(factor.peak);
  __m512d ax = _mm512_setzero_pd(), ay = ax, az = ax;
  std::size_t j = 0;
  for (; j + 8 <= m; j += 8) {
    const __m512d dx = _mm512_sub_pd(X, _mm512_loadu_pd(sx + j));
    const __m512d dy = _mm512_sub_pd(Y, _mm512_loadu_pd(sy + j));
    const __m512d dz = _mm512_sub_pd(Z, _mm512_loadu_pd(sz + j));
    const __m512d r2 = _mm512_fmadd_pd(dx, dx, _mm512_fmadd_pd(dy, dy, _mm512_mul_pd(dz, dz)));
    const __m512d s2 = _mm512_mul_pd(r2, ic2);
    const __mmask8 inside = _mm512_cmp_pd_mask(s2, one, _CMP_LT_OQ);
    const __m512d rr = _mm512_mask_blend_pd(inside, r2, one);
    const __m512d hr = _mm512_mul_pd(half, rr);
    __m512d y = _mm512_rsqrt14_pd(rr);
    y = _mm512_mul_pd(y, _mm512_fnmadd_pd(hr, _mm512_mul_pd(y, y), three_halves));
    y = _mm512_mul_pd(y, _mm512_fnmadd_pd(hr, _mm512_mul_pd(y, y), three_halves));
    const __m512d outer = _mm512_mul_pd(strength, _mm512_mul_pd(y, _mm512_mul_pd(y, y)));
    const __m512d inner = _mm512_mul_pd(peak, Profile::mass_ratio_sq(_mm512_maskz_mov_pd(inside, s2)));
    const __m512d f = _mm512_mask_blend_pd(inside, outer, inner);
    ax = _mm512_fmadd_pd(f, dx, ax);
    ay = _mm512_fmadd_pd(f, dy, ay);
    az = _mm512_fmadd_pd(f, dz, az);
  }
  Vec3 acc{_mm512_reduce_add_pd(ax), _mm512_reduce_add_pd(ay), _mm512_reduce_add_pd(az)};
  for (; j < m; ++j) {
    const double dx = xi - sx[j], dy = yi - sy[j], dz = zi - sz[j];
    acc += Vec3{dx, dy, dz} * factor(dx * dx + dy * dy + dz * dz);
  }
  return acc;
}
#endif

template <BlobProfile Profile>
Vec3 kernel_row(const PairFactor<Profile>& factor, double xi, double yi, double zi, const double* __restrict sx,
                const double* __restrict sy, const double* __restrict sz, std::size_t m) {
#if defined(__AVX512F__)
  if constexpr (SimdEvenProfile<Profile>) return kernel_row_avx512(factor, xi, yi, zi, sx, sy, sz, m);
#endif
  double fx = 0.0, fy = 0.0, fz = 0.0;
#pragma omp simd reduction(+ : fx, fy, fz)
  for (std::size_t j = 0; j < m; ++j) {
    const double dx = xi - sx[j];
    const double dy = yi - sy[j];
    const double dz = zi - sz[j];
    const double f = factor(dx * dx + dy * dy + dz * dz);
    fx += f * dx;
    fy += f * dy;
    fz += f * dz;
  }
  return {fx, fy, fz};
}

inline double ell_row(double peak, double b2, double xi, double yi, double zi, const double* __restrict sx,
                      const double* __restrict sy, const double* __restrict sz, std::size_t m) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t j = 0; j < m; ++j) {
    const double dx = xi - sx[j];
    const double dy = yi - sy[j];
    const double dz = zi - sz[j];
    const double r2 = dx * dx + dy * dy + dz * dz;
    const bool far = r2 >= b2;
    const double rr = far ? r2 : 1.0;
    const double l = 216.0 / (rr * std::sqrt(rr));
    acc += far ? l : peak;
  }
  return acc;
}

}  // namespace detail

/// out[i] = weight * sum_j k^N(target_i - source_j). The self pair contributes
/// k^N(0) = 0, so passing the same cloud as targets and sources gives the
/// interacting-system force without an explicit j != i test.
template <BlobProfile Profile>
void accumulate_kernel_sum(const MollifiedCoulomb<Profile>& kernel, const PointsSoA& targets, const PointsSoA& sources,
                           double weight, std::span<Vec3> out, const Exec& exec = {}) {
  const detail::PairFactor<Profile> factor(kernel);
  const std::size_t m = sources.size();
  const double* sx = sources.x.data();
  const double* sy = sources.y.data();
  const double* sz = sources.z.data();
  parallel_for(targets.size(), exec.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = detail::kernel_row(factor, targets.x[i], targets.y[i], targets.z[i], sx, sy, sz, m) * weight;
  });
}

/// out[i] = weight * sum_j l^N(target_i - source_j), self pair included.
inline void accumulate_ell_sum(const CutoffMajorant& ell_n, const PointsSoA& targets, const PointsSoA& sources,
                               double weight, std::span<double> out, const Exec& exec = {}) {
  const double peak = ell_n.peak();
  const double b2 = ell_n.breakpoint() * ell_n.breakpoint();
  const std::size_t m = sources.size();
  const double* sx = sources.x.data();
  const double* sy = sources.y.data();
  const double* sz = sources.z.data();
  parallel_for(targets.size(), exec.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = detail::ell_row(peak, b2, targets.x[i], targets.y[i], targets.z[i], sx, sy, sz, m) * weight;
  });
}

}  // namespace vpfp
