#pragma once

// Equal-weight empirical measures and Wasserstein-p distances between them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vpfp/errors.hpp"
#include "vpfp/parallel.hpp"
#include "vpfp/phase_state.hpp"
#include "vpfp/random.hpp"

namespace vpfp {

enum class Projection { position, phase };

/// Uniform point cloud in R^d, stored row-major.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ == 0) throw InvalidArgument("EmpiricalMeasure: dimension must be >= 1");
    if (coords_.empty() || coords_.size() % dim_ != 0)
      throw InvalidArgument("EmpiricalMeasure: need a positive whole number of points");
    for (double c : coords_)
      if (!std::isfinite(c)) throw InvalidArgument("EmpiricalMeasure: non-finite coordinate");
  }

  static EmpiricalMeasure scalars(std::vector<double> values) { return {1, std::move(values)}; }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return coords_.size() / dim_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  const std::vector<double>& coords() const { return coords_; }

  EmpiricalMeasure scaled(double c) const {
    auto out = coords_;
    for (double& v : out) v *= c;
    return {dim_, std::move(out)};
  }
  EmpiricalMeasure translated(std::span<const double> t) const {
    if (t.size() != dim_) throw DimensionMismatch("translated: vector length differs from dimension");
    auto out = coords_;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i % dim_];
    return {dim_, std::move(out)};
  }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
};

inline EmpiricalMeasure from_phase(const PhaseState& state, Projection projection) {
  const std::size_t d = projection == Projection::position ? 3 : 6;
  std::vector<double> c;
  c.reserve(state.size() * d);
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Vec3& x = state.positions[i];
    c.insert(c.end(), {x.x, x.y, x.z});
    if (projection == Projection::phase) {
      const Vec3& v = state.velocities[i];
      c.insert(c.end(), {v.x, v.y, v.z});
    }
  }
  return {d, std::move(c)};
}

namespace detail {

inline double pow_cost(double dist, double p) {
  if (p == 1.0) return dist;
  if (p == 2.0) return dist * dist;
  return std::pow(dist, p);
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline void check_pair(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  if (mu.size() != nu.size()) throw DimensionMismatch("wasserstein: measures have different point counts");
  if (mu.dim() != nu.dim()) throw DimensionMismatch("wasserstein: measures live in different dimensions");
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("wasserstein: need finite p >= 1");
}

}  // namespace detail

/// Minimum-cost perfect matching on a dense n x n matrix (row-major) by
/// shortest augmenting paths with dual potentials. Returns col[row].
inline std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw DimensionMismatch("solve_assignment: cost matrix is not n x n");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based rows/cols; index 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* row = cost.data() + (i0 - 1) * n;
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= n; ++j) col[match[j] - 1] = j - 1;
  return col;
}

/// Exact W_p between equal-count clouds via optimal assignment.
inline double wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p,
                                const Exec& exec = {}) {
  detail::check_pair(mu, nu, p);
  const std::size_t n = mu.size();
  std::vector<double> cost(n * n);
  parallel_for(n, exec.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cost[i * n + j] = detail::pow_cost(detail::euclidean(mu.point(i), nu.point(j)), p);
  });
  const auto col = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + col[i]];
  return std::pow(total / static_cast<double>(n), 1.0 / p);
}

/// W_p on the line: sort both samples and match in order.
inline double wasserstein_1d(std::vector<double> a, std::vector<double> b, double p) {
  if (a.size() != b.size()) throw DimensionMismatch("wasserstein_1d: samples have different sizes");
  if (a.empty()) throw InvalidArgument("wasserstein_1d: empty samples");
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("wasserstein_1d: need finite p >= 1");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += detail::pow_cost(std::fabs(a[i] - b[i]), p);
  return std::pow(total / static_cast<double>(a.size()), 1.0 / p);
}

inline double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  if (mu.dim() != 1 || nu.dim() != 1) throw DimensionMismatch("wasserstein_1d: measures must be scalar");
  return wasserstein_1d(mu.coords(), nu.coords(), p);
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Mean over random unit directions of the 1-D W_p of the projected clouds.
/// Never exceeds the exact W_p in expectation, since projection is 1-Lipschitz.
inline Estimate wasserstein_sliced(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p,
                                   std::size_t n_projections, CounterStream& rng) {
  detail::check_pair(mu, nu, p);
  if (n_projections < 2) throw InvalidArgument("wasserstein_sliced: need at least 2 projections");
  if (mu.dim() < 2) throw InvalidArgument("wasserstein_sliced: use wasserstein_1d for scalar clouds");
  const std::size_t d = mu.dim(), n = mu.size();
  std::vector<double> theta(d), a(n), b(n), vals(n_projections);
  for (std::size_t k = 0; k < n_projections; ++k) {
    double len = 0.0;
    do {
      len = 0.0;
      for (double& t : theta) {
        t = rng.normal();
        len += t * t;
      }
    } while (len == 0.0);
    len = std::sqrt(len);
    for (double& t : theta) t /= len;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = mu.point(i), y = nu.point(i);
      a[i] = std::inner_product(x.begin(), x.end(), theta.begin(), 0.0);
      b[i] = std::inner_product(y.begin(), y.end(), theta.begin(), 0.0);
    }
    vals[k] = wasserstein_1d(a, b, p);
  }
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(n_projections);
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n_projections - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_projections))};
}

struct WassersteinResult {
  double value = 0.0;
  double std_error = 0.0;
  std::string method;  // "exact" or "sliced"
};

struct WassersteinOptions {
  std::size_t exact_limit = 2048;
  std::size_t projections = 256;
  Projection projection = Projection::phase;
};

using ReferenceSampler = std::function<PhaseState(CounterStream&, std::size_t)>;

/// W_p(mu_state, empirical measure of an equal-size draw from the reference).
inline WassersteinResult wasserstein_to_reference(const PhaseState& state, const ReferenceSampler& sampler, double p,
                                                  CounterStream& rng, const WassersteinOptions& opt = {},
                                                  const Exec& exec = {}) {
  const auto draw = sampler(rng, state.size());
  const auto mu = from_phase(state, opt.projection);
  const auto nu = from_phase(draw, opt.projection);
  if (state.size() <= opt.exact_limit) return {wasserstein_exact(mu, nu, p, exec), 0.0, "exact"};
  const auto est = wasserstein_sliced(mu, nu, p, opt.projections, rng);
  return {est.value, est.std_error, "sliced"};
}

}  // namespace vpfp
