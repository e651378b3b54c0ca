#pragma once

// Sweeps over N and log-log rate fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vpfp/dynamics.hpp"
#include "vpfp/errors.hpp"
#include "vpfp/fields.hpp"
#include "vpfp/kernels.hpp"
#include "vpfp/measures.hpp"
#include "vpfp/parallel.hpp"
#include "vpfp/random.hpp"
#include "vpfp/stats_oracles.hpp"

namespace vpfp {

enum class SweepKind { consistency, ell_consistency, coupling, kernel_norms, k1_l1, collision_count, wasserstein };

inline const char* to_string(SweepKind k) {
  switch (k) {
    case SweepKind::consistency: return "consistency";
    case SweepKind::ell_consistency: return "ell_consistency";
    case SweepKind::coupling: return "coupling";
    case SweepKind::kernel_norms: return "kernel_norms";
    case SweepKind::k1_l1: return "k1_l1";
    case SweepKind::collision_count: return "collision_count";
    case SweepKind::wasserstein: return "wasserstein";
  }
  return "?";
}

inline SweepKind sweep_kind_from_string(const std::string& s) {
  for (auto k : {SweepKind::consistency, SweepKind::ell_consistency, SweepKind::coupling, SweepKind::kernel_norms,
                 SweepKind::k1_l1, SweepKind::collision_count, SweepKind::wasserstein})
    if (s == to_string(k)) return k;
  throw InvalidArgument("unknown sweep kind '" + s + "'");
}

struct SweepConfig {
  SweepKind kind = SweepKind::consistency;
  std::vector<long long> n_values;
  std::size_t replications = 1;
  std::uint64_t base_seed = 0;
  KernelConfig kernel;  // n_particles is overwritten per sweep point
  DensityModel density = DensityModel::gaussian(1.0);
  VelocityModel velocity = VelocityModel::truncated_gaussian(1.0);
  SimParams sim;
  double reference_factor = 10.0;   // M = reference_factor * N
  double wasserstein_p = 2.0;
  bool wasserstein_at_start = false;  // compare the initial draw instead of time T
  double collision_dt_exponent = 0.09;  // block length N^-exponent
  bool permissive = false;
  Exec exec;

  void validate() const {
    if (n_values.size() < 3) throw InvalidArgument("SweepConfig: a slope needs at least 3 values of N");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      if (n_values[i] < 2) throw InvalidArgument("SweepConfig: every N must be >= 2");
      if (i > 0 && n_values[i] <= n_values[i - 1])
        throw InvalidArgument("SweepConfig: n_values must be strictly increasing");
    }
    if (replications < 1) throw InvalidArgument("SweepConfig: replications must be >= 1");
    if (!(reference_factor > 0.0)) throw InvalidArgument("SweepConfig: reference_factor must be positive");
    if (!(wasserstein_p >= 1.0)) throw InvalidArgument("SweepConfig: wasserstein_p must be >= 1");
    KernelConfig k = kernel;
    k.n_particles = n_values.front();
    k.validate(permissive);
  }

  KernelConfig kernel_at(long long n) const {
    KernelConfig k = kernel;
    k.n_particles = n;
    return k;
  }

  std::uint64_t seed_for(long long n, std::size_t replication) const {
    return derive_seed(base_seed, static_cast<std::uint64_t>(n), replication);
  }
};

struct PointSummary {
  long long n = 0;
  double median = 0.0;
  double spread = 0.0;  // interquartile range
};

struct RateFitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  std::vector<PointSummary> per_point;
};

/// OLS of log y on log x.
inline RateFitResult fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionMismatch("fit_power_law: xs and ys differ in length");
  if (xs.size() < 3) throw InvalidArgument("fit_power_law: need at least 3 points");
  if (std::all_of(ys.begin(), ys.end(), [](double y) { return y == 0.0; }))
    throw DegenerateData("fit_power_law: every y value is zero");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw InvalidArgument("fit_power_law: inputs must be positive and finite");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx, dy = std::log(ys[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DegenerateData("fit_power_law: all x values are equal");
  RateFitResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = std::log(ys[i]) - (r.intercept + r.slope * std::log(xs[i]));
    sse += e * e;
  }
  r.slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
  r.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - sse / syy, 0.0, 1.0);
  return r;
}

inline double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline PointSummary summarize(long long n, std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("summarize: no values");
  std::sort(values.begin(), values.end());
  return {n, quantile_sorted(values, 0.5), quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25)};
}

struct SweepRow {
  std::string kind;
  long long n = 0;
  std::uint64_t seed = 0;
  double value = 0.0;
  double std_error = 0.0;
};

struct NamedFit {
  std::string name;
  RateFitResult fit;
  bool divided_by_log = false;
};

struct SweepOutcome {
  SweepKind kind{};
  std::vector<SweepRow> rows;
  std::vector<NamedFit> fits;
  std::string verdict;  // sweep-specific summary, empty when not applicable
  bool passed = true;   // sweep-specific built-in check (monotonicity, exceedance)
};

/// One (value, std_error) per (N, seed).
using PointEvaluator = std::function<Estimate(long long n, std::uint64_t seed, const Exec& exec)>;

/// Evaluates every (N, replication) pair, replications concurrently. Rows come
/// back sorted by (N, replication index) whatever the thread count.
inline std::vector<SweepRow> collect_rows(const SweepConfig& cfg, const std::string& kind,
                                          const PointEvaluator& eval) {
  std::vector<SweepRow> rows;
  const std::size_t reps = cfg.replications;
  const unsigned outer = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, cfg.exec.threads), reps));
  Exec inner = cfg.exec;
  inner.threads = std::max(1u, cfg.exec.threads / outer);
  for (long long n : cfg.n_values) {
    std::vector<SweepRow> block(reps);
    parallel_for(reps, outer, [&](std::size_t b, std::size_t e) {
      for (std::size_t r = b; r < e; ++r) {
        const std::uint64_t seed = cfg.seed_for(n, r);
        const Estimate est = eval(n, seed, inner);
        block[r] = {kind, n, seed, est.value, est.std_error};
      }
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

inline std::vector<PointSummary> medians(const std::vector<SweepRow>& rows, const std::string& kind) {
  std::vector<PointSummary> out;
  for (std::size_t i = 0; i < rows.size();) {
    if (rows[i].kind != kind) {
      ++i;
      continue;
    }
    std::vector<double> vals;
    const long long n = rows[i].n;
    for (; i < rows.size() && rows[i].n == n && rows[i].kind == kind; ++i) vals.push_back(rows[i].value);
    out.push_back(summarize(n, std::move(vals)));
  }
  return out;
}

/// Fit of median (optionally divided by log N) against N.
inline NamedFit fit_medians(const std::vector<SweepRow>& rows, const std::string& kind, bool divide_by_log) {
  const auto pts = medians(rows, kind);
  std::vector<double> xs, ys;
  for (const auto& p : pts) {
    xs.push_back(static_cast<double>(p.n));
    ys.push_back(divide_by_log ? p.median / std::log(static_cast<double>(p.n)) : p.median);
  }
  NamedFit f{kind, fit_power_law(xs, ys), divide_by_log};
  f.fit.per_point = pts;
  return f;
}

inline bool nonincreasing(const std::vector<PointSummary>& pts) {
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].median > pts[i - 1].median) return false;
  return true;
}

/// Generic sweep: rows from eval, then the median fit.
inline SweepOutcome run_custom_sweep(const SweepConfig& cfg, const PointEvaluator& eval, bool divide_by_log = false) {
  cfg.validate();
  SweepOutcome out;
  out.kind = cfg.kind;
  out.rows = collect_rows(cfg, to_string(cfg.kind), eval);
  out.fits.push_back(fit_medians(out.rows, to_string(cfg.kind), divide_by_log));
  return out;
}

template <BlobProfile Profile>
SweepOutcome run_consistency_sweep(const SweepConfig& cfg, const Profile& profile = {}) {
  if (cfg.kind != SweepKind::consistency) throw InvalidArgument("run_consistency_sweep: wrong sweep kind");
  return run_custom_sweep(
      cfg,
      [&](long long n, std::uint64_t seed, const Exec& exec) {
        CounterStream rng(seed, 0, Domain::sampling);
        return Estimate{consistency_residual(cfg.kernel_at(n), profile, cfg.density, cfg.velocity,
                                             static_cast<std::size_t>(n), rng, exec),
                        0.0};
      },
      true);
}

inline SweepOutcome run_ell_consistency_sweep(const SweepConfig& cfg) {
  if (cfg.kind != SweepKind::ell_consistency) throw InvalidArgument("run_ell_consistency_sweep: wrong sweep kind");
  return run_custom_sweep(
      cfg,
      [&](long long n, std::uint64_t seed, const Exec& exec) {
        CounterStream rng(seed, 0, Domain::sampling);
        return Estimate{
            ell_consistency_residual(cfg.kernel_at(n), cfg.density, cfg.velocity, static_cast<std::size_t>(n), rng, exec),
            0.0};
      },
      true);
}

/// Median over seeds of max_t |Phi - Psi|. The verdict also requires the
/// recorded distance at t = 0 to be exactly zero.
template <BlobProfile Profile>
SweepOutcome run_coupling_sweep(const SweepConfig& cfg, const Profile& profile = {}) {
  if (cfg.kind != SweepKind::coupling) throw InvalidArgument("run_coupling_sweep: wrong sweep kind");
  cfg.validate();
  std::vector<double> initial(cfg.n_values.size() * cfg.replications, 0.0);
  SweepOutcome out;
  out.kind = cfg.kind;
  out.rows = collect_rows(cfg, "coupling", [&](long long n, std::uint64_t seed, const Exec& exec) {
    SimParams p = cfg.sim;
    p.seed = seed;
    const auto m = static_cast<std::size_t>(std::llround(cfg.reference_factor * static_cast<double>(n)));
    CouplingOptions opt;
    opt.snapshot_every = 0;
    const auto rec = run_coupled(cfg.kernel_at(n), profile, cfg.density, cfg.velocity, static_cast<std::size_t>(n),
                                 std::max<std::size_t>(m, 2), p, exec, opt);
    const auto idx = static_cast<std::size_t>(std::find(cfg.n_values.begin(), cfg.n_values.end(), n) -
                                              cfg.n_values.begin());
    for (std::size_t r = 0; r < cfg.replications; ++r)
      if (cfg.seed_for(n, r) == seed) initial[idx * cfg.replications + r] = rec.distances.front();
    return Estimate{rec.max_distance(), 0.0};
  });
  out.fits.push_back(fit_medians(out.rows, "coupling", false));
  const bool mono = nonincreasing(out.fits.front().fit.per_point);
  const bool zero_start = std::all_of(initial.begin(), initial.end(), [](double d) { return d == 0.0; });
  out.passed = mono && zero_start;
  out.verdict = std::string(mono ? "monotone-decreasing" : "not-monotone") +
                (zero_start ? "" : "; nonzero distance at t = 0");
  return out;
}

/// ||k^N||_2 and sup |grad k^N| per N; fits named kernel_l2 and kernel_grad_sup.
template <BlobProfile Profile>
SweepOutcome run_kernel_norm_sweep(const SweepConfig& cfg, const Profile& profile = {}) {
  if (cfg.kind != SweepKind::kernel_norms) throw InvalidArgument("run_kernel_norm_sweep: wrong sweep kind");
  cfg.validate();
  SweepOutcome out;
  out.kind = cfg.kind;
  for (long long n : cfg.n_values) {
    const auto k = cfg.kernel_at(n);
    const auto l2 = kernel_l2_norm(k, profile);
    out.rows.push_back({"kernel_l2", n, 0, l2.value, l2.error});
    out.rows.push_back({"kernel_grad_sup", n, 0, kernel_gradient_sup(k, profile), 0.0});
  }
  out.fits.push_back(fit_medians(out.rows, "kernel_l2", false));
  out.fits.push_back(fit_medians(out.rows, "kernel_grad_sup", false));
  return out;
}

template <BlobProfile Profile>
SweepOutcome run_k1_sweep(const SweepConfig& cfg, const Profile& profile = {}) {
  if (cfg.kind != SweepKind::k1_l1) throw InvalidArgument("run_k1_sweep: wrong sweep kind");
  cfg.validate();
  SweepOutcome out;
  out.kind = cfg.kind;
  for (long long n : cfg.n_values) {
    const auto r = singular_part_l1_norm(cfg.kernel_at(n), profile);
    out.rows.push_back({"k1_l1", n, 0, r.value, r.error});
  }
  out.fits.push_back(fit_medians(out.rows, "k1_l1", false));
  return out;
}

/// W_p between the Phi cloud and an equal-size subsample of the reference
/// ensemble, both at time T (or both freshly drawn from f0 when
/// wasserstein_at_start is set). Verdict: medians nonincreasing in N.
template <BlobProfile Profile>
SweepOutcome run_wasserstein_sweep(const SweepConfig& cfg, const Profile& profile = {}) {
  if (cfg.kind != SweepKind::wasserstein) throw InvalidArgument("run_wasserstein_sweep: wrong sweep kind");
  auto out = run_custom_sweep(cfg, [&](long long n, std::uint64_t seed, const Exec& exec) {
    const auto size = static_cast<std::size_t>(n);
    CounterStream draw_rng(seed, 0, Domain::projection);
    PhaseState state, reference;
    if (cfg.wasserstein_at_start) {
      CounterStream a(seed, 0, Domain::initial_state), b(seed, 0, Domain::reference_initial);
      state = sample_initial_phase(cfg.density, cfg.velocity, size, a);
      reference = sample_initial_phase(cfg.density, cfg.velocity, size, b);
    } else {
      SimParams p = cfg.sim;
      p.seed = seed;
      const auto m = std::max(
          size, static_cast<std::size_t>(std::llround(cfg.reference_factor * static_cast<double>(n))));
      CouplingOptions opt;
      opt.snapshot_every = 0;
      auto rec = run_coupled(cfg.kernel_at(n), profile, cfg.density, cfg.velocity, size, m, p, exec, opt);
      state = std::move(rec.final_phi);
      // partial Fisher-Yates: n distinct reference particles
      std::vector<std::size_t> idx(rec.final_reference.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < size; ++i) {
        const std::size_t left = idx.size() - i;
        const auto j = i + std::min(left - 1, static_cast<std::size_t>(draw_rng.uniform() * static_cast<double>(left)));
        std::swap(idx[i], idx[j]);
      }
      for (std::size_t i = 0; i < size; ++i) {
        reference.positions.push_back(rec.final_reference.positions[idx[i]]);
        reference.velocities.push_back(rec.final_reference.velocities[idx[i]]);
      }
    }
    WassersteinOptions wo;
    const auto r = wasserstein_to_reference(
        state, [&](CounterStream&, std::size_t) { return reference; }, cfg.wasserstein_p, draw_rng, wo, exec);
    return Estimate{r.value, r.std_error};
  });
  out.passed = nonincreasing(out.fits.front().fit.per_point);
  out.verdict = out.passed ? "monotone-decreasing" : "not-monotone";
  return out;
}

struct CollisionPoint {
  long long n = 0;
  double bound = 0.0;
  double exceedance = 0.0;  // fraction of draws whose max count exceeds the bound
  double median_count = 0.0;
};

/// Per draw: max over i of the candidate count, taken at block offsets 0,
/// dt/2 and dt, with the block length N^-collision_dt_exponent. The check
/// passes when every N has exceedance frequency <= 5%.
inline SweepOutcome run_collision_count_sweep(const SweepConfig& cfg, std::vector<CollisionPoint>* report = nullptr) {
  if (cfg.kind != SweepKind::collision_count) throw InvalidArgument("run_collision_count_sweep: wrong sweep kind");
  cfg.validate();
  const double c_star = collision_constant(cfg.density);
  const double lambda2 = cfg.kernel.wide_cutoff_exponent;
  SweepOutcome out;
  out.kind = cfg.kind;
  out.rows = collect_rows(cfg, "collision_count", [&](long long n, std::uint64_t seed, const Exec&) {
    CounterStream rng(seed, 0, Domain::initial_state);
    const auto size = static_cast<std::size_t>(n);
    const auto s = sample_initial_phase(cfg.density, cfg.velocity, size, rng);
    const double dt = std::pow(static_cast<double>(n), -cfg.collision_dt_exponent);
    std::size_t worst = 0;
    for (double off : {0.0, 0.5 * dt, dt}) {
      const auto c = collision_candidate_count(s, lambda2, dt, off, size);
      worst = std::max(worst, *std::max_element(c.begin(), c.end()));
    }
    return Estimate{static_cast<double>(worst), 0.0};
  });
  std::vector<CollisionPoint> points;
  for (const auto& p : medians(out.rows, "collision_count")) {
    CollisionPoint cp{p.n, collision_bound(c_star, lambda2, std::pow(double(p.n), -cfg.collision_dt_exponent), double(p.n)),
                      0.0, p.median};
    std::size_t total = 0, over = 0;
    for (const auto& r : out.rows)
      if (r.n == p.n) {
        ++total;
        over += r.value > cp.bound ? 1u : 0u;
      }
    cp.exceedance = static_cast<double>(over) / static_cast<double>(total);
    out.passed = out.passed && cp.exceedance <= 0.05;
    points.push_back(cp);
  }
  out.verdict = out.passed ? "exceedance <= 5% at every N" : "exceedance above 5%";
  if (report) *report = std::move(points);
  return out;
}

/// Dispatch on cfg.kind with the bump mollifier.
inline SweepOutcome run_sweep(const SweepConfig& cfg) {
  const BumpProfile bump;
  switch (cfg.kind) {
    case SweepKind::consistency: return run_consistency_sweep(cfg, bump);
    case SweepKind::ell_consistency: return run_ell_consistency_sweep(cfg);
    case SweepKind::coupling: return run_coupling_sweep(cfg, bump);
    case SweepKind::kernel_norms: return run_kernel_norm_sweep(cfg, bump);
    case SweepKind::k1_l1: return run_k1_sweep(cfg, bump);
    case SweepKind::collision_count: return run_collision_count_sweep(cfg);
    case SweepKind::wasserstein: return run_wasserstein_sweep(cfg, bump);
  }
  throw InvalidArgument("run_sweep: unknown kind");
}

}  // namespace vpfp
