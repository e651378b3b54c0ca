#pragma once

// Time integration of the interacting particle system, the mean-field copy
// driven by a reference ensemble, and their shared-noise coupling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "vpfp/errors.hpp"
#include "vpfp/fields.hpp"
#include "vpfp/forces.hpp"
#include "vpfp/kernels.hpp"
#include "vpfp/parallel.hpp"
#include "vpfp/phase_state.hpp"
#include "vpfp/random.hpp"
#include "vpfp/vec3.hpp"

namespace vpfp {

enum class Integrator {
  euler_maruyama,  // x' = x + v dt, v' = v + F dt + sqrt(2 sigma) dB
  kick_drift,      // v' first, then x' = x + v' dt
};

struct SimParams {
  double sigma = 0.5;
  double horizon = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::size_t record_every = 10;
  Integrator integrator = Integrator::euler_maruyama;

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sim.sigma must be finite and >= 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("sim.horizon must be finite and > 0");
    if (!(dt > 0.0) || dt > horizon) throw InvalidArgument("sim.dt must lie in (0, horizon]");
    if (record_every == 0) throw InvalidArgument("sim.record_every must be >= 1");
  }

  /// ceil(T / dt), tolerant of T being an exact multiple of dt up to rounding.
  std::size_t num_steps() const {
    const double q = horizon / dt;
    const double r = std::round(q);
    if (std::fabs(q - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(q));
  }
};

// --- force sums --------------------------------------------------------------

/// (K^N(X))_i = 1/(N-1) sum_{j != i} k^N(x_i - x_j), cut-off from cfg.
template <BlobProfile Profile>
void pairwise_force(const KernelConfig& cfg, const Profile& profile, const PointsSoA& x, std::span<Vec3> out,
                    const Exec& exec = {}) {
  const std::size_t n = x.size();
  if (n < 2) throw InvalidArgument("pairwise_force: need at least 2 particles");
  if (out.size() != n) throw DimensionMismatch("pairwise_force: output size differs from particle count");
  accumulate_kernel_sum(make_kernel(cfg, profile), x, x, 1.0 / static_cast<double>(n - 1), out, exec);
}

template <BlobProfile Profile>
std::vector<Vec3> pairwise_force(const KernelConfig& cfg, const Profile& profile, const PhaseState& state,
                                 const Exec& exec = {}) {
  std::vector<Vec3> out(state.size());
  pairwise_force(cfg, profile, PointsSoA(state.positions), out, exec);
  return out;
}

/// (L^N(X))_i = 1/(N-1) sum_{j != i} l^N(x_i - x_j).
inline std::vector<double> pairwise_ell(const KernelConfig& cfg, std::span<const Vec3> positions,
                                        const Exec& exec = {}) {
  const std::size_t n = positions.size();
  if (n < 2) throw InvalidArgument("pairwise_ell: need at least 2 particles");
  const CutoffMajorant ell_n(cfg);
  const PointsSoA pts(positions);
  std::vector<double> out(n);
  accumulate_ell_sum(ell_n, pts, pts, 1.0, out, exec);
  const double w = 1.0 / static_cast<double>(n - 1);
  for (double& v : out) v = (v - ell_n.peak()) * w;  // drop the self pair
  return out;
}

inline std::vector<double> pairwise_ell(const KernelConfig& cfg, const PhaseState& state, const Exec& exec = {}) {
  return pairwise_ell(cfg, std::span<const Vec3>(state.positions), exec);
}

/// 1/M sum_j k^N(target_i - y_j) over the ensemble positions y.
template <BlobProfile Profile>
void reference_ensemble_force(const KernelConfig& cfg, const Profile& profile, const PointsSoA& ensemble,
                              const PointsSoA& targets, std::span<Vec3> out, const Exec& exec = {}) {
  if (ensemble.size() == 0) throw InvalidArgument("reference_ensemble_force: empty ensemble");
  accumulate_kernel_sum(make_kernel(cfg, profile), targets, ensemble, 1.0 / static_cast<double>(ensemble.size()), out,
                        exec);
}

template <BlobProfile Profile>
Vec3 reference_ensemble_force(const KernelConfig& cfg, const Profile& profile, const PhaseState& ensemble,
                              const Vec3& x) {
  PointsSoA target(std::span<const Vec3>(&x, 1));
  Vec3 out;
  reference_ensemble_force(cfg, profile, PointsSoA(ensemble.positions), target, std::span<Vec3>(&out, 1));
  return out;
}

// --- stepping ----------------------------------------------------------------

using ForceField = std::function<void(const PhaseState&, std::span<Vec3>)>;

/// Advances `state` by one step given the force at the incoming state. Noise
/// for particle i is drawn from key noise_offset + i.
inline void advance(PhaseState& state, std::span<const Vec3> force, const SimParams& params, const NoiseSource& noise,
                    std::size_t step_index, std::uint64_t noise_offset = 0) {
  const double dt = params.dt;
  const double amp = std::sqrt(2.0 * params.sigma);
  const bool noisy = params.sigma > 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    Vec3& x = state.positions[i];
    Vec3& v = state.velocities[i];
    Vec3 kick = force[i] * dt;
    if (noisy) kick += noise.increment(noise_offset + i, step_index, dt) * amp;
    if (params.integrator == Integrator::euler_maruyama) {
      x += v * dt;
      v += kick;
    } else {
      v += kick;
      x += v * dt;
    }
    if (!all_finite(x) || !all_finite(v)) throw IntegrationBlowUp(i, step_index);
  }
}

/// One step with the force evaluated by `force_field` at the incoming state.
inline PhaseState step(const PhaseState& state, const ForceField& force_field, const SimParams& params,
                       const NoiseSource& noise, std::size_t step_index, std::uint64_t noise_offset = 0) {
  if (!(params.dt > 0.0)) throw InvalidArgument("step: dt must be > 0");
  std::vector<Vec3> force(state.size());
  force_field(state, force);
  PhaseState next = state;
  advance(next, force, params, noise, step_index, noise_offset);
  return next;
}

/// Integrates the pairwise system to the horizon.
template <BlobProfile Profile>
PhaseState simulate(const KernelConfig& cfg, const Profile& profile, PhaseState state, const SimParams& params,
                    const Exec& exec = {}, const std::function<void(std::size_t, const PhaseState&)>& observer = {}) {
  params.validate();
  const NoiseSource noise(params.seed);
  const std::size_t steps = params.num_steps();
  std::vector<Vec3> force(state.size());
  PointsSoA soa;
  if (observer) observer(0, state);
  for (std::size_t n = 0; n < steps; ++n) {
    soa.assign(state.positions);
    pairwise_force(cfg, profile, soa, force, exec);
    advance(state, force, params, noise, n);
    if (observer) observer(n + 1, state);
  }
  return state;
}

// --- coupling ----------------------------------------------------------------

/// sqrt(log n) max|X - Xbar| + max|V - Vbar|, maxima over all coordinates.
inline double distance_norm(const PhaseState& phi, const PhaseState& psi, std::size_t n) {
  if (phi.size() != psi.size() || phi.size() != n) throw DimensionMismatch("distance_norm: state sizes differ");
  if (n < 2) throw InvalidArgument("distance_norm: need n >= 2");
  double dx = 0.0, dv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dx = std::max(dx, max_abs(phi.positions[i] - psi.positions[i]));
    dv = std::max(dv, max_abs(phi.velocities[i] - psi.velocities[i]));
  }
  return std::sqrt(std::log(static_cast<double>(n))) * dx + dv;
}

struct Snapshot {
  double time = 0.0;
  PhaseState phi;
  PhaseState psi;
  PhaseState reference;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> distances;
  std::vector<double> running_max;  // max over every step up to times[k]
  std::vector<Snapshot> snapshots;
  PhaseState final_phi;
  PhaseState final_psi;
  PhaseState final_reference;

  double max_distance() const { return running_max.empty() ? 0.0 : running_max.back(); }
};

struct CouplingOptions {
  std::size_t snapshot_every = 0;  // steps between snapshots, 0 = none
  bool keep_reference_snapshots = false;
};

/// Evolves Phi (pairwise), Psi (driven by the reference ensemble) and the
/// self-interacting reference ensemble on shared noise. Phi and Psi use noise
/// keys 0..N-1, the ensemble uses keys N..N+M-1. The ensemble is never pushed
/// back on by Psi.
template <BlobProfile Profile>
TrajectoryRecord run_coupled(const KernelConfig& cfg, const Profile& profile, const PhaseState& initial,
                             const PhaseState& reference_initial, const SimParams& params, const Exec& exec = {},
                             const CouplingOptions& options = {}) {
  params.validate();
  const std::size_t n = initial.size();
  const std::size_t m = reference_initial.size();
  if (n < 2) throw InvalidArgument("run_coupled: need N >= 2");
  if (m < 2) throw InvalidArgument("run_coupled: need a reference ensemble of at least 2 particles");
  const NoiseSource noise(params.seed);
  const std::size_t steps = params.num_steps();

  PhaseState phi = initial;
  PhaseState psi = initial;
  PhaseState ref = reference_initial;
  std::vector<Vec3> f_phi(n), f_psi(n), f_ref(m);
  PointsSoA s_phi, s_psi, s_ref;

  TrajectoryRecord rec;
  double running = 0.0;
  auto record = [&](std::size_t k, double d) {
    rec.times.push_back(static_cast<double>(k) * params.dt);
    rec.distances.push_back(d);
    rec.running_max.push_back(running);
  };
  auto snapshot = [&](std::size_t k) {
    if (options.snapshot_every == 0 || k % options.snapshot_every != 0) return;
    rec.snapshots.push_back({static_cast<double>(k) * params.dt, phi, psi,
                             options.keep_reference_snapshots ? ref : PhaseState{}});
  };

  running = distance_norm(phi, psi, n);
  record(0, running);
  snapshot(0);
  for (std::size_t k = 0; k < steps; ++k) {
    s_phi.assign(phi.positions);
    s_psi.assign(psi.positions);
    s_ref.assign(ref.positions);
    pairwise_force(cfg, profile, s_phi, f_phi, exec);
    reference_ensemble_force(cfg, profile, s_ref, s_psi, f_psi, exec);
    pairwise_force(cfg, profile, s_ref, f_ref, exec);
    advance(phi, f_phi, params, noise, k, 0);
    advance(psi, f_psi, params, noise, k, 0);
    advance(ref, f_ref, params, noise, k, n);
    const double d = distance_norm(phi, psi, n);
    running = std::max(running, d);
    if ((k + 1) % params.record_every == 0 || k + 1 == steps) record(k + 1, d);
    snapshot(k + 1);
  }
  rec.final_phi = std::move(phi);
  rec.final_psi = std::move(psi);
  rec.final_reference = std::move(ref);
  return rec;
}

/// Samples Phi_0 = Psi_0 and an independent reference ensemble from f0, then
/// runs the coupling.
template <BlobProfile Profile>
TrajectoryRecord run_coupled(const KernelConfig& cfg, const Profile& profile, const DensityModel& density,
                             const VelocityModel& velocity, std::size_t n, std::size_t reference_size,
                             const SimParams& params, const Exec& exec = {}, const CouplingOptions& options = {}) {
  CounterStream init_rng(params.seed, 0, Domain::initial_state);
  CounterStream ref_rng(params.seed, 0, Domain::reference_initial);
  const PhaseState initial = sample_initial_phase(density, velocity, n, init_rng);
  const PhaseState reference = sample_initial_phase(density, velocity, reference_size, ref_rng);
  return run_coupled(cfg, profile, initial, reference, params, exec, options);
}

// --- consistency residuals -------------------------------------------------------

/// max over i and coordinates of |empirical_i - exact(x_i)|.
template <class Empirical, class Exact>
double consistency_residual_core(std::span<const Vec3> positions, Empirical&& empirical, Exact&& exact) {
  const auto emp = empirical(positions);
  if (emp.size() != positions.size()) throw DimensionMismatch("consistency residual: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if constexpr (std::is_same_v<std::decay_t<decltype(emp[i])>, Vec3>) {
      worst = std::max(worst, max_abs(emp[i] - exact(positions[i])));
    } else {
      worst = std::max(worst, std::fabs(emp[i] - exact(positions[i])));
    }
  }
  return worst;
}

/// n i.i.d. draws from density with no two positions equal; a coincident pair
/// (a measure-zero event) triggers a fresh draw of the whole sample.
inline std::vector<Vec3> sample_distinct_positions(const DensityModel& density, std::size_t n, CounterStream& rng,
                                                   int max_attempts = 8) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto pts = density.sample(rng, n);
    auto sorted = pts;
    std::sort(sorted.begin(), sorted.end(), [](const Vec3& a, const Vec3& b) {
      return a.x != b.x ? a.x < b.x : a.y != b.y ? a.y < b.y : a.z < b.z;
    });
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) return pts;
  }
  throw Error("sample_distinct_positions: repeated coincident samples");
}

/// ||K^N(Xbar) - (k^N * rho)(Xbar)||_inf at n i.i.d. positions from rho. The
/// velocity model is accepted for symmetry with the phase-space sampler; at
/// t = 0 only positions enter.
template <BlobProfile Profile>
double consistency_residual(const KernelConfig& cfg, const Profile& profile, const DensityModel& density,
                            const VelocityModel& /*velocity*/, std::size_t n, CounterStream& rng,
                            const Exec& exec = {}) {
  if (n < 2) throw InvalidArgument("consistency_residual: need n >= 2");
  if (cfg.strength == 0.0) return 0.0;
  const auto pts = sample_distinct_positions(density, n, rng);
  return consistency_residual_core(
      pts,
      [&](std::span<const Vec3> x) {
        std::vector<Vec3> out(x.size());
        pairwise_force(cfg, profile, PointsSoA(x), out, exec);
        return out;
      },
      [&](const Vec3& x) { return meanfield_force_exact(cfg, profile, density, x).value; });
}

/// ||L^N(Xbar) - (l^N * rho)(Xbar)||_inf, same sampling policy.
inline double ell_consistency_residual(const KernelConfig& cfg, const DensityModel& density,
                                       const VelocityModel& /*velocity*/, std::size_t n, CounterStream& rng,
                                       const Exec& exec = {}) {
  if (n < 2) throw InvalidArgument("ell_consistency_residual: need n >= 2");
  const auto pts = sample_distinct_positions(density, n, rng);
  return consistency_residual_core(
      pts, [&](std::span<const Vec3> x) { return pairwise_ell(cfg, x, exec); },
      [&](const Vec3& x) { return ell_convolution(cfg, density, x).value; });
}

}  // namespace vpfp
