// vpfp: simulations, sweeps and self-checks for the regularized particle system.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpfp/config.hpp"
#include "vpfp/dynamics.hpp"
#include "vpfp/experiments.hpp"
#include "vpfp/io.hpp"
#include "vpfp/selftest.hpp"

namespace fs = std::filesystem;
using namespace vpfp;

namespace {

constexpr int kExitViolation = 3;

struct Flags {
  std::string config_path;
  std::optional<long long> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> output_dir;
  bool permissive = false;
  bool nondeterministic = false;
  std::optional<double> expect_slope;
  double tolerance = 0.15;
  bool ell = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// flags > environment > config file
RunConfig load(const Flags& f) {
  RunConfig c = parse_config(read_file(f.config_path), f.permissive);
  apply_environment(c);
  if (f.seed) {
    if (*f.seed < 0) throw ConfigError("--seed", "must be >= 0");
    c.sim.seed = c.base_seed = static_cast<std::uint64_t>(*f.seed);
  }
  if (f.threads) c.threads = std::max(1u, *f.threads);
  if (f.output_dir) c.output_dir = *f.output_dir;
  if (f.nondeterministic) c.deterministic = false;
  for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
  return c;
}

nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  for (const auto& [k, v] : resolved_entries(c)) j[k] = v;
  j["output.dir"] = c.output_dir;
  j["output.threads"] = c.threads;
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int simulate(const Flags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig c = load(f);
  const OutputDir out(c.output_dir);
  const std::string hash = config_hash(c);
  CouplingOptions opt;
  opt.snapshot_every = c.snapshot_every ? c.snapshot_every : c.sim.num_steps();
  opt.keep_reference_snapshots = true;
  const auto n = static_cast<std::size_t>(c.kernel.n_particles);
  const auto run = [&](const auto& profile) {
    return run_coupled(c.kernel, profile, c.density(), c.velocity(), n, c.reference_size(), c.sim, c.exec(), opt);
  };
  const TrajectoryRecord rec = c.profile == ProfileKind::bump ? run(BumpProfile{}) : run(WendlandProfile{});
  write_trajectory_csv(out.file("trajectory.csv"), hash, rec);
  write_distance_csv(out.file("distance.csv"), hash, rec);
  nlohmann::json s{{"command", "simulate"},
                   {"config", config_json(c)},
                   {"config_hash", hash},
                   {"seed", c.sim.seed},
                   {"N", n},
                   {"M", c.reference_size()},
                   {"max_distance", rec.max_distance()},
                   {"initial_distance", rec.distances.front()},
                   {"wall_clock_seconds", seconds_since(t0)}};
  write_json(out.file("simulate_summary.json"), s);
  std::cout << "max distance " << rec.max_distance() << " (N = " << n << ", M = " << c.reference_size() << ")\n";
  return 0;
}

// Built-in verdicts plus an optional --expect-slope on the first fit.
int finish_sweep(const Flags& f, const RunConfig& c, const std::string& name, const std::vector<SweepOutcome>& outcomes,
                 std::chrono::steady_clock::time_point t0, const nlohmann::json& extra = {}) {
  const OutputDir out(c.output_dir);
  const std::string hash = config_hash(c);
  std::vector<SweepRow> rows;
  nlohmann::json results = nlohmann::json::array();
  bool ok = true;
  for (const auto& o : outcomes) {
    rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    results.push_back(to_json(o));
    ok = ok && o.passed;
    for (const auto& fit : o.fits)
      std::cout << fit.name << ": slope " << fit.fit.slope << " +- " << fit.fit.slope_stderr << ", R^2 "
                << fit.fit.r_squared << (fit.divided_by_log ? " (median / log N)" : "") << '\n';
    if (!o.verdict.empty()) std::cout << "verdict: " << o.verdict << '\n';
  }
  nlohmann::json criteria = nlohmann::json::array();
  criteria.push_back({{"name", "built-in sweep checks"}, {"passed", ok}});
  if (f.expect_slope) {
    const double s = outcomes.front().fits.front().fit.slope;
    const bool pass = std::fabs(s - *f.expect_slope) <= f.tolerance;
    criteria.push_back({{"name", "slope"}, {"expected", *f.expect_slope}, {"tolerance", f.tolerance}, {"observed", s},
                        {"passed", pass}});
    std::cout << (pass ? "PASS" : "FAIL") << " slope " << s << " vs " << *f.expect_slope << " +- " << f.tolerance
              << '\n';
    ok = ok && pass;
  }
  write_sweep_csv(out.file(name + ".csv"), hash, rows);
  nlohmann::json s{{"command", name},
                   {"config", config_json(c)},
                   {"config_hash", hash},
                   {"base_seed", c.base_seed},
                   {"results", results},
                   {"criteria", criteria},
                   {"wall_clock_seconds", seconds_since(t0)}};
  if (!extra.is_null()) s["extra"] = extra;
  write_json(out.file(name + "_summary.json"), s);
  return ok ? 0 : kExitViolation;
}

int sweep(const Flags& f, SweepKind kind) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig c = load(f);
  if (c.sweep_kind && *c.sweep_kind != kind)
    std::cerr << "warning: sweep.kind = " << to_string(*c.sweep_kind) << " is ignored by this subcommand\n";
  const auto dispatch = [&](SweepKind k, const auto& profile) -> SweepOutcome {
    const SweepConfig s = c.sweep(k);
    switch (k) {
      case SweepKind::consistency: return run_consistency_sweep(s, profile);
      case SweepKind::ell_consistency: return run_ell_consistency_sweep(s);
      case SweepKind::coupling: return run_coupling_sweep(s, profile);
      case SweepKind::kernel_norms: return run_kernel_norm_sweep(s, profile);
      case SweepKind::k1_l1: return run_k1_sweep(s, profile);
      case SweepKind::wasserstein: return run_wasserstein_sweep(s, profile);
      case SweepKind::collision_count: return run_collision_count_sweep(s);
    }
    throw InvalidArgument("unknown sweep kind");
  };
  const auto run = [&](SweepKind k) {
    return c.profile == ProfileKind::bump ? dispatch(k, BumpProfile{}) : dispatch(k, WendlandProfile{});
  };
  switch (kind) {
    case SweepKind::kernel_norms:
      return finish_sweep(f, c, "kernel_sweep", {run(SweepKind::kernel_norms), run(SweepKind::k1_l1)}, t0);
    case SweepKind::consistency: {
      const SweepKind k = f.ell ? SweepKind::ell_consistency : SweepKind::consistency;
      return finish_sweep(f, c, f.ell ? "ell_consistency_sweep" : "consistency_sweep", {run(k)}, t0);
    }
    case SweepKind::collision_count: {
      std::vector<CollisionPoint> report;
      auto o = run_collision_count_sweep(c.sweep(kind), &report);
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : report) {
        pts.push_back(
            {{"N", p.n}, {"bound", p.bound}, {"exceedance", p.exceedance}, {"median_max_count", p.median_count}});
        std::cout << "N " << p.n << ": median max count " << p.median_count << ", bound " << p.bound
                  << ", exceedance " << p.exceedance << '\n';
      }
      std::vector<SweepOutcome> v;
      v.push_back(std::move(o));
      return finish_sweep(f, c, "collision_sweep", v, t0, {{"per_n", pts}});
    }
    case SweepKind::coupling: return finish_sweep(f, c, "coupling_sweep", {run(kind)}, t0);
    case SweepKind::wasserstein: return finish_sweep(f, c, "wasserstein_sweep", {run(kind)}, t0);
    default: break;
  }
  throw InvalidArgument("unsupported sweep");
}

int selftest(std::uint64_t seed) {
  int failed = 0;
  for (const auto& r : run_selftest(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

int emit_plots(const Flags& f) {
  const RunConfig c = load(f);
  const OutputDir out(c.output_dir);
  int written = 0;
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(out.path()))
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  for (const auto& p : csvs) {
    const std::string name = p.filename().string();
    const std::string stem = p.stem().string();
    std::string script;
    if (name == "distance.csv") script = distance_plot_script(name);
    else if (name == "trajectory.csv") continue;
    else script = sweep_plot_script(name, stem, stem != "collision_sweep");
    std::ofstream(out.file(stem + ".gp"), std::ios::binary) << script;
    std::cout << "wrote " << (out.path() / (stem + ".gp")).string() << '\n';
    ++written;
  }
  if (written == 0) std::cerr << "no sweep CSVs in " << out.path() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized Vlasov-Poisson-Fokker-Planck particle system: simulations and rate checks"};
  app.require_subcommand(1);
  Flags f;
  long long selftest_seed = 0;

  auto add_common = [&](CLI::App* s) {
    s->add_option("-c,--config", f.config_path, "INI config file")->required()->check(CLI::ExistingFile);
    s->add_option("--seed", f.seed, "base seed (beats VPFP_SEED and the config)");
    s->add_option("--threads", f.threads, "worker threads (beats VPFP_THREADS and the config)");
    s->add_option("-o,--output-dir", f.output_dir, "output directory (beats output.dir)");
    s->add_flag("--allow-out-of-theorem-range", f.permissive, "warn instead of failing outside the theorem window");
    s->add_flag("--nondeterministic", f.nondeterministic, "drop the fixed reduction order");
  };
  auto add_expect = [&](CLI::App* s) {
    s->add_option("--expect-slope", f.expect_slope, "fail (exit 3) unless the first fitted slope is within tolerance");
    s->add_option("--tolerance", f.tolerance, "tolerance for --expect-slope")->capture_default_str();
  };

  auto* sim = app.add_subcommand("simulate", "run Phi, Psi and the reference ensemble; write trajectories");
  add_common(sim);
  auto* coupling = app.add_subcommand("coupling-sweep", "median max-distance against N");
  add_common(coupling);
  add_expect(coupling);
  auto* consistency = app.add_subcommand("consistency-sweep", "force residual at i.i.d. samples against N");
  add_common(consistency);
  add_expect(consistency);
  consistency->add_flag("--ell", f.ell, "use the majorant l^N instead of k^N");
  auto* kernel = app.add_subcommand("kernel-sweep", "kernel norms and the singular-part L1 norm against N");
  add_common(kernel);
  add_expect(kernel);
  auto* wass = app.add_subcommand("wasserstein-sweep", "W_p of the particle cloud against a reference draw");
  add_common(wass);
  add_expect(wass);
  auto* coll = app.add_subcommand("collision-sweep", "close-encounter counts against the bound");
  add_common(coll);
  auto* self = app.add_subcommand("selftest", "run the built-in oracle checks");
  self->add_option("--seed", selftest_seed, "seed for the randomized checks")->capture_default_str();
  auto* plots = app.add_subcommand("emit-plots", "write a gnuplot script for every CSV in the output directory");
  add_common(plots);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return simulate(f);
    if (*coupling) return sweep(f, SweepKind::coupling);
    if (*consistency) return sweep(f, SweepKind::consistency);
    if (*kernel) return sweep(f, SweepKind::kernel_norms);
    if (*wass) return sweep(f, SweepKind::wasserstein);
    if (*coll) return sweep(f, SweepKind::collision_count);
    if (*self) return selftest(static_cast<std::uint64_t>(selftest_seed));
    if (*plots) return emit_plots(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
