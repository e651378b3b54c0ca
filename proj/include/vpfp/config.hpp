#pragma once

// Run configuration: a flat INI dialect with sections [kernel], [density],
// [sim], [sweep] and [output].

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vpfp/dynamics.hpp"
#include "vpfp/errors.hpp"
#include "vpfp/experiments.hpp"
#include "vpfp/fields.hpp"
#include "vpfp/kernels.hpp"

namespace vpfp {

struct IniValue {
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;  // of the first value character
};

using IniSection = std::map<std::string, IniValue>;
using IniDocument = std::map<std::string, IniSection>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace detail

/// '#' and ';' start comments (at line start or after whitespace). Keys are
/// unique per section and must follow a section header.
inline IniDocument parse_ini(const std::string& text) {
  IniDocument doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    // strip comments
    std::string line = raw;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
        line.resize(i);
        break;
      }
    }
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '[') {
      const std::size_t close = line.find(']', first);
      if (close == std::string::npos) throw ParseError("section header is missing ']'", line_no, line.size() + 1);
      if (!detail::trim(line.substr(close + 1)).empty())
        throw ParseError("unexpected text after section header", line_no, close + 2);
      section = detail::trim(line.substr(first + 1, close - first - 1));
      if (!detail::valid_name(section)) throw ParseError("invalid section name", line_no, first + 2);
      doc[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no, first + 1);
    const std::string key = detail::trim(line.substr(0, eq));
    if (!detail::valid_name(key)) throw ParseError("invalid key name", line_no, first + 1);
    if (section.empty()) throw ParseError("key '" + key + "' appears before any section", line_no, first + 1);
    const std::size_t vstart = line.find_first_not_of(" \t", eq + 1);
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) throw ParseError("key '" + key + "' has an empty value", line_no, eq + 2);
    auto& sec = doc[section];
    if (sec.count(key)) throw ParseError("duplicate key '" + key + "' in [" + section + "]", line_no, first + 1);
    sec[key] = {value, line_no, vstart + 1};
  }
  return doc;
}

enum class ProfileKind { bump, wendland };

inline const char* to_string(ProfileKind p) { return p == ProfileKind::bump ? "bump" : "wendland"; }

struct RunConfig {
  KernelConfig kernel;  // n_particles holds the simulate N
  ProfileKind profile = ProfileKind::bump;
  std::string density_kind = "gaussian";
  double density_scale = 1.0;
  std::string velocity_kind = "truncated_gaussian";
  double velocity_scale = 1.0;
  double velocity_cutoff = NAN;  // default 4 * velocity_scale for the Gaussian
  SimParams sim;
  double reference_factor = 10.0;
  std::size_t snapshot_every = 0;

  std::optional<SweepKind> sweep_kind;
  std::vector<long long> n_values;
  std::size_t replications = 1;
  std::uint64_t base_seed = 0;
  double wasserstein_p = 2.0;
  bool wasserstein_at_start = false;
  double collision_dt_exponent = 0.09;

  std::string output_dir;
  unsigned threads = 1;
  bool deterministic = true;
  bool permissive = false;
  std::vector<std::string> warnings;

  DensityModel density() const {
    return density_kind == "gaussian" ? DensityModel::gaussian(density_scale) : DensityModel::uniform_ball(density_scale);
  }
  VelocityModel velocity() const {
    return velocity_kind == "truncated_gaussian" ? VelocityModel::truncated_gaussian(velocity_scale, velocity_cutoff)
                                                 : VelocityModel::uniform_ball(velocity_cutoff);
  }
  std::size_t reference_size() const {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(reference_factor * kernel.n())));
  }
  Exec exec() const { return {threads, deterministic}; }

  SweepConfig sweep(SweepKind kind) const {
    SweepConfig c;
    c.kind = kind;
    c.n_values = n_values;
    c.replications = replications;
    c.base_seed = base_seed;
    c.kernel = kernel;
    c.density = density();
    c.velocity = velocity();
    c.sim = sim;
    c.reference_factor = reference_factor;
    c.wasserstein_p = wasserstein_p;
    c.wasserstein_at_start = wasserstein_at_start;
    c.collision_dt_exponent = collision_dt_exponent;
    c.permissive = permissive;
    c.exec = exec();
    return c;
  }
};

namespace detail {

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class ConfigReader {
 public:
  explicit ConfigReader(const IniDocument& doc) : doc_(doc) {
    static const std::set<std::string> sections{"kernel", "density", "sim", "sweep", "output"};
    for (const auto& [name, sec] : doc_) {
      if (!sections.count(name)) {
        const std::size_t line = sec.empty() ? 0 : sec.begin()->second.line;
        throw ConfigError(name, "unknown section (line " + std::to_string(line) + ")");
      }
    }
  }

  /// Looks up section.key, also under an alias; at most one may be present.
  const IniValue* find(const std::string& section, const std::string& key, const std::string& alias = {}) {
    used_.insert(section + "." + key);
    if (!alias.empty()) used_.insert(section + "." + alias);
    auto s = doc_.find(section);
    if (s == doc_.end()) return nullptr;
    auto a = s->second.find(key);
    auto b = alias.empty() ? s->second.end() : s->second.find(alias);
    if (a != s->second.end() && b != s->second.end())
      throw ConfigError(section + "." + key, "given twice (also as '" + alias + "')");
    if (a != s->second.end()) return &a->second;
    if (b != s->second.end()) return &b->second;
    return nullptr;
  }

  double real(const std::string& section, const std::string& key, double fallback, const std::string& alias = {}) {
    const IniValue* v = find(section, key, alias);
    return v ? parse_real(section + "." + key, v->text) : fallback;
  }

  long long integer(const std::string& section, const std::string& key, long long fallback) {
    const IniValue* v = find(section, key);
    return v ? parse_integer(section + "." + key, v->text) : fallback;
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
    const IniValue* v = find(section, key);
    return v ? v->text : fallback;
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) {
    const IniValue* v = find(section, key);
    if (!v) return fallback;
    if (v->text == "true" || v->text == "1" || v->text == "yes") return true;
    if (v->text == "false" || v->text == "0" || v->text == "no") return false;
    throw ConfigError(section + "." + key, "expected true or false, got '" + v->text + "'");
  }

  void reject_unused() const {
    for (const auto& [name, sec] : doc_)
      for (const auto& [key, val] : sec)
        if (!used_.count(name + "." + key))
          throw ConfigError(name + "." + key, "unknown key (line " + std::to_string(val.line) + ")");
  }

  static double parse_real(const std::string& key, const std::string& s) {
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(x))
      throw ConfigError(key, "expected a finite number, got '" + s + "'");
    return x;
  }

  static long long parse_integer(const std::string& key, const std::string& s) {
    char* end = nullptr;
    const long long x = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw ConfigError(key, "expected an integer, got '" + s + "'");
    return x;
  }

 private:
  const IniDocument& doc_;
  std::set<std::string> used_;
};

inline std::vector<long long> parse_n_list(const std::string& key, const std::string& s) {
  std::vector<long long> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ConfigReader::parse_integer(key, trim(item)));
  return out;
}

}  // namespace detail

/// Parses and validates. Defaults: delta = 1/3, lambda2 = 0.30, sigma = 0.5,
/// dt = 1e-3 T, M = 10 N. With permissive set, leaving the theorem windows for
/// delta and lambda2 produces warnings instead of errors.
inline RunConfig parse_config(const std::string& text, bool permissive = false) {
  const IniDocument doc = parse_ini(text);
  detail::ConfigReader r(doc);
  RunConfig c;
  c.permissive = permissive;

  c.kernel.strength = r.real("kernel", "strength", 1.0);
  c.kernel.cutoff_exponent = r.real("kernel", "cutoff_exponent", 1.0 / 3, "delta");
  c.kernel.wide_cutoff_exponent = r.real("kernel", "wide_cutoff_exponent", 0.30, "lambda2");
  const std::string profile = r.text("kernel", "profile", "bump");
  if (profile == "bump") c.profile = ProfileKind::bump;
  else if (profile == "wendland") c.profile = ProfileKind::wendland;
  else throw ConfigError("kernel.profile", "expected bump or wendland, got '" + profile + "'");

  c.density_kind = r.text("density", "kind", "gaussian");
  if (c.density_kind != "gaussian" && c.density_kind != "uniform_ball")
    throw ConfigError("density.kind", "expected gaussian or uniform_ball, got '" + c.density_kind + "'");
  c.density_scale = r.real("density", "scale", 1.0);
  if (!(c.density_scale > 0.0)) throw ConfigError("density.scale", "must be positive");
  c.velocity_kind = r.text("density", "velocity", "truncated_gaussian");
  if (c.velocity_kind != "truncated_gaussian" && c.velocity_kind != "uniform_ball")
    throw ConfigError("density.velocity", "expected truncated_gaussian or uniform_ball, got '" + c.velocity_kind + "'");
  c.velocity_scale = r.real("density", "velocity_scale", 1.0);
  if (!(c.velocity_scale > 0.0)) throw ConfigError("density.velocity_scale", "must be positive");
  c.velocity_cutoff = r.real("density", "velocity_cutoff",
                             c.velocity_kind == "truncated_gaussian" ? 4.0 * c.velocity_scale : c.velocity_scale);
  if (!(c.velocity_cutoff > 0.0)) throw ConfigError("density.velocity_cutoff", "must be positive");

  const IniValue* horizon = r.find("sim", "horizon");
  if (!horizon) throw ConfigError("sim.horizon", "required key is missing");
  c.sim.horizon = detail::ConfigReader::parse_real("sim.horizon", horizon->text);
  if (!(c.sim.horizon > 0.0)) throw ConfigError("sim.horizon", "must be positive");
  c.sim.dt = r.real("sim", "dt", 1e-3 * c.sim.horizon);
  if (!(c.sim.dt > 0.0) || c.sim.dt > c.sim.horizon) throw ConfigError("sim.dt", "must lie in (0, horizon]");
  c.sim.sigma = r.real("sim", "sigma", 0.5);
  if (!(c.sim.sigma >= 0.0)) throw ConfigError("sim.sigma", "must be >= 0");
  const long long n = r.integer("sim", "n_particles", 1024);
  if (n < 2) throw ConfigError("sim.n_particles", "must be >= 2");
  c.kernel.n_particles = n;
  c.reference_factor = r.real("sim", "reference_factor", 10.0);
  if (!(c.reference_factor > 0.0)) throw ConfigError("sim.reference_factor", "must be positive");
  const long long seed = r.integer("sim", "seed", 0);
  if (seed < 0) throw ConfigError("sim.seed", "must be >= 0");
  c.sim.seed = static_cast<std::uint64_t>(seed);
  const long long rec = r.integer("sim", "record_every", 10);
  if (rec < 1) throw ConfigError("sim.record_every", "must be >= 1");
  c.sim.record_every = static_cast<std::size_t>(rec);
  const long long snap = r.integer("sim", "snapshot_every", 0);
  if (snap < 0) throw ConfigError("sim.snapshot_every", "must be >= 0");
  c.snapshot_every = static_cast<std::size_t>(snap);
  const std::string integ = r.text("sim", "integrator", "euler_maruyama");
  if (integ == "euler_maruyama") c.sim.integrator = Integrator::euler_maruyama;
  else if (integ == "kick_drift") c.sim.integrator = Integrator::kick_drift;
  else throw ConfigError("sim.integrator", "expected euler_maruyama or kick_drift, got '" + integ + "'");

  if (const IniValue* k = r.find("sweep", "kind")) {
    try {
      c.sweep_kind = sweep_kind_from_string(k->text);
    } catch (const InvalidArgument& e) {
      throw ConfigError("sweep.kind", e.what());
    }
  }
  if (const IniValue* v = r.find("sweep", "n_values")) {
    c.n_values = detail::parse_n_list("sweep.n_values", v->text);
    for (std::size_t i = 0; i < c.n_values.size(); ++i) {
      if (c.n_values[i] < 2) throw ConfigError("sweep.n_values", "every N must be >= 2");
      if (i > 0 && c.n_values[i] <= c.n_values[i - 1])
        throw ConfigError("sweep.n_values", "must be strictly increasing");
    }
  }
  const long long reps = r.integer("sweep", "replications", 1);
  if (reps < 1) throw ConfigError("sweep.replications", "must be >= 1");
  c.replications = static_cast<std::size_t>(reps);
  const long long base = r.integer("sweep", "base_seed", seed);
  if (base < 0) throw ConfigError("sweep.base_seed", "must be >= 0");
  c.base_seed = static_cast<std::uint64_t>(base);
  c.wasserstein_p = r.real("sweep", "wasserstein_p", 2.0);
  if (!(c.wasserstein_p >= 1.0)) throw ConfigError("sweep.wasserstein_p", "must be >= 1");
  c.wasserstein_at_start = r.boolean("sweep", "wasserstein_at_start", false);
  c.collision_dt_exponent = r.real("sweep", "collision_dt_exponent", 0.09);

  const IniValue* dir = r.find("output", "dir");
  if (!dir) throw ConfigError("output.dir", "required key is missing");
  c.output_dir = dir->text;
  const long long threads = r.integer("output", "threads", 1);
  if (threads < 1) throw ConfigError("output.threads", "must be >= 1");
  c.threads = static_cast<unsigned>(threads);
  c.deterministic = r.boolean("output", "deterministic", true);

  r.reject_unused();

  // Theorem windows: hard errors unless permissive.
  const auto strict = c.kernel.violations(false);
  const auto loose = c.kernel.violations(true);
  auto key_of = [](const std::string& msg) {
    return std::string("kernel.") + msg.substr(0, msg.find(' '));
  };
  if (!loose.empty()) throw ConfigError(key_of(loose.front()), loose.front());
  if (!strict.empty()) {
    if (!permissive) {
      const std::string key = key_of(strict.front());
      const double value = key == "kernel.cutoff_exponent" ? c.kernel.cutoff_exponent : c.kernel.wide_cutoff_exponent;
      throw ConfigError(key, detail::format_real(value) + ": " + strict.front());
    }
    for (const auto& s : strict) c.warnings.push_back(s + " (outside the theorem range, continuing)");
  }
  return c;
}

/// Environment overrides: VPFP_SEED sets both seeds, VPFP_THREADS the pool size.
inline void apply_environment(RunConfig& c) {
  if (const char* s = std::getenv("VPFP_SEED")) {
    const long long v = detail::ConfigReader::parse_integer("VPFP_SEED", s);
    if (v < 0) throw ConfigError("VPFP_SEED", "must be >= 0");
    c.sim.seed = c.base_seed = static_cast<std::uint64_t>(v);
  }
  if (const char* s = std::getenv("VPFP_THREADS")) {
    const long long v = detail::ConfigReader::parse_integer("VPFP_THREADS", s);
    if (v < 1) throw ConfigError("VPFP_THREADS", "must be >= 1");
    c.threads = static_cast<unsigned>(v);
  }
}

/// Resolved settings that determine results, as sorted "section.key" -> text.
inline std::map<std::string, std::string> resolved_entries(const RunConfig& c) {
  using detail::format_real;
  std::map<std::string, std::string> m;
  m["kernel.strength"] = format_real(c.kernel.strength);
  m["kernel.cutoff_exponent"] = format_real(c.kernel.cutoff_exponent);
  m["kernel.wide_cutoff_exponent"] = format_real(c.kernel.wide_cutoff_exponent);
  m["kernel.profile"] = to_string(c.profile);
  m["density.kind"] = c.density_kind;
  m["density.scale"] = format_real(c.density_scale);
  m["density.velocity"] = c.velocity_kind;
  m["density.velocity_scale"] = format_real(c.velocity_scale);
  m["density.velocity_cutoff"] = format_real(c.velocity_cutoff);
  m["sim.horizon"] = format_real(c.sim.horizon);
  m["sim.dt"] = format_real(c.sim.dt);
  m["sim.sigma"] = format_real(c.sim.sigma);
  m["sim.n_particles"] = std::to_string(c.kernel.n_particles);
  m["sim.reference_factor"] = format_real(c.reference_factor);
  m["sim.seed"] = std::to_string(c.sim.seed);
  m["sim.record_every"] = std::to_string(c.sim.record_every);
  m["sim.snapshot_every"] = std::to_string(c.snapshot_every);
  m["sim.integrator"] = c.sim.integrator == Integrator::euler_maruyama ? "euler_maruyama" : "kick_drift";
  m["sweep.kind"] = c.sweep_kind ? to_string(*c.sweep_kind) : "";
  std::string ns;
  for (std::size_t i = 0; i < c.n_values.size(); ++i) ns += (i ? "," : "") + std::to_string(c.n_values[i]);
  m["sweep.n_values"] = ns;
  m["sweep.replications"] = std::to_string(c.replications);
  m["sweep.base_seed"] = std::to_string(c.base_seed);
  m["sweep.wasserstein_p"] = format_real(c.wasserstein_p);
  m["sweep.wasserstein_at_start"] = c.wasserstein_at_start ? "true" : "false";
  m["sweep.collision_dt_exponent"] = format_real(c.collision_dt_exponent);
  m["output.deterministic"] = c.deterministic ? "true" : "false";
  m["permissive"] = c.permissive ? "true" : "false";
  return m;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Hash of the resolved settings. The output directory and thread count are
/// left out: in deterministic mode neither can change any output byte.
inline std::string config_hash(const RunConfig& c) {
  std::string canon;
  for (const auto& [k, v] : resolved_entries(c)) canon += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(canon));
  return buf;
}

}  // namespace vpfp
