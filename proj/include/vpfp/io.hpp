#pragma once

// CSV and JSON output confined to one directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpfp/dynamics.hpp"
#include "vpfp/errors.hpp"
#include "vpfp/experiments.hpp"

namespace vpfp {

/// 17 significant digits in scientific notation: round-trips any double.
inline std::string csv_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

/// Resolves a bare file name inside dir. Names with separators or dot
/// components are refused, so nothing lands outside the directory.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw InvalidArgument("output directory is empty");
    std::filesystem::create_directories(dir_);
    const auto probe = dir_ / ".vpfp-write-probe";
    {
      std::ofstream f(probe);
      if (!f) throw Error("output directory is not writable: " + dir_.string());
    }
    std::filesystem::remove(probe);
  }

  std::filesystem::path file(const std::string& name) const {
    if (name.empty() || name == "." || name == ".." || name.find('/') != std::string::npos ||
        name.find('\\') != std::string::npos)
      throw InvalidArgument("output file name must be a bare name: '" + name + "'");
    return dir_ / name;
  }

  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// First line "# config_hash=<hash>", then the column header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& hash, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path.string());
    out_ << "# config_hash=" << hash << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double x) { return csv_real(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I i) {
    return std::to_string(i);
  }

  std::ofstream out_;
};

inline void write_sweep_csv(const std::filesystem::path& path, const std::string& hash,
                            const std::vector<SweepRow>& rows) {
  CsvWriter w(path, hash, {"sweep_kind", "N", "seed", "value", "stderr"});
  for (const auto& r : rows) w.row(r.kind, r.n, r.seed, r.value, r.std_error);
}

/// One row per particle per snapshot; ensemble is phi, psi or reference.
inline void write_trajectory_csv(const std::filesystem::path& path, const std::string& hash,
                                 const TrajectoryRecord& rec) {
  CsvWriter w(path, hash, {"time", "particle", "x1", "x2", "x3", "v1", "v2", "v3", "ensemble"});
  auto dump = [&](double t, const PhaseState& s, const char* name) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Vec3 &x = s.positions[i], &v = s.velocities[i];
      w.row(t, i, x.x, x.y, x.z, v.x, v.y, v.z, name);
    }
  };
  for (const auto& snap : rec.snapshots) {
    dump(snap.time, snap.phi, "phi");
    dump(snap.time, snap.psi, "psi");
    dump(snap.time, snap.reference, "reference");
  }
}

inline void write_distance_csv(const std::filesystem::path& path, const std::string& hash,
                               const TrajectoryRecord& rec) {
  CsvWriter w(path, hash, {"time", "distance", "running_max"});
  for (std::size_t k = 0; k < rec.times.size(); ++k) w.row(rec.times[k], rec.distances[k], rec.running_max[k]);
}

inline nlohmann::json to_json(const RateFitResult& f) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : f.per_point) pts.push_back({{"N", p.n}, {"median", p.median}, {"spread", p.spread}});
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"slope_stderr", f.slope_stderr},
          {"r_squared", f.r_squared},
          {"per_point", pts}};
}

inline nlohmann::json to_json(const SweepOutcome& o) {
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : o.fits) {
    auto j = to_json(f.fit);
    j["name"] = f.name;
    j["divided_by_log_n"] = f.divided_by_log;
    fits.push_back(j);
  }
  return {{"kind", to_string(o.kind)}, {"fits", fits}, {"verdict", o.verdict}, {"passed", o.passed}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

/// Gnuplot script for a sweep CSV. Power-law quantities get log-log axes.
inline std::string sweep_plot_script(const std::string& csv_name, const std::string& title, bool loglog) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set datafile commentschars '#'\n"
    << "set key autotitle columnhead\n"
    << "set title '" << title << "'\n"
    << "set xlabel 'N'\nset ylabel 'value'\n";
  if (loglog) s << "set logscale xy\n";
  s << "set terminal pngcairo size 900,600\n"
    << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
    << "plot '" << csv_name << "' using 2:4 with points pt 7 title 'replications'\n";
  return s.str();
}

inline std::string distance_plot_script(const std::string& csv_name) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set datafile commentschars '#'\n"
    << "set title 'coupling distance'\n"
    << "set xlabel 't'\nset ylabel 'distance'\n"
    << "set terminal pngcairo size 900,600\n"
    << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
    << "plot '" << csv_name << "' using 1:2 with lines title 'distance', '' using 1:3 with lines title 'running max'\n";
  return s.str();
}

}  // namespace vpfp
