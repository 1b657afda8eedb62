#pragma once

#include <json.hpp>

#include <chrono>
#include <complex>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "npc/config.hpp"
#include "npc/errors.hpp"
#include "npc/grid.hpp"
#include "npc/propagation.hpp"

namespace npc {

namespace fs = std::filesystem;

inline constexpr const char* version_string = "0.1.0";

/// Whitespace-separated columns with a '#' header; comment lines first.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw Error("table: row width does not match the header");
    rows.push_back(std::move(row));
  }
};

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string format_table(const Table& t) {
  std::ostringstream os;
  for (const auto& c : t.comments) os << "# " << c << "\n";
  os << "#";
  for (const auto& c : t.columns) os << " " << c;
  os << "\n" << std::setprecision(10);
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? " " : "") << r[i];
    os << "\n";
  }
  return os.str();
}

inline void write_table(const fs::path& path, const Table& t) { write_text(path, format_table(t)); }

inline Table read_table(const fs::path& path) {
  std::istringstream in(read_text(path));
  Table t;
  std::string line;
  std::vector<std::string> header_lines;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      header_lines.push_back(line.substr(1));
      continue;
    }
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    t.rows.push_back(row);
  }
  if (!header_lines.empty()) {
    std::istringstream hs(header_lines.back());
    std::string c;
    while (hs >> c) t.columns.push_back(c);
    for (std::size_t i = 0; i + 1 < header_lines.size(); ++i) {
      std::string s = header_lines[i];
      if (!s.empty() && s[0] == ' ') s.erase(0, 1);
      t.comments.push_back(s);
    }
  }
  return t;
}

struct Axis {
  std::string name;
  std::string unit;
  std::size_t size;
  double spacing;
};

/// Axes of a spectral array on a grid, in storage order.
inline std::vector<Axis> spectral_axes(const GridSpec& g) {
  return {{"qx", "1/um", g.nx, g.dqx()}, {"qy", "1/um", g.ny, g.dqy()}, {"omega", "rad/ps", g.nt, -g.domega()}};
}

/// Row-major binary array plus a JSON sidecar (<path>.json) describing it.
template <class T>
void write_array(const fs::path& path, const std::vector<T>& data, const std::vector<Axis>& axes,
                 const json& extra = json::object()) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size;
  if (n != data.size()) throw Error("write_array: data size does not match the axes");
  std::string dtype;
  if constexpr (std::is_same_v<T, double>)
    dtype = "float64";
  else if constexpr (std::is_same_v<T, std::complex<float>>)
    dtype = "complex64";
  else if constexpr (std::is_same_v<T, std::uint8_t>)
    dtype = "uint8";
  else
    static_assert(sizeof(T) == 0, "unsupported array type");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(T)));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  json meta = extra;
  meta["dtype"] = dtype;
  meta["byte_order"] = "little";
  meta["layout"] = "row-major";
  json ax = json::array();
  for (const auto& a : axes) ax.push_back({{"name", a.name}, {"unit", a.unit}, {"size", a.size}, {"spacing", a.spacing}});
  meta["axes"] = ax;
  write_text(path.string() + ".json", meta.dump(2) + "\n");
}

template <class T>
std::vector<T> read_array(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  const auto bytes = std::size_t(in.tellg());
  if (bytes != expected * sizeof(T))
    throw IoError("'" + path.string() + "' has " + std::to_string(bytes) + " bytes, expected " +
                  std::to_string(expected * sizeof(T)));
  in.seekg(0);
  std::vector<T> v(expected);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(bytes));
  if (!in) throw IoError("read failed for '" + path.string() + "'");
  return v;
}

/// Record of one CLI run: every file it wrote, the config hash and seed.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;  // relative to the manifest directory
  double wall_seconds = 0;
  double step_ms = 0;
  json config;

  json to_json() const {
    return {{"command", command},   {"config_hash", config_hash}, {"seed", seed},
            {"version", version_string}, {"outputs", outputs},    {"wall_seconds", wall_seconds},
            {"step_ms", step_ms},   {"config", config}};
  }
};

inline void write_manifest(const fs::path& dir, const RunManifest& m) {
  write_text(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

inline RunManifest read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw IoError("'" + dir.string() + "' is not a run directory (no manifest.json)");
  json j;
  try {
    j = json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw IoError("'" + p.string() + "': " + e.what());
  }
  RunManifest m;
  m.command = j.value("command", "");
  m.config_hash = j.value("config_hash", "");
  m.seed = j.value("seed", std::uint64_t(0));
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.wall_seconds = j.value("wall_seconds", 0.0);
  m.step_ms = j.value("step_ms", 0.0);
  m.config = j.value("config", json::object());
  return m;
}

namespace detail {
inline std::string snapshot_name(std::size_t k, const char* what) {
  std::ostringstream os;
  os << "snapshot_" << std::setw(3) << std::setfill('0') << k << "_" << what << ".bin";
  return os.str();
}
}  // namespace detail

/// Writes an ensemble into `dir`: per-snapshot Σ|A|² and Σ|A|⁴ over trajectories
/// (float64), the simulated band (uint8), the per-step log and a manifest.
inline RunManifest save_run(const fs::path& dir, const RunConfig& cfg, const EnsembleResult& r) {
  ensure_dir(dir);
  RunManifest m;
  m.command = "simulate";
  m.config = to_json(cfg);
  m.config_hash = config_hash(cfg);
  m.seed = r.seed;
  m.wall_seconds = r.wall_seconds;
  m.step_ms = r.steps.size() > 1 ? 1e3 * r.wall_seconds /
                                       (double(r.steps.size() - 1) * double(r.n_trajectories))
                                 : 0.0;
  const json extra = {{"config_hash", m.config_hash}, {"seed", r.seed}, {"trajectories", r.n_trajectories}};
  const auto axes = spectral_axes(r.grid);
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    json e = extra;
    e["z_um"] = r.snapshots[k].z_um;
    e["quantity"] = "sum over trajectories of |A_s|^2";
    write_array(dir / detail::snapshot_name(k, "abs2"), r.snapshots[k].sum_abs2, axes, e);
    e["quantity"] = "sum over trajectories of |A_s|^4";
    write_array(dir / detail::snapshot_name(k, "abs4"), r.snapshots[k].sum_abs4, axes, e);
    for (const char* w : {"abs2", "abs4"}) {
      m.outputs.push_back(detail::snapshot_name(k, w));
      m.outputs.push_back(detail::snapshot_name(k, w) + ".json");
    }
  }
  json be = extra;
  be["quantity"] = "1 where the signal mode is simulated";
  write_array(dir / "band.bin", r.band, axes, be);
  m.outputs.push_back("band.bin");
  m.outputs.push_back("band.bin.json");

  Table steps;
  steps.comments = {"per-step ensemble means; photons include the vacuum 1/2 per mode",
                    "config_hash " + m.config_hash + " seed " + std::to_string(r.seed)};
  steps.columns = {"z_mm", "signal_photons", "filtered_photons", "pump_change", "pump_fraction"};
  for (const auto& s : r.steps)
    steps.add({s.z_um * 1e-3, s.signal_photons, s.filtered_photons, s.pump_change,
               r.pump_photons > 0 ? 1.0 + s.pump_change / r.pump_photons : 1.0});
  write_table(dir / "steps.txt", steps);
  m.outputs.push_back("steps.txt");

  Table traj;
  traj.columns = {"trajectory", "manley_rowe_drift", "depletion_fraction"};
  for (const auto& t : r.trajectories) traj.add({double(t.index), t.manley_rowe_drift, t.depletion_fraction});
  write_table(dir / "trajectories.txt", traj);
  m.outputs.push_back("trajectories.txt");

  json summary = {{"n_trajectories", r.n_trajectories},
                  {"seed", r.seed},
                  {"chi", r.chi},
                  {"g1", {r.gains.g1.real(), r.gains.g1.imag()}},
                  {"g2", {r.gains.g2.real(), r.gains.g2.imag()}},
                  {"gbar", r.gains.gbar},
                  {"q0p", r.q0p},
                  {"Gx", r.Gx},
                  {"length_mm", r.length_mm},
                  {"dz_um", r.grid.dz_um},
                  {"frozen_pump", r.frozen_pump},
                  {"pump_photons", r.pump_photons},
                  {"delta_ref", r.delta_ref},
                  {"evanescent_modes", r.evanescent_modes},
                  {"out_of_window_modes", r.out_of_window_modes},
                  {"max_manley_rowe_drift", r.max_manley_rowe_drift()},
                  {"depletion_fraction", r.depletion_fraction()}};
  json z = json::array();
  for (const auto& s : r.snapshots) z.push_back(s.z_um);
  summary["snapshot_z_um"] = z;
  write_text(dir / "result.json", summary.dump(2) + "\n");
  m.outputs.push_back("result.json");
  write_manifest(dir, m);
  return m;
}

/// Reads back a run written by save_run, with its config.
inline std::pair<RunConfig, EnsembleResult> load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("run directory '" + dir.string() + "' does not exist");
  const RunManifest m = read_manifest(dir);
  RunConfig cfg = parse_config(m.config);
  json s;
  try {
    s = json::parse(read_text(dir / "result.json"));
  } catch (const json::exception& e) {
    throw IoError("'" + (dir / "result.json").string() + "': " + e.what());
  }
  EnsembleResult r;
  r.grid = cfg.simulation.grid;
  r.grid.dz_um = s.at("dz_um").get<double>();
  r.n_trajectories = s.at("n_trajectories").get<std::size_t>();
  r.seed = s.at("seed").get<std::uint64_t>();
  r.chi = s.at("chi").get<double>();
  const auto g1 = s.at("g1"), g2 = s.at("g2");
  r.gains = GainParameters{cplx(g1[0].get<double>(), g1[1].get<double>()),
                           cplx(g2[0].get<double>(), g2[1].get<double>()), s.at("gbar").get<double>(),
                           cplx(0, 0)};
  if (std::abs(r.gains.g1) > 0) r.gains.r = r.gains.g2 / r.gains.g1;
  r.q0p = s.at("q0p").get<double>();
  r.Gx = s.at("Gx").get<double>();
  r.length_mm = s.at("length_mm").get<double>();
  r.frozen_pump = s.at("frozen_pump").get<bool>();
  r.pump_photons = s.at("pump_photons").get<double>();
  r.delta_ref = s.at("delta_ref").get<double>();
  const std::size_t n = r.grid.size();
  r.band = read_array<std::uint8_t>(dir / "band.bin", n);
  const auto zs = s.at("snapshot_z_um").get<std::vector<double>>();
  for (std::size_t k = 0; k < zs.size(); ++k) {
    Snapshot snap;
    snap.z_um = zs[k];
    snap.sum_abs2 = read_array<double>(dir / detail::snapshot_name(k, "abs2"), n);
    snap.sum_abs4 = read_array<double>(dir / detail::snapshot_name(k, "abs4"), n);
    r.snapshots.push_back(std::move(snap));
  }
  const Table steps = read_table(dir / "steps.txt");
  for (const auto& row : steps.rows)
    if (row.size() >= 4) r.steps.push_back({row[0] * 1e3, row[1], row[2], row[3]});
  const Table traj = read_table(dir / "trajectories.txt");
  for (const auto& row : traj.rows)
    if (row.size() >= 3) r.trajectories.push_back({std::size_t(row[0]), row[1], row[2]});
  return {cfg, r};
}

}  // namespace npc
