#pragma once

#include <json.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "npc/constants.hpp"
#include "npc/errors.hpp"
#include "npc/grid.hpp"
#include "npc/medium.hpp"
#include "npc/propagation.hpp"

namespace npc {

using json = nlohmann::json;

/// Pump as written in a config: either ḡ with a ratio r, or explicit amplitudes.
struct PumpSpec {
  std::optional<double> gbar_per_mm = 0.4;
  double ratio_r_abs = 0;
  double ratio_r_phase_rad = 0;
  std::optional<std::pair<cplx, cplx>> amplitudes;
  bool q0p_resonant = true;
  double q0p_um_inv = 0;     // used when not resonant and q0p_over_Gx is unset
  std::optional<double> q0p_over_Gx;
  bool gaussian = false;
  double waist_x_um = 500;
  double waist_y_um = 200;

  cplx ratio() const { return std::polar(ratio_r_abs, ratio_r_phase_rad); }
  double q0p(double Gx) const {
    if (q0p_resonant) return Gx;
    if (q0p_over_Gx) return *q0p_over_Gx * Gx;
    return q0p_um_inv;
  }
  PumpProfile profile() const {
    if (gaussian) return Gaussian{waist_x_um, waist_y_um};
    return PlaneWave{};
  }
  PumpConfig build(const Medium& medium) const {
    const double q0p = this->q0p(medium.Gx());
    if (amplitudes) return PumpConfig(amplitudes->first, amplitudes->second, q0p, profile());
    return PumpConfig::from_gain(*gbar_per_mm, ratio(), q0p, coupling_constant(medium), profile());
  }
};

struct SimulationSpec {
  std::string preset;  // "", "desk" or "paper"
  GridSpec grid{0, 0, 0, 0, 0, 0, 40};
  std::size_t trajectories = 16;
  std::uint64_t seed = 1;
  std::vector<double> snapshots_z_mm;  // empty: 21 evenly spaced over the crystal
  bool frozen_pump = false;
  bool dealias = true;
};

struct QpmSpec {
  std::size_t omega_points = 128;
  std::size_t angle_points = 256;
  double omega_max = 0;  // rad/ps; 0: 2π × 5 THz
  double tolerance = 1e-6;

  double omega_limit() const { return omega_max > 0 ? omega_max : units::two_pi * 5.0; }
};

struct RunConfig {
  CrystalSpec crystal;
  bool poling_resonant = false;
  PumpSpec pump;
  SimulationSpec simulation;
  QpmSpec qpm;
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json& require(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key) + ": required field missing");
  return *it;
}

template <class T>
T as(const json& v, const std::string& field) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field + ": wrong type (got " + std::string(v.type_name()) + ")");
  }
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field + ": expected a number, got " + std::string(v.type_name()));
  return v.get<double>();
}

template <class T>
void optional_field(const json& j, const std::string& path, const std::string& key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_same_v<T, double>)
    out = number(*it, join(path, key));
  else
    out = as<T>(*it, join(path, key));
}

inline cplx complex_value(const json& v, const std::string& field) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(field + ": expected a number or [re, im]");
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline DispersionModel parse_sellmeier(const json& s, const std::string& path) {
  SellmeierCoefficients c;
  const json& a = require(s, path, "a");
  const json& b = require(s, path, "b");
  if (!a.is_array() || a.size() != 6) throw ConfigError(join(path, "a") + ": expected 6 numbers");
  if (!b.is_array() || b.size() != 4) throw ConfigError(join(path, "b") + ": expected 4 numbers");
  for (std::size_t i = 0; i < 6; ++i) c.a[i] = number(a[i], join(path, "a"));
  for (std::size_t i = 0; i < 4; ++i) c.b[i] = number(b[i], join(path, "b"));
  optional_field(s, path, "t_ref_C", c.t_ref_C);
  double lmin = 0.4, lmax = 4.0, tmin = 20, tmax = 250;
  std::string name = "custom";
  optional_field(s, path, "lambda_min_um", lmin);
  optional_field(s, path, "lambda_max_um", lmax);
  optional_field(s, path, "t_min_C", tmin);
  optional_field(s, path, "t_max_C", tmax);
  optional_field(s, path, "name", name);
  return DispersionModel(c, lmin, lmax, tmin, tmax, name);
}

}  // namespace detail

/// Parses a config document. Errors name the offending field.
inline RunConfig parse_config(const json& root) {
  using namespace detail;
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig cfg;

  const json& cr = require(root, "", "crystal");
  cfg.crystal.dispersion = parse_sellmeier(require(cr, "crystal", "sellmeier"), "crystal.sellmeier");
  optional_field(cr, "crystal", "length_mm", cfg.crystal.length_mm);
  optional_field(cr, "crystal", "temperature_C", cfg.crystal.temperature_C);
  optional_field(cr, "crystal", "d01_over_deff", cfg.crystal.d01_over_deff);
  optional_field(cr, "crystal", "deff_pm_per_V", cfg.crystal.deff_pm_per_V);
  optional_field(cr, "crystal", "pump_wavelength_um", cfg.crystal.pump_wavelength_um);
  if (auto it = cr.find("poling_period_um"); it != cr.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "resonant")
        throw ConfigError("crystal.poling_period_um: expected a number or \"resonant\"");
      cfg.poling_resonant = true;
    } else {
      cfg.crystal.poling_period_um = number(*it, "crystal.poling_period_um");
    }
  } else {
    cfg.poling_resonant = true;
  }
  if (cfg.poling_resonant)
    cfg.crystal.poling_period_um = solve_poling_period(
        cfg.crystal.dispersion, cfg.crystal.temperature_C, cfg.crystal.pump_wavelength_um);
  cfg.crystal.validate();

  const json& pj = require(root, "", "pump");
  auto& p = cfg.pump;
  if (auto it = pj.find("amplitudes"); it != pj.end()) {
    p.amplitudes = std::make_pair(complex_value(require(*it, "pump.amplitudes", "alpha1"), "pump.amplitudes.alpha1"),
                                  complex_value(require(*it, "pump.amplitudes", "alpha2"), "pump.amplitudes.alpha2"));
    p.gbar_per_mm.reset();
  } else {
    p.gbar_per_mm = number(require(pj, "pump", "gbar_per_mm"), "pump.gbar_per_mm");
    if (!(*p.gbar_per_mm > 0)) throw ConfigError("pump.gbar_per_mm: must be > 0");
  }
  optional_field(pj, "pump", "ratio_r_abs", p.ratio_r_abs);
  optional_field(pj, "pump", "ratio_r_phase_rad", p.ratio_r_phase_rad);
  if (p.ratio_r_abs < 0 || p.ratio_r_abs > 1) throw ConfigError("pump.ratio_r_abs: must lie in [0, 1]");
  if (auto it = pj.find("q0p_um_inv"); it != pj.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "resonant")
        throw ConfigError("pump.q0p_um_inv: expected a number or \"resonant\"");
      p.q0p_resonant = true;
    } else {
      p.q0p_resonant = false;
      p.q0p_um_inv = number(*it, "pump.q0p_um_inv");
    }
  }
  if (auto it = pj.find("q0p_over_Gx"); it != pj.end()) {
    p.q0p_resonant = false;
    p.q0p_over_Gx = number(*it, "pump.q0p_over_Gx");
  }
  std::string profile = "plane";
  optional_field(pj, "pump", "profile", profile);
  if (profile == "gaussian") {
    p.gaussian = true;
    p.waist_x_um = number(require(pj, "pump", "waist_x_um"), "pump.waist_x_um");
    p.waist_y_um = number(require(pj, "pump", "waist_y_um"), "pump.waist_y_um");
  } else if (profile != "plane") {
    throw ConfigError("pump.profile: expected \"plane\" or \"gaussian\"");
  }

  if (auto it = root.find("simulation"); it != root.end()) {
    const json& s = *it;
    auto& sim = cfg.simulation;
    optional_field(s, "simulation", "preset", sim.preset);
    optional_field(s, "simulation", "nx", sim.grid.nx);
    optional_field(s, "simulation", "ny", sim.grid.ny);
    optional_field(s, "simulation", "nt", sim.grid.nt);
    optional_field(s, "simulation", "Lx_um", sim.grid.Lx_um);
    // Alternative to Lx_um: q_x spacing G_x / x_cells_per_Gx, so that G_x sits on the grid.
    if (auto c = s.find("x_cells_per_Gx"); c != s.end())
      sim.grid.Lx_um = units::two_pi * number(*c, "simulation.x_cells_per_Gx") / cfg.crystal.Gx();
    optional_field(s, "simulation", "Ly_um", sim.grid.Ly_um);
    optional_field(s, "simulation", "T_ps", sim.grid.T_ps);
    optional_field(s, "simulation", "dz_um", sim.grid.dz_um);
    optional_field(s, "simulation", "trajectories", sim.trajectories);
    optional_field(s, "simulation", "seed", sim.seed);
    optional_field(s, "simulation", "snapshots_z_mm", sim.snapshots_z_mm);
    optional_field(s, "simulation", "frozen_pump", sim.frozen_pump);
    optional_field(s, "simulation", "dealias", sim.dealias);
  }
  if (auto it = root.find("qpm"); it != root.end()) {
    optional_field(*it, "qpm", "omega_points", cfg.qpm.omega_points);
    optional_field(*it, "qpm", "angle_points", cfg.qpm.angle_points);
    optional_field(*it, "qpm", "omega_max", cfg.qpm.omega_max);
    optional_field(*it, "qpm", "tolerance", cfg.qpm.tolerance);
  }
  return cfg;
}

/// Parses config text; syntax errors report the line.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config") {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << detail::line_of(text, e.byte) << ": syntax error: " << e.what();
    throw ConfigError(os.str());
  }
  try {
    return parse_config(root);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Grid presets. `desk`: 128×64×64 with q_x spacing G_x/16 and the Ω spacing matched
/// to it along the hot-spot lines (dΩ = dq/sqrt(k_s k_s'')). `paper`: 512×256×256 with
/// the same spectral extents. Gaussian pumps double n_x and L_x.
inline GridSpec preset_grid(const std::string& name, const Medium& medium, bool gaussian) {
  const double dq_desk = medium.Gx() / 16;
  const double scale = medium.k_signal() * medium.k2_signal();
  GridSpec g;
  std::size_t refine;
  if (name == "desk") {
    g.nx = 128, g.ny = 64, g.nt = 64;
    refine = 1;
  } else if (name == "paper") {
    g.nx = 512, g.ny = 256, g.nt = 256;
    refine = 4;
  } else {
    throw ConfigError("simulation.preset: unknown preset '" + name + "' (expected desk or paper)");
  }
  const double dq = dq_desk / double(refine);
  g.Lx_um = g.Ly_um = units::two_pi / dq;
  g.T_ps = units::two_pi / (dq / std::sqrt(scale));
  g.dz_um = 40;
  if (gaussian) {
    g.nx *= 2;
    g.Lx_um *= 2;
  }
  return g;
}

/// Fills grid fields not given explicitly from the preset (when one is named).
inline void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset.empty()) return;
  cfg.simulation.preset = preset;
  const Medium medium(cfg.crystal);
  const GridSpec p = preset_grid(preset, medium, cfg.pump.gaussian);
  auto& g = cfg.simulation.grid;
  if (g.nx == 0) g.nx = p.nx;
  if (g.ny == 0) g.ny = p.ny;
  if (g.nt == 0) g.nt = p.nt;
  if (g.Lx_um == 0) g.Lx_um = p.Lx_um;
  if (g.Ly_um == 0) g.Ly_um = p.Ly_um;
  if (g.T_ps == 0) g.T_ps = p.T_ps;
}

inline std::vector<double> default_snapshots(double length_mm, std::size_t n = 20) {
  std::vector<double> z;
  for (std::size_t k = 0; k <= n; ++k) z.push_back(length_mm * double(k) / double(n));
  return z;
}

inline PropagationConfig propagation_config(const RunConfig& cfg) {
  if (cfg.simulation.grid.nx == 0 && cfg.simulation.preset.empty())
    throw ConfigError("simulation: no grid given; set nx, ny, nt, Lx_um, Ly_um, T_ps or a preset");
  RunConfig c = cfg;
  apply_preset(c, c.simulation.preset);
  c.simulation.grid.validate();
  PropagationConfig p;
  p.crystal = c.crystal;
  const Medium medium(c.crystal);
  p.pump = c.pump.build(medium);
  p.grid = c.simulation.grid;
  p.trajectories = c.simulation.trajectories;
  p.seed = c.simulation.seed;
  p.snapshots_z_mm = c.simulation.snapshots_z_mm.empty() ? default_snapshots(c.crystal.length_mm)
                                                         : c.simulation.snapshots_z_mm;
  p.frozen_pump = c.simulation.frozen_pump;
  p.dealias = c.simulation.dealias;
  return p;
}

inline json sellmeier_json(const DispersionModel& d) {
  const auto& c = d.coefficients();
  return {{"name", d.name()},
          {"a", c.a},
          {"b", c.b},
          {"t_ref_C", c.t_ref_C},
          {"lambda_min_um", d.lambda_min_um()},
          {"lambda_max_um", d.lambda_max_um()},
          {"t_min_C", d.t_min_C()},
          {"t_max_C", d.t_max_C()}};
}

/// Fully resolved config (poling period and preset applied). Parsing it back gives
/// the same run.
inline json to_json(const RunConfig& cfg) {
  json j;
  const auto& c = cfg.crystal;
  j["crystal"] = {{"poling_period_um", c.poling_period_um},
                  {"length_mm", c.length_mm},
                  {"temperature_C", c.temperature_C},
                  {"d01_over_deff", c.d01_over_deff},
                  {"deff_pm_per_V", c.deff_pm_per_V},
                  {"pump_wavelength_um", c.pump_wavelength_um},
                  {"sellmeier", sellmeier_json(c.dispersion)}};
  const auto& p = cfg.pump;
  json pj;
  if (p.amplitudes) {
    pj["amplitudes"] = {{"alpha1", {p.amplitudes->first.real(), p.amplitudes->first.imag()}},
                        {"alpha2", {p.amplitudes->second.real(), p.amplitudes->second.imag()}}};
  } else {
    pj["gbar_per_mm"] = *p.gbar_per_mm;
    pj["ratio_r_abs"] = p.ratio_r_abs;
    pj["ratio_r_phase_rad"] = p.ratio_r_phase_rad;
  }
  if (p.q0p_resonant)
    pj["q0p_um_inv"] = "resonant";
  else if (p.q0p_over_Gx)
    pj["q0p_over_Gx"] = *p.q0p_over_Gx;
  else
    pj["q0p_um_inv"] = p.q0p_um_inv;
  pj["profile"] = p.gaussian ? "gaussian" : "plane";
  if (p.gaussian) {
    pj["waist_x_um"] = p.waist_x_um;
    pj["waist_y_um"] = p.waist_y_um;
  }
  j["pump"] = pj;
  RunConfig resolved = cfg;
  if (!resolved.simulation.preset.empty()) apply_preset(resolved, resolved.simulation.preset);
  const auto& s = resolved.simulation;
  j["simulation"] = {{"preset", s.preset},
                     {"nx", s.grid.nx},
                     {"ny", s.grid.ny},
                     {"nt", s.grid.nt},
                     {"Lx_um", s.grid.Lx_um},
                     {"Ly_um", s.grid.Ly_um},
                     {"T_ps", s.grid.T_ps},
                     {"dz_um", s.grid.dz_um},
                     {"trajectories", s.trajectories},
                     {"seed", s.seed},
                     {"snapshots_z_mm", s.snapshots_z_mm},
                     {"frozen_pump", s.frozen_pump},
                     {"dealias", s.dealias}};
  j["qpm"] = {{"omega_points", cfg.qpm.omega_points},
              {"angle_points", cfg.qpm.angle_points},
              {"omega_max", cfg.qpm.omega_max},
              {"tolerance", cfg.qpm.tolerance}};
  return j;
}

/// 64-bit FNV-1a of a byte string.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& cfg) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a(to_json(cfg).dump());
  return os.str();
}

}  // namespace npc
