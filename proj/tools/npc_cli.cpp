// npc: command line front end.
//
//   npc qpm CONFIG --out DIR [--branch S0|S11|S22|S12|S21|all]
//   npc modes [CONFIG] (--landscape --out DIR | --point R,PHASE)
//   npc simulate CONFIG --out DIR [--preset desk|paper] [--seed N] [--trajectories N]
//   npc analyze RUN... --figure fig3|fig4|fig6|fig7 --out DIR [--z MM]
//
// Exit codes: 0 ok, 2 configuration, 3 numerical divergence, 4 I/O.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "npc/analysis.hpp"
#include "npc/config.hpp"
#include "npc/coupled_modes.hpp"
#include "npc/io.hpp"
#include "npc/propagation.hpp"
#include "npc/qpm.hpp"

using namespace npc;

namespace {

std::vector<double> omega_grid(const QpmSpec& q) {
  return linspace(-q.omega_limit(), q.omega_limit(), q.omega_points);
}

int cmd_qpm(const std::string& config_path, const std::string& branch_arg, const fs::path& out) {
  const RunConfig cfg = load_config(config_path);
  const Medium medium(cfg.crystal);
  const double q0p = cfg.pump.q0p(medium.Gx());
  const bool resonant = std::abs(q0p - medium.Gx()) <= 1e-9 * medium.Gx();
  std::vector<Branch> labels;
  if (branch_arg == "all")
    labels = branches_for(resonant);
  else
    labels = {branch_from_string(branch_arg)};
  ensure_dir(out);
  RunManifest m;
  m.command = "qpm";
  m.config = to_json(cfg);
  m.config_hash = config_hash(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto omegas = omega_grid(cfg.qpm);
  const auto angles = linspace(0, units::two_pi, cfg.qpm.angle_points, false);
  QpmOptions opt;
  opt.tolerance = cfg.qpm.tolerance;
  for (Branch b : labels) {
    const QpmBranch br = exact_branch(b, medium, q0p, omegas, angles, opt);
    Table t;
    t.comments = {"branch " + std::string(to_string(b)) + ", resultant rho = " + std::to_string(br.resultant) + " 1/um",
                  "config_hash " + m.config_hash};
    t.columns = {"omega_rad_per_ps", "qx_um_inv", "qy_um_inv", "abs_D_um_inv"};
    std::vector<double> flat;
    for (const auto& s : br.samples) {
      t.add({s.omega, s.qx, s.qy, s.residual});
      flat.insert(flat.end(), {s.omega, s.qx, s.qy, s.residual});
    }
    const std::string base = "branch_" + std::string(to_string(b));
    write_table(out / (base + ".txt"), t);
    write_array(out / (base + ".bin"), flat,
                {{"sample", "", br.samples.size(), 1.0}, {"column", "omega,qx,qy,|D|", 4, 1.0}},
                {{"config_hash", m.config_hash}, {"branch", to_string(b)}});
    for (const auto& f : {base + ".txt", base + ".bin", base + ".bin.json"}) m.outputs.push_back(f);
    std::printf("%s: %zu samples\n", std::string(to_string(b)).c_str(), br.samples.size());
  }
  if (branch_arg == "all") {
    for (const auto& pair : shared_pairs(resonant)) {
      const auto line = shared_modes(pair, medium, q0p, omegas, cfg.qpm.tolerance);
      Table t;
      t.comments = {"shared modes of " + std::string(to_string(pair.first)) + " and " +
                        std::string(to_string(pair.second)) + " on q_x = " + std::to_string(line.qx) + " 1/um",
                    "q_y is given for q_y >= 0; the line is symmetric in q_y"};
      t.columns = {"omega_rad_per_ps", "qx_um_inv", "qy_um_inv", "abs_D_um_inv"};
      for (const auto& p : line.points) t.add({p.omega, line.qx, p.qy, p.residual});
      const std::string name = "shared_" + std::string(to_string(pair.first)) + "_" +
                               std::string(to_string(pair.second)) + ".txt";
      write_table(out / name, t);
      m.outputs.push_back(name);
      std::printf("shared %s/%s: q_x = %.6f, %zu points\n", std::string(to_string(pair.first)).c_str(),
                  std::string(to_string(pair.second)).c_str(), line.qx, line.points.size());
    }
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out, m);
  return 0;
}

int cmd_modes(const std::string& config_path, bool landscape, const std::string& point,
              const std::string& out) {
  double gbar = 1.0;
  RunManifest m;
  m.command = "modes";
  if (!config_path.empty()) {
    const RunConfig cfg = load_config(config_path);
    if (cfg.pump.gbar_per_mm) gbar = *cfg.pump.gbar_per_mm;
    m.config = to_json(cfg);
    m.config_hash = config_hash(cfg);
  }
  if (landscape == !point.empty())
    throw ConfigError("modes: give exactly one of --landscape or --point");
  if (!point.empty()) {
    double r_abs, phase;
    char comma;
    std::istringstream is(point);
    if (!(is >> r_abs >> comma >> phase) || comma != ',')
      throw ConfigError("modes --point: expected R,PHASE (e.g. 1,0)");
    const auto g = GainParameters::from_ratio(gbar, std::polar(r_abs, phase));
    std::printf("r = %.6g exp(i %.6g), gbar = %.6g /mm\n", r_abs, phase, gbar);
    for (Branch b : {Branch::Sigma0, Branch::Sigma11, Branch::Sigma22})
      std::printf("gamma_%s = %.4f\n", std::string(to_string(b)).c_str(), std::abs(two_mode_gamma(b, g)));
    const auto [lp, lm] = four_mode_eigenvalues(g);
    std::printf("Lambda+/gbar = %.4f\nLambda-/gbar = %.4f\n", lp / gbar, lm / gbar);
    if (std::abs(g.r.imag()) <= 1e-12) {
      const auto bs = beam_splitter_decomposition(g);
      std::printf("Theta = %.6f rad (cos %.4f, sin %.4f)\n", bs.theta, bs.cos_theta, bs.sin_theta);
    } else {
      std::printf("Theta: undefined for complex r\n");
    }
    return 0;
  }
  if (out.empty()) throw ConfigError("modes --landscape: --out DIR is required");
  ensure_dir(out);
  const auto rs = linspace(0, 1, 101);
  // Inclusive phase grid so that Δφ = π is sampled; the 2π column repeats 0.
  const auto ph = linspace(0, units::two_pi, 101);
  const auto land = eigenvalue_landscape(rs, ph, 1.0);
  Table t;
  t.comments = {"normalized four-mode eigenvalues over |r| and the relative pump phase"};
  t.columns = {"r_abs", "phase_rad", "lambda_plus", "lambda_minus"};
  double pmax = 0, pmin = 1e300;
  for (std::size_t i = 0; i < rs.size(); ++i)
    for (std::size_t j = 0; j < ph.size(); ++j) {
      t.add({rs[i], ph[j], land.plus_at(i, j), land.minus_at(i, j)});
      pmax = std::max(pmax, land.plus_at(i, j));
      pmin = std::min(pmin, land.plus_at(i, j));
    }
  write_table(fs::path(out) / "fig5_landscape.txt", t);
  m.outputs.push_back("fig5_landscape.txt");
  write_manifest(out, m);
  std::printf("Lambda+/gbar: max %.6f, min %.6f\n", pmax, pmin);
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& preset,
                 std::optional<std::uint64_t> seed, std::optional<std::size_t> trajectories,
                 const fs::path& out) {
  RunConfig cfg = load_config(config_path);
  if (!preset.empty()) cfg.simulation.preset = preset;
  if (seed) cfg.simulation.seed = *seed;
  if (trajectories) cfg.simulation.trajectories = *trajectories;
  apply_preset(cfg, cfg.simulation.preset);
  PropagationConfig p = propagation_config(cfg);
  cfg.simulation.snapshots_z_mm = p.snapshots_z_mm;
  p.progress = [](std::size_t done, std::size_t total) {
    std::fprintf(stderr, "\rtrajectory %zu/%zu", done, total);
    if (done == total) std::fprintf(stderr, "\n");
  };
  const auto& g = p.grid;
  std::printf("grid %zux%zux%zu, Lx %.2f um, Ly %.2f um, T %.4f ps, %zu trajectories, seed %llu\n",
              g.nx, g.ny, g.nt, g.Lx_um, g.Ly_um, g.T_ps, p.trajectories,
              static_cast<unsigned long long>(p.seed));
  const EnsembleResult r = propagate(p);
  const RunManifest m = save_run(out, cfg, r);
  std::printf("done in %.1f s; Manley-Rowe drift %.2e, pump depletion %.2e; config %s\n",
              r.wall_seconds, r.max_manley_rowe_drift(), r.depletion_fraction(), m.config_hash.c_str());
  return 0;
}

std::string run_name(const fs::path& dir) {
  auto name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return name;
}

void add_fit_rows(Table& t, double tag, const BranchMask& mask, const std::vector<BranchMean>& s,
                  double gbar) {
  for (auto method : {FitMethod::log_linear, FitMethod::sinh2}) {
    try {
      const auto f = fit_gamma(s, gbar, method);
      t.add({tag, double(int(method)), f.gamma_hat, f.std_error, f.gz_min, f.gz_max, double(f.points)});
    } catch (const FitError& e) {
      std::fprintf(stderr, "warning: %s fit of %s: %s\n", to_string(method).c_str(), mask.name.c_str(), e.what());
    }
  }
}

int cmd_analyze(const std::vector<std::string>& runs, const std::string& figure, const fs::path& out,
                std::optional<double> z_opt) {
  std::vector<std::pair<RunConfig, EnsembleResult>> loaded;
  for (const auto& d : runs) loaded.push_back(load_run(d));
  ensure_dir(out);
  RunManifest m;
  m.command = "analyze " + figure;
  m.config = to_json(loaded.front().first);
  m.config_hash = config_hash(loaded.front().first);
  m.seed = loaded.front().second.seed;

  for (std::size_t k = 0; k < loaded.size(); ++k) {
    const auto& [cfg, r] = loaded[k];
    const Medium medium(cfg.crystal);
    const std::string tag = run_name(runs[k]);
    const double z = z_opt.value_or(r.length_mm);
    const std::size_t snap = r.snapshot_index(z);
    const double gbar = r.gains.gbar;
    if (figure == "fig3") {
      const auto spec = photon_spectrum(r, snap);
      const auto& g = r.grid;
      Table plane;
      plane.comments = {"photon number per mode at Omega = 0, z = " + std::to_string(r.snapshots[snap].z_um * 1e-3) + " mm"};
      plane.columns = {"qx_um_inv", "qy_um_inv", "photons"};
      for (std::size_t ix = 0; ix < g.nx; ++ix)
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
          const std::size_t i = g.index(ix, iy, 0);
          if (r.band[i]) plane.add({g.qx(ix), g.qy(iy), spec[i]});
        }
      write_table(out / ("fig3_" + tag + "_qxqy.txt"), plane);
      Table sec;
      sec.comments = {"photon number per mode at q_y = 0 versus signal wavelength"};
      sec.columns = {"qx_um_inv", "wavelength_um", "photons"};
      for (const auto& p : spectrum_section_qx_lambda(r, snap, medium.omega_signal()))
        sec.add({p.qx, p.wavelength_um, p.photons});
      write_table(out / ("fig3_" + tag + "_qxlambda.txt"), sec);
      m.outputs.push_back("fig3_" + tag + "_qxqy.txt");
      m.outputs.push_back("fig3_" + tag + "_qxlambda.txt");
    } else if (figure == "fig4" || figure == "fig6") {
      if (!(gbar > 0)) throw ConfigError("analyze: run '" + tag + "' has no gain");
      std::vector<BranchMask> masks;
      if (figure == "fig4")
        for (Branch b : branches_for(detail::is_resonant(r.q0p, r.Gx)))
          masks.push_back(branch_mask(b, medium, r.q0p, gbar, r.grid, r.band));
      else
        masks.push_back(branch_mask(Branch::Sigma0, medium, r.q0p, gbar, r.grid, r.band));
      masks.push_back(hot_spot_mask(medium, r.q0p, gbar, r.grid, r.band));
      Table curves, fits;
      curves.comments = {"mask-averaged photon number versus gbar z; masks:"};
      curves.columns = {"mask", "gbar_z", "photons", "stderr", "modes"};
      fits.comments = {"fits of log N: method 0 log-linear, 1 sinh^2; mask index as in the curves file"};
      fits.columns = {"mask", "method", "gamma_hat", "stderr", "gz_min", "gz_max", "points"};
      for (std::size_t mi = 0; mi < masks.size(); ++mi) {
        curves.comments.push_back(std::to_string(mi) + " = " + masks[mi].name);
        if (masks[mi].modes.empty()) continue;
        const auto s = branch_series(r, masks[mi]);
        for (const auto& p : s) curves.add({double(mi), gbar * p.z_mm, p.photons, p.std_error, double(p.modes)});
        add_fit_rows(fits, double(mi), masks[mi], s, gbar);
      }
      const std::string base = figure + (figure == "fig4" ? "_gain_curves_" : "_hotspot_curves_") + tag;
      write_table(out / (base + ".txt"), curves);
      write_table(out / (base + "_fits.txt"), fits);
      m.outputs.push_back(base + ".txt");
      m.outputs.push_back(base + "_fits.txt");
    } else if (figure == "fig7") {
      const auto rows = hot_spot_report(r, snap, medium);
      Table t;
      t.comments = {"hot-spot lines at z = " + std::to_string(r.snapshots[snap].z_um * 1e-3) + " mm"};
      t.columns = {"line_qx_um_inv", "omega_rad_per_ps", "photons", "modes", "background", "ratio"};
      for (const auto& row : rows)
        t.add({row.line_qx, row.omega, row.photons, double(row.modes), row.background, row.ratio});
      write_table(out / ("fig7_hotspot_lines_" + tag + ".txt"), t);
      m.outputs.push_back("fig7_hotspot_lines_" + tag + ".txt");
    } else {
      throw ConfigError("analyze --figure: expected fig3, fig4, fig6 or fig7");
    }
  }
  if ((figure == "fig4" || figure == "fig6") && loaded.size() >= 2) {
    const auto& [cfg_a, a] = loaded[0];
    const auto& b = loaded[1].second;
    const Medium medium(cfg_a.crystal);
    const double z = z_opt.value_or(a.length_mm);
    const auto rows = compare_configurations(a, b, medium, z);
    Table t;
    t.comments = {"run A = " + run_name(runs[0]) + ", run B = " + run_name(runs[1]) + ", N at z = " + std::to_string(z) + " mm"};
    t.columns = {"mask", "gamma_a", "gamma_b", "gamma_ratio", "gamma_ratio_err", "N_a", "N_b", "N_ratio", "N_ratio_err"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      t.comments.push_back("mask " + std::to_string(i) + " = " + row.mask);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      t.add({double(i), row.fit_a ? row.fit_a->gamma_hat : nan, row.fit_b ? row.fit_b->gamma_hat : nan,
             row.gamma_ratio, row.gamma_ratio_err, row.n_a.photons, row.n_b.photons, row.n_ratio,
             row.n_ratio_err});
      std::printf("%-4s gamma A %.4f  gamma B %.4f  ratio %.4f +- %.4f\n", row.mask.c_str(),
                  row.fit_a ? row.fit_a->gamma_hat : nan, row.fit_b ? row.fit_b->gamma_hat : nan,
                  row.gamma_ratio, row.gamma_ratio_err);
    }
    write_table(out / (figure + "_comparison.txt"), t);
    m.outputs.push_back(figure + "_comparison.txt");
  }
  write_manifest(out, m);
  for (const auto& f : m.outputs) std::printf("wrote %s\n", (out / f).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-pump parametric down-conversion in a hexagonally poled crystal"};
  app.require_subcommand(1);

  std::string config, branch = "all", out, point, preset, figure;
  bool landscape = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::optional<double> z_mm;
  std::vector<std::string> runs;

  auto* qpm = app.add_subcommand("qpm", "Export QPM branches and shared-mode lines");
  qpm->add_option("config", config, "Config file")->required();
  qpm->add_option("--branch", branch, "S0, S11, S22, S12, S21 or all");
  qpm->add_option("--out", out, "Output directory")->required();

  auto* modes = app.add_subcommand("modes", "Two- and four-mode gain analytics");
  modes->add_option("config", config, "Config file (for gbar)");
  modes->add_flag("--landscape", landscape, "Tabulate the eigenvalue landscape");
  modes->add_option("--point", point, "Single point R,PHASE");
  modes->add_option("--out", out, "Output directory (landscape)");

  auto* sim = app.add_subcommand("simulate", "Run the stochastic split-step ensemble");
  sim->add_option("config", config, "Config file")->required();
  sim->add_option("--preset", preset, "Grid preset")->check(CLI::IsMember({"desk", "paper"}));
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--trajectories", trajectories, "Number of trajectories");
  sim->add_option("--out", out, "Run directory")->required();

  auto* an = app.add_subcommand("analyze", "Tables from run directories");
  an->add_option("runs", runs, "Run directories")->required();
  an->add_option("--figure", figure, "fig3, fig4, fig6 or fig7")->required();
  an->add_option("--out", out, "Output directory")->required();
  an->add_option("--z", z_mm, "Propagation distance for sections and ratios (mm)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : int(ExitCode::config);
  }

  try {
    if (*qpm) return cmd_qpm(config, branch, out);
    if (*modes) return cmd_modes(config, landscape, point, out);
    if (*sim) return cmd_simulate(config, preset, seed, trajectories, out);
    if (*an) return cmd_analyze(runs, figure, out, z_mm);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(ExitCode::io);
  }
  return 0;
}
