#pragma once

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "npc/branch.hpp"
#include "npc/errors.hpp"
#include "npc/grid.hpp"
#include "npc/medium.hpp"
#include "npc/propagation.hpp"
#include "npc/qpm.hpp"

namespace npc {

struct MaskOptions {
  // A grid mode belongs to a branch when |D| <= tolerance_gbar * ḡ, i.e. it is
  // phase matched well enough to grow at close to the full rate.
  double tolerance_gbar = 0.3;
  int hot_spot_halfwidth_cells = 5;
};

/// Set of spectral modes (array positions) used for a branch average.
struct BranchMask {
  std::string name;
  std::optional<Branch> branch;  // empty for the hot-spot lines
  double tolerance = 0;          // |D| bound, µm⁻¹
  double exclusion_halfwidth = 0;  // around shared-mode lines, µm⁻¹
  std::vector<double> line_qx;   // branch: excluded lines; hot spots: the lines themselves
  std::vector<std::size_t> modes;
};

namespace detail {

inline bool is_resonant(double q0p, double Gx) { return std::abs(q0p - Gx) <= 1e-9 * Gx; }

inline std::vector<std::pair<Branch, Branch>> hot_spot_pairs(double q0p, double Gx) {
  // Σ11∩Σ22 at q_x = 0 is weak and left out of the gain analysis.
  if (is_resonant(q0p, Gx)) return {{Branch::Sigma0, Branch::Sigma11}, {Branch::Sigma0, Branch::Sigma22}};
  return shared_pairs(false);
}

inline double pair_line_qx(std::pair<Branch, Branch> p, double q0p, double Gx) {
  return 0.5 * (resultant(p.first, q0p, Gx) + resultant(p.second, q0p, Gx));
}

inline std::vector<double> hot_spot_lines(double q0p, double Gx) {
  std::vector<double> out;
  for (const auto& p : hot_spot_pairs(q0p, Gx)) out.push_back(pair_line_qx(p, q0p, Gx));
  return out;
}

// Lines to keep away from when averaging branch b: every intersection of b with another
// branch (the weak one included) and the idler image ρ_b - q_x of each.
inline std::vector<double> excluded_lines(Branch b, double q0p, double Gx) {
  std::vector<double> out;
  const double rho = resultant(b, q0p, Gx);
  for (const auto& p : shared_pairs(is_resonant(q0p, Gx))) {
    if (p.first != b && p.second != b) continue;
    const double lx = pair_line_qx(p, q0p, Gx);
    out.push_back(lx);
    out.push_back(rho - lx);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double c) { return std::abs(a - c) < 1e-12; }),
            out.end());
  return out;
}

// Mismatch of branch b at every band mode; NaN outside the band or when evanescent.
inline std::vector<double> grid_mismatch(const Medium& medium, Branch b, double q0p,
                                         const GridSpec& g, const std::vector<std::uint8_t>& band) {
  std::vector<double> d(g.size(), std::numeric_limits<double>::quiet_NaN());
  const double rho = resultant(b, q0p, medium.Gx());
  for (std::size_t ix = 0; ix < g.nx; ++ix)
    for (std::size_t iy = 0; iy < g.ny; ++iy)
      for (std::size_t it = 0; it < g.nt; ++it) {
        const std::size_t i = g.index(ix, iy, it);
        if (!band[i]) continue;
        const double w = g.omega(it);
        if (!medium.in_window(Field::signal, w) || !medium.in_window(Field::signal, -w)) continue;
        const double v = branch_mismatch(medium, rho, q0p, g.qx(ix), g.qy(iy), w);
        if (std::isfinite(v)) d[i] = v;
      }
  return d;
}

inline void check_band(const GridSpec& g, const std::vector<std::uint8_t>& band) {
  if (band.size() != g.size()) throw ConfigError("mask: band array does not match the grid");
}

}  // namespace detail

/// Modes of one branch away from its shared-mode lines.
inline BranchMask branch_mask(Branch b, const Medium& medium, double q0p, double gbar_per_mm,
                              const GridSpec& g, const std::vector<std::uint8_t>& band,
                              const MaskOptions& opt = {}) {
  detail::check_band(g, band);
  BranchMask m;
  m.name = std::string(to_string(b));
  m.branch = b;
  m.tolerance = opt.tolerance_gbar * gbar_per_mm * 1e-3;
  m.exclusion_halfwidth = opt.hot_spot_halfwidth_cells * g.dqx();
  m.line_qx = detail::excluded_lines(b, q0p, medium.Gx());
  const auto d = detail::grid_mismatch(medium, b, q0p, g, band);
  for (std::size_t ix = 0; ix < g.nx; ++ix) {
    const double qx = g.qx(ix);
    bool near = false;
    for (double lx : m.line_qx) near = near || std::abs(qx - lx) <= m.exclusion_halfwidth + 1e-12;
    if (near) continue;
    for (std::size_t iy = 0; iy < g.ny; ++iy)
      for (std::size_t it = 0; it < g.nt; ++it) {
        const std::size_t i = g.index(ix, iy, it);
        if (std::abs(d[i]) <= m.tolerance) m.modes.push_back(i);
      }
  }
  return m;
}

/// Shared modes: within tolerance of both branches of a hot-spot pair. At resonance
/// these are the lines q_x = ±G_x; off resonance the lines ±q0p and ±G_x.
inline BranchMask hot_spot_mask(const Medium& medium, double q0p, double gbar_per_mm,
                                const GridSpec& g, const std::vector<std::uint8_t>& band,
                                const MaskOptions& opt = {}) {
  detail::check_band(g, band);
  BranchMask m;
  m.name = "hot";
  m.tolerance = opt.tolerance_gbar * gbar_per_mm * 1e-3;
  m.line_qx = detail::hot_spot_lines(q0p, medium.Gx());
  std::vector<std::uint8_t> in(g.size(), 0);
  for (const auto& p : detail::hot_spot_pairs(q0p, medium.Gx())) {
    const auto da = detail::grid_mismatch(medium, p.first, q0p, g, band);
    const auto db = detail::grid_mismatch(medium, p.second, q0p, g, band);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(da[i]) <= m.tolerance && std::abs(db[i]) <= m.tolerance) in[i] = 1;
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    if (in[i]) m.modes.push_back(i);
  return m;
}

inline bool masks_disjoint(const BranchMask& a, const BranchMask& b) {
  std::vector<std::size_t> x = a.modes, y = b.modes;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<std::size_t> common;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
  return common.empty();
}

struct BranchMean {
  double z_mm = 0;
  double photons = 0;  // mean of ⟨|A|²⟩ - ½ over the mask
  double std_error = 0;
  std::size_t modes = 0;
};

/// Mean photon number over a mask at one snapshot. Modes are treated as independent
/// samples for the error bar.
inline BranchMean branch_mean_photons(const EnsembleResult& r, std::size_t snapshot,
                                      const BranchMask& mask) {
  if (mask.modes.empty()) throw ConfigError("branch_mean_photons: mask '" + mask.name + "' is empty");
  if (snapshot >= r.snapshots.size()) throw ConfigError("branch_mean_photons: no such snapshot");
  const auto& s = r.snapshots[snapshot];
  const double n = double(r.n_trajectories);
  double sum = 0, var = 0;
  for (std::size_t i : mask.modes) {
    const double m = s.sum_abs2[i] / n;
    sum += m - 0.5;
    if (r.n_trajectories > 1) var += std::max(0.0, (s.sum_abs4[i] / n - m * m) / (n - 1));
  }
  const double k = double(mask.modes.size());
  return {s.z_um * 1e-3, sum / k, std::sqrt(var) / k, mask.modes.size()};
}

inline std::vector<BranchMean> branch_series(const EnsembleResult& r, const BranchMask& mask) {
  std::vector<BranchMean> out;
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) out.push_back(branch_mean_photons(r, k, mask));
  return out;
}

enum class FitMethod { log_linear, sinh2 };

inline std::string to_string(FitMethod m) { return m == FitMethod::log_linear ? "log-linear" : "sinh2"; }

struct FitOptions {
  double gz_min = 1.5;
  double gz_max = std::numeric_limits<double>::infinity();
  std::size_t min_points = 4;
};

struct GainFit {
  FitMethod method = FitMethod::log_linear;
  double gamma_hat = 0;
  double std_error = 0;
  double gz_min = 0;
  double gz_max = 0;
  double residual_rms = 0;  // in log N
  std::size_t points = 0;
};

/// Fits the growth rate γ of N(z) in units of ḡ (z in mm, ḡ in mm⁻¹), using points with
/// ḡz in the asymptotic window and N > 0.
///   log_linear: log N = 2γḡz + c.
///   sinh2:      log N = log A + 2 log sinh(γḡz).
inline GainFit fit_gamma(const std::vector<double>& z_mm, const std::vector<double>& photons,
                         double gbar, FitMethod method = FitMethod::log_linear,
                         const FitOptions& opt = {}) {
  if (z_mm.size() != photons.size()) throw FitError("fit_gamma: z and N differ in length");
  if (!(gbar > 0)) throw FitError("fit_gamma: gbar must be > 0");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < z_mm.size(); ++i) {
    const double gz = gbar * z_mm[i];
    if (gz < opt.gz_min - 1e-12 || gz > opt.gz_max + 1e-12) continue;
    if (!(photons[i] > 0)) continue;
    x.push_back(gz);
    y.push_back(std::log(photons[i]));
  }
  const std::size_t n = x.size();
  if (n < opt.min_points)
    throw FitError("fit_gamma: " + std::to_string(n) + " usable points with gbar*z >= " +
                   std::to_string(opt.gz_min) + " (need " + std::to_string(opt.min_points) + ")");
  GainFit f;
  f.method = method;
  f.points = n;
  f.gz_min = *std::min_element(x.begin(), x.end());
  f.gz_max = *std::max_element(x.begin(), x.end());

  // Linear model y = c + slope * basis(x) with basis chosen by the method.
  auto linear_fit = [&](auto basis, double& c, double& slope, double& rss, double& sxx) {
    double mb = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mb += basis(x[i]);
      my += y[i];
    }
    mb /= double(n);
    my /= double(n);
    double sxy = 0;
    sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = basis(x[i]) - mb;
      sxx += b * b;
      sxy += b * (y[i] - my);
    }
    slope = sxy / sxx;
    c = my - slope * mb;
    rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - c - slope * basis(x[i]);
      rss += e * e;
    }
  };

  if (method == FitMethod::log_linear) {
    double c, slope, rss, sxx;
    linear_fit([](double v) { return v; }, c, slope, rss, sxx);
    if (!(sxx > 0)) throw FitError("fit_gamma: all points at the same gbar*z");
    f.gamma_hat = 0.5 * slope;
    f.std_error = n > 2 ? 0.5 * std::sqrt(rss / double(n - 2) / sxx) : 0.0;
    f.residual_rms = std::sqrt(rss / double(n));
    return f;
  }

  // sinh2: profile the amplitude out and minimize the residual over γ.
  auto profile_rss = [&](double g) {
    double c = 0;
    for (std::size_t i = 0; i < n; ++i) c += y[i] - 2 * std::log(std::sinh(g * x[i]));
    c /= double(n);
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - c - 2 * std::log(std::sinh(g * x[i]));
      rss += e * e;
    }
    return rss;
  };
  // Bracket on a coarse scan first; the profile can be flat at large γ.
  double best = 0.01, best_rss = profile_rss(best);
  for (double g = 0.01; g <= 6.0; g += 0.01) {
    const double v = profile_rss(g);
    if (v < best_rss) {
      best_rss = v;
      best = g;
    }
  }
  const auto [g_hat, rss] = boost::math::tools::brent_find_minima(
      profile_rss, std::max(1e-4, best - 0.02), best + 0.02, 50);
  double c = 0;
  for (std::size_t i = 0; i < n; ++i) c += y[i] - 2 * std::log(std::sinh(g_hat * x[i]));
  c /= double(n);
  Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d j(1.0, 2 * x[i] / std::tanh(g_hat * x[i]));
    jtj += j * j.transpose();
  }
  f.gamma_hat = g_hat;
  f.std_error = n > 2 ? std::sqrt(rss / double(n - 2) * jtj.inverse()(1, 1)) : 0.0;
  f.residual_rms = std::sqrt(rss / double(n));
  return f;
}

inline GainFit fit_gamma(const std::vector<BranchMean>& series, double gbar,
                         FitMethod method = FitMethod::log_linear, const FitOptions& opt = {}) {
  std::vector<double> z, n;
  for (const auto& p : series) {
    z.push_back(p.z_mm);
    n.push_back(p.photons);
  }
  return fit_gamma(z, n, gbar, method, opt);
}

/// The two fits of one series and whether they agree within two combined standard errors.
struct FitCrossCheck {
  GainFit log_linear;
  GainFit sinh2;
  double difference = 0;
  double combined_stderr = 0;
  bool consistent = false;
};

inline FitCrossCheck cross_check(const std::vector<BranchMean>& series, double gbar,
                                 const FitOptions& opt = {}) {
  FitCrossCheck c;
  c.log_linear = fit_gamma(series, gbar, FitMethod::log_linear, opt);
  c.sinh2 = fit_gamma(series, gbar, FitMethod::sinh2, opt);
  c.difference = std::abs(c.log_linear.gamma_hat - c.sinh2.gamma_hat);
  c.combined_stderr = std::hypot(c.log_linear.std_error, c.sinh2.std_error);
  c.consistent = c.difference <= 2 * c.combined_stderr;
  return c;
}

/// Reported fit of a mask: the sinh² model for two-mode branches, whose curvature at
/// moderate gain biases the log-linear slope, and the log-linear model for hot spots,
/// which grow as a sum of several exponentials.
inline GainFit fit_mask(const BranchMask& mask, const std::vector<BranchMean>& series, double gbar,
                        const FitOptions& opt = {}) {
  return fit_gamma(series, gbar, mask.branch ? FitMethod::sinh2 : FitMethod::log_linear, opt);
}

struct HotSpotRow {
  double line_qx = 0;
  double omega = 0;
  double photons = 0;  // mean over hot-spot modes at this (line, Ω)
  std::size_t modes = 0;
  double background = 0;  // Σ0 background mean at the same snapshot
  double ratio = 0;
};

/// Intensity along the hot-spot lines as a function of Ω at one snapshot, with the
/// ratio to the Σ0 background (Σ11 ∪ Σ22 background off resonance).
inline std::vector<HotSpotRow> hot_spot_report(const EnsembleResult& r, std::size_t snapshot,
                                               const Medium& medium, const MaskOptions& opt = {}) {
  const auto& g = r.grid;
  const double gbar = r.gains.gbar;
  if (!(gbar > 0)) throw ConfigError("hot_spot_report: run has no gain");
  const auto hot = hot_spot_mask(medium, r.q0p, gbar, g, r.band, opt);
  double background = 0;
  if (detail::is_resonant(r.q0p, r.Gx)) {
    background = branch_mean_photons(r, snapshot, branch_mask(Branch::Sigma0, medium, r.q0p, gbar, g,
                                                              r.band, opt))
                     .photons;
  } else {
    auto a = branch_mask(Branch::Sigma11, medium, r.q0p, gbar, g, r.band, opt);
    const auto b = branch_mask(Branch::Sigma22, medium, r.q0p, gbar, g, r.band, opt);
    a.modes.insert(a.modes.end(), b.modes.begin(), b.modes.end());
    background = branch_mean_photons(r, snapshot, a).photons;
  }
  const auto spec = photon_spectrum(r, snapshot);
  std::vector<HotSpotRow> rows;
  for (double lx : hot.line_qx) {
    for (std::size_t it = 0; it < g.nt; ++it) {
      HotSpotRow row;
      row.line_qx = lx;
      row.omega = g.omega(it);
      for (std::size_t i : hot.modes) {
        const std::size_t ix = i / (g.ny * g.nt), jt = i % g.nt;
        if (jt != it || std::abs(g.qx(ix) - lx) > 0.5 * g.dqx()) continue;
        row.photons += spec[i];
        ++row.modes;
      }
      if (row.modes == 0) continue;
      row.photons /= double(row.modes);
      row.background = background;
      row.ratio = background > 0 ? row.photons / background : std::numeric_limits<double>::infinity();
      rows.push_back(row);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.line_qx != b.line_qx ? a.line_qx < b.line_qx : a.omega < b.omega;
  });
  return rows;
}

struct ComparisonRow {
  std::string mask;
  std::optional<GainFit> fit_a, fit_b;
  double gamma_ratio = std::numeric_limits<double>::quiet_NaN();
  double gamma_ratio_err = std::numeric_limits<double>::quiet_NaN();
  BranchMean n_a, n_b;
  double n_ratio = std::numeric_limits<double>::quiet_NaN();
  double n_ratio_err = std::numeric_limits<double>::quiet_NaN();
};

inline bool same_grid(const GridSpec& a, const GridSpec& b) {
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(std::abs(x), std::abs(y)); };
  return a.nx == b.nx && a.ny == b.ny && a.nt == b.nt && close(a.Lx_um, b.Lx_um) &&
         close(a.Ly_um, b.Ly_um) && close(a.T_ps, b.T_ps);
}

/// Per-mask γ̂ ratios (A over B) and photon-number ratios at z_mm, with errors
/// propagated in quadrature. Both runs must share grid, pump tilt and ḡ.
inline std::vector<ComparisonRow> compare_configurations(const EnsembleResult& a,
                                                         const EnsembleResult& b,
                                                         const Medium& medium, double z_mm,
                                                         const MaskOptions& mopt = {},
                                                         const FitOptions& fopt = {}) {
  if (!same_grid(a.grid, b.grid)) throw ConfigError("compare_configurations: runs use different grids");
  if (std::abs(a.gains.gbar - b.gains.gbar) > 1e-9 * a.gains.gbar)
    throw ConfigError("compare_configurations: runs use different gbar");
  if (std::abs(a.q0p - b.q0p) > 1e-12) throw ConfigError("compare_configurations: runs use different pump tilts");
  if (a.band != b.band) throw ConfigError("compare_configurations: runs use different spectral bands");
  const double gbar = a.gains.gbar;
  std::vector<BranchMask> masks;
  for (Branch br : branches_for(detail::is_resonant(a.q0p, a.Gx)))
    masks.push_back(branch_mask(br, medium, a.q0p, gbar, a.grid, a.band, mopt));
  masks.push_back(hot_spot_mask(medium, a.q0p, gbar, a.grid, a.band, mopt));

  std::vector<ComparisonRow> rows;
  for (const auto& m : masks) {
    ComparisonRow row;
    row.mask = m.name;
    if (m.modes.empty()) {
      rows.push_back(row);
      continue;
    }
    const auto sa = branch_series(a, m), sb = branch_series(b, m);
    try {
      row.fit_a = fit_mask(m, sa, gbar, fopt);
    } catch (const FitError&) {
    }
    try {
      row.fit_b = fit_mask(m, sb, gbar, fopt);
    } catch (const FitError&) {
    }
    if (row.fit_a && row.fit_b && row.fit_b->gamma_hat != 0) {
      row.gamma_ratio = row.fit_a->gamma_hat / row.fit_b->gamma_hat;
      row.gamma_ratio_err = std::abs(row.gamma_ratio) *
                            std::hypot(row.fit_a->std_error / row.fit_a->gamma_hat,
                                       row.fit_b->std_error / row.fit_b->gamma_hat);
    }
    row.n_a = sa[a.snapshot_index(z_mm)];
    row.n_b = sb[b.snapshot_index(z_mm)];
    if (row.n_b.photons != 0) {
      row.n_ratio = row.n_a.photons / row.n_b.photons;
      row.n_ratio_err = std::abs(row.n_ratio) * std::hypot(row.n_a.std_error / row.n_a.photons,
                                                           row.n_b.std_error / row.n_b.photons);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace npc
