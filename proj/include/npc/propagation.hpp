#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "npc/constants.hpp"
#include "npc/diagnostics.hpp"
#include "npc/errors.hpp"
#include "npc/grid.hpp"
#include "npc/medium.hpp"
#include "npc/pump.hpp"

namespace npc {

struct PropagationConfig {
  CrystalSpec crystal;
  PumpConfig pump{0.0, 0.0, 0.0};
  GridSpec grid;
  std::size_t trajectories = 16;
  std::uint64_t seed = 1;
  std::vector<double> snapshots_z_mm;
  bool frozen_pump = false;
  bool dealias = true;
  unsigned workers = 0;  // 0: NPC_WORKERS or hardware concurrency
  double max_step_phase = 0.05;
  unsigned fft_flags = FFTW_MEASURE;
  std::optional<double> chi_override;  // mm⁻¹ per unit amplitude
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Seeds one trajectory's generator from the run seed and the trajectory index.
inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t trajectory) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(trajectory),
                    std::uint32_t(trajectory >> 32)};
  return std::mt19937_64(seq);
}

/// Vacuum input in the Wigner representation: independent complex Gaussian noise
/// with ⟨|A|²⟩ = ½ per spectral mode. Spectral domain, signal carrier.
inline SpectralField initialize_wigner(const GridSpec& grid, std::uint64_t seed,
                                       std::uint64_t trajectory = 0) {
  grid.validate();
  SpectralField f(grid, Carrier::signal, Domain::spectral);
  auto rng = trajectory_rng(seed, trajectory);
  std::normal_distribution<double> quad(0.0, 0.5);
  for (auto& v : f.data) {
    const double re = quad(rng);
    const double im = quad(rng);
    v = cplx(re, im);
  }
  return f;
}

/// Precomputed linear and nonlinear operators of the split-step scheme. Immutable after
/// construction and shared by all trajectory workers.
///
/// Envelopes are referenced to k_s,ref = k_sz(|q| = G_x, Ω = 0) (signal) and
/// k_p,ref = k_pz(q0p) (pump) in a frame moving at the signal group velocity, so the
/// nonlinear step carries only the residual phase Δ_ref = 2k_s,ref - k_p,ref + G_z.
/// Amplitudes are grid normalized: |A|² is the photon number of a cell or mode.
class SplitStepModel {
 public:
  SplitStepModel(const Medium& medium, const PumpConfig& pump, const GridSpec& grid,
                 std::optional<double> chi_override = std::nullopt)
      : medium_(medium), pump_(pump), grid_(grid) {
    grid_.validate();
    if (grid_.qx_max() < 2.5 * medium_.Gx())
      throw ConfigError("simulation: q_x range must reach 2.5 G_x; increase nx or reduce Lx_um");
    chi_ = chi_override ? *chi_override : coupling_constant(medium_);
    const double dv = grid_.cell_volume();
    chi_grid_ = chi_ * 1e-3 / std::sqrt(dv);
    const double q0p = pump_.q0p();
    k_ref_s_ = medium_.wavevector_z(0.0, medium_.Gx(), 0.0, Field::signal, KzMode::exact);
    k_ref_p_ = medium_.wavevector_z(0.0, q0p, 0.0, Field::pump, KzMode::exact);
    delta_ref_ = 2 * k_ref_s_ - k_ref_p_ + medium_.Gz();

    const std::size_t n = grid_.size();
    phase_s_.assign(n, 0.0);
    phase_p_.assign(n, 0.0);
    band_.assign(n, 0);
    valid_s_.assign(n, 0);
    pump_ok_.assign(n, 0);
    const long bx = long(grid_.nx) / 3, by = long(grid_.ny) / 3, bt = long(grid_.nt) / 3;
    const double k1 = medium_.k1_signal();
    for (std::size_t it = 0; it < grid_.nt; ++it) {
      const double w = grid_.omega(it);
      const bool s_win = medium_.in_window(Field::signal, w);
      const bool p_win = medium_.in_window(Field::pump, w);
      if (!s_win) out_of_window_ += grid_.nx * grid_.ny;
      const double ks = s_win ? medium_.k(Field::signal, w) : 0.0;
      const double kp = p_win ? medium_.k(Field::pump, w) : 0.0;
      const bool t_in = std::abs(fft_index(it, grid_.nt)) <= bt;
      for (std::size_t ix = 0; ix < grid_.nx; ++ix) {
        const double qx = grid_.qx(ix);
        const bool x_in = std::abs(fft_index(ix, grid_.nx)) <= bx;
        for (std::size_t iy = 0; iy < grid_.ny; ++iy) {
          const double qy = grid_.qy(iy);
          const double q2 = qx * qx + qy * qy;
          const std::size_t i = grid_.index(ix, iy, it);
          if (s_win) {
            if (q2 < ks * ks) {
              phase_s_[i] = std::sqrt(ks * ks - q2) - k_ref_s_ - k1 * w;
              valid_s_[i] = 1;
              const bool y_in = std::abs(fft_index(iy, grid_.ny)) <= by;
              band_[i] = (x_in && y_in && t_in) ? 1 : 0;
            } else {
              ++evanescent_;
            }
          }
          if (p_win && q2 < kp * kp) {
            phase_p_[i] = std::sqrt(kp * kp - q2) - k_ref_p_ - k1 * w;
            pump_ok_[i] = 1;
          }
        }
      }
    }
    if (out_of_window_ > 0)
      warn("simulation: " + std::to_string(out_of_window_) +
           " signal modes fall outside the dispersion window and are excluded");

    cos_x_.resize(grid_.nx);
    for (std::size_t ix = 0; ix < grid_.nx; ++ix) cos_x_[ix] = std::cos(medium_.Gx() * grid_.x(ix));
    const double gx_cells = medium_.Gx() / grid_.dqx();
    if (std::abs(gx_cells - std::round(gx_cells)) > 1e-6)
      warn("simulation: G_x is not a multiple of the q_x spacing; grating is not periodic in the box");

    // Undepleted pump: transverse profile in grid units and its spectral phases.
    PumpConfig scaled(pump_.alpha1() * std::sqrt(dv), pump_.alpha2() * std::sqrt(dv), q0p,
                      pump_.profile());
    pump0_direct_ = pump_transverse(scaled, grid_);
    pump0_spec_ = pump0_direct_;
    FftPlan plan2(grid_.nx, grid_.ny, 1);
    plan2.forward(pump0_spec_);
    pump0_phase_.assign(grid_.nx * grid_.ny, 0.0);
    double peak = 0;
    for (const auto& v : pump0_spec_) peak = std::max(peak, std::abs(v));
    stationary_pump_ = true;
    for (std::size_t ix = 0; ix < grid_.nx; ++ix)
      for (std::size_t iy = 0; iy < grid_.ny; ++iy) {
        const std::size_t j = ix * grid_.ny + iy;
        const double ph = phase_p_[grid_.index(ix, iy, 0)];
        pump0_phase_[j] = ph;
        if (std::abs(pump0_spec_[j]) > 1e-14 * peak && std::abs(ph) > 1e-12)
          stationary_pump_ = false;
      }
    pump0_photons_ = 0;
    for (const auto& v : pump0_direct_) pump0_photons_ += std::norm(v);
    pump0_photons_ *= double(grid_.nt);

    max_coupling_ = std::abs(chi_) * (std::abs(pump_.alpha1()) + std::abs(pump_.alpha2()));
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const Medium& medium() const noexcept { return medium_; }
  const PumpConfig& pump() const noexcept { return pump_; }
  double chi() const noexcept { return chi_; }
  /// Coupling per µm for grid-normalized amplitudes.
  double chi_grid() const noexcept { return chi_grid_; }
  double delta_ref() const noexcept { return delta_ref_; }
  double k_ref_signal() const noexcept { return k_ref_s_; }
  double k_ref_pump() const noexcept { return k_ref_p_; }
  /// g1, g2 of the configured pump; all zero when the coupling is switched off.
  GainParameters gains() const {
    if (max_coupling_ == 0) return GainParameters{0.0, 0.0, 0.0, 0.0};
    return GainParameters::from(chi_ * pump_.alpha1(), chi_ * pump_.alpha2());
  }
  const std::vector<std::uint8_t>& band() const noexcept { return band_; }
  const std::vector<double>& signal_phase() const noexcept { return phase_s_; }
  std::size_t evanescent_modes() const noexcept { return evanescent_; }
  std::size_t out_of_window_modes() const noexcept { return out_of_window_; }
  bool stationary_pump() const noexcept { return stationary_pump_; }
  double pump_photons() const noexcept { return pump0_photons_; }
  const cvector& pump_transverse_direct() const noexcept { return pump0_direct_; }

  /// Largest nonlinear phase 2(|g1| + |g2|)·dz accumulated in one step (dz in µm).
  double step_phase(double dz_um) const noexcept { return 2 * max_coupling_ * dz_um * 1e-3; }

  /// Multiplies a spectral field by exp(i φ(w) dz); non-propagating modes are zeroed.
  void linear_step(cvector& a, Carrier carrier, double dz_um) const {
    const auto& ph = carrier == Carrier::signal ? phase_s_ : phase_p_;
    const auto& ok = carrier == Carrier::signal ? valid_s_ : pump_ok_;
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = ok[i] ? a[i] * std::polar(1.0, ph[i] * dz_um) : cplx(0, 0);
  }

  /// Multipliers exp(i φ dz) for repeated use.
  cvector multipliers(Carrier carrier, double dz_um) const {
    cvector m(grid_.size());
    const auto& ph = carrier == Carrier::signal ? phase_s_ : phase_p_;
    const auto& ok = carrier == Carrier::signal ? valid_s_ : pump_ok_;
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = ok[i] ? std::polar(1.0, ph[i] * dz_um) : cplx(0, 0);
    return m;
  }

  /// Undepleted pump profile (x, y) at z, direct domain, grid units.
  void pump_at(double z_um, cvector& out, const FftPlan& plan2) const {
    if (stationary_pump_) {
      out = pump0_direct_;
      return;
    }
    out.resize(pump0_spec_.size());
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = pump0_spec_[j] * std::polar(1.0, pump0_phase_[j] * z_um);
    plan2.backward(out);
  }

  /// One explicit-midpoint step of
  ///   ∂z A_s = 2χ cos(G_x x) (P + δ) A_s* e^{-iΔ_ref z},  ∂z δ = -χ cos(G_x x) A_s² e^{iΔ_ref z}
  /// over [z0, z0 + h] in the direct domain. `delta` may be null (frozen pump). Returns
  /// the pump photon change Σ 2Re(P* δ) + |δ|² after the step (0 when frozen).
  double nonlinear_step(cvector& as, cvector* delta, const cvector& pump2d, double z0_um,
                        double h_um) const {
    cvector mid;
    return nonlinear_step(as, delta, pump2d, z0_um, h_um, mid, [](cvector&) {});
  }

  /// As above, with `project` applied to the signal at the midpoint stage. With a band
  /// projection the stage stays inside the band, so the step is second order for the
  /// band-limited equations. `mid` is scratch storage.
  template <class Project>
  double nonlinear_step(cvector& as, cvector* delta, const cvector& pump2d, double z0_um,
                        double h_um, cvector& mid, Project&& project) const {
    const std::size_t ny = grid_.ny, nt = grid_.nt;
    const cplx e0 = std::polar(1.0, -delta_ref_ * z0_um);
    const cplx em = std::polar(1.0, -delta_ref_ * (z0_um + 0.5 * h_um));
    mid.resize(as.size());
    for (std::size_t ix = 0; ix < grid_.nx; ++ix) {
      const cplx ks0 = 2 * chi_grid_ * cos_x_[ix] * e0 * (0.5 * h_um);
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const std::size_t row = (ix * ny + iy) * nt;
        const cplx p = pump2d[ix * ny + iy];
        const cplx* a = as.data() + row;
        const cplx* d = delta ? delta->data() + row : nullptr;
        cplx* m = mid.data() + row;
        for (std::size_t it = 0; it < nt; ++it) m[it] = a[it] + ks0 * (d ? p + d[it] : p) * std::conj(a[it]);
      }
    }
    project(mid);
    double dnp = 0;
    for (std::size_t ix = 0; ix < grid_.nx; ++ix) {
      const double c = chi_grid_ * cos_x_[ix];
      const cplx ksm = 2 * c * em * h_um;
      const cplx kp0 = c * std::conj(e0) * (0.5 * h_um), kpm = c * std::conj(em) * h_um;
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const std::size_t row = (ix * ny + iy) * nt;
        const cplx p = pump2d[ix * ny + iy];
        cplx* a = as.data() + row;
        const cplx* m = mid.data() + row;
        if (!delta) {
          for (std::size_t it = 0; it < nt; ++it) a[it] += ksm * p * std::conj(m[it]);
          continue;
        }
        cplx* d = delta->data() + row;
        for (std::size_t it = 0; it < nt; ++it) {
          const cplx s = a[it];
          const cplx aph = p + d[it] - kp0 * s * s;
          a[it] = s + ksm * aph * std::conj(m[it]);
          d[it] -= kpm * m[it] * m[it];
          dnp += 2 * (std::conj(p) * d[it]).real() + std::norm(d[it]);
        }
      }
    }
    return dnp;
  }

  /// Zeros signal modes outside the 2/3-rule band or the valid set; returns removed photons.
  double dealias(cvector& a) const {
    double removed = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!band_[i]) {
        removed += std::norm(a[i]);
        a[i] = 0;
      }
    return removed;
  }

 private:
  Medium medium_;
  PumpConfig pump_;
  GridSpec grid_;
  double chi_ = 0, chi_grid_ = 0;
  double k_ref_s_ = 0, k_ref_p_ = 0, delta_ref_ = 0;
  std::vector<double> phase_s_, phase_p_;
  std::vector<std::uint8_t> band_, valid_s_, pump_ok_;
  std::size_t evanescent_ = 0, out_of_window_ = 0;
  std::vector<double> cos_x_;
  cvector pump0_direct_, pump0_spec_;
  std::vector<double> pump0_phase_;
  bool stationary_pump_ = true;
  double pump0_photons_ = 0;
  double max_coupling_ = 0;
};

/// Spectral multiplication by exp(i[k_z(w) - k_ref]·dz/2). Field must be spectral.
inline void linear_half_step(SpectralField& field, const SplitStepModel& model, double dz_um) {
  if (field.domain != Domain::spectral)
    throw ConfigError("linear_half_step: field must be in the spectral domain");
  model.linear_step(field.data, field.carrier, 0.5 * dz_um);
}

/// Direct-domain nonlinear substep on (signal, pump). The pump field is the full pump;
/// it is split into the undepleted profile at z and the depletion internally.
inline void nonlinear_step(SpectralField& signal, SpectralField& pump, const SplitStepModel& model,
                           double z_um, double dz_um) {
  if (signal.domain != Domain::direct || pump.domain != Domain::direct)
    throw ConfigError("nonlinear_step: fields must be in the direct domain");
  const auto& g = signal.grid;
  cvector zero(g.nx * g.ny, cplx(0, 0));
  model.nonlinear_step(signal.data, &pump.data, zero, z_um, dz_um);
}

struct StepRecord {
  double z_um = 0;
  double signal_photons = 0;    // Σ|A_s|² (includes the vacuum ½ per mode)
  double filtered_photons = 0;  // cumulative photons removed by the band mask
  double pump_change = 0;       // N_p(z) - N_p(0)
};

struct Snapshot {
  double z_um = 0;
  std::vector<double> sum_abs2;  // Σ over trajectories of |A_s(w)|²
  std::vector<double> sum_abs4;
};

struct TrajectorySummary {
  std::size_t index = 0;
  double manley_rowe_drift = 0;
  double depletion_fraction = 0;
};

struct EnsembleResult {
  GridSpec grid;
  std::size_t n_trajectories = 0;
  std::uint64_t seed = 0;
  double chi = 0;
  GainParameters gains{};
  double q0p = 0;
  double Gx = 0;
  double length_mm = 0;
  bool frozen_pump = false;
  std::vector<std::uint8_t> band;
  std::vector<Snapshot> snapshots;
  std::vector<StepRecord> steps;  // ensemble means
  std::vector<TrajectorySummary> trajectories;
  double pump_photons = 0;
  double delta_ref = 0;
  std::size_t evanescent_modes = 0;
  std::size_t out_of_window_modes = 0;
  double wall_seconds = 0;

  double max_manley_rowe_drift() const {
    double m = 0;
    for (const auto& t : trajectories) m = std::max(m, t.manley_rowe_drift);
    return m;
  }
  double depletion_fraction() const {
    return steps.empty() || pump_photons == 0 ? 0.0 : -steps.back().pump_change / pump_photons;
  }
  std::size_t snapshot_index(double z_mm) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < snapshots.size(); ++k)
      if (std::abs(snapshots[k].z_um - z_mm * 1e3) < std::abs(snapshots[best].z_um - z_mm * 1e3))
        best = k;
    return best;
  }
};

inline unsigned worker_count(unsigned requested, std::size_t trajectories) {
  unsigned w = requested;
  if (w == 0) {
    if (const char* env = std::getenv("NPC_WORKERS")) w = unsigned(std::strtoul(env, nullptr, 10));
  }
  if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
  return unsigned(std::max<std::size_t>(1, std::min<std::size_t>(w, trajectories)));
}

namespace detail {

struct Accumulator {
  std::vector<Snapshot> snapshots;
  std::vector<StepRecord> steps;
  std::vector<TrajectorySummary> trajectories;
};

// Multipliers of one step, with the 1/sqrt(N) factors of the unnormalized FFTs folded in.
struct StepOperators {
  cvector pre_s, post_s, pre_p, post_p;
  double inv_sqrt_n = 1;
};

inline void run_trajectory(const SplitStepModel& model, const PropagationConfig& cfg,
                           std::size_t traj, std::size_t n_steps, double dz,
                           const std::vector<std::size_t>& snap_steps, const FftPlan& plan3,
                           const FftPlan& plan2, const StepOperators& ops, Accumulator& acc) {
  const auto& grid = model.grid();
  const auto& band = model.band();
  SpectralField sig = initialize_wigner(grid, cfg.seed, traj);
  model.dealias(sig.data);  // vacuum outside the band is not simulated
  cvector delta;
  if (!cfg.frozen_pump) delta.assign(grid.size(), cplx(0, 0));
  cvector pump2d, mid;
  const std::size_t n = grid.size();
  const double s2 = ops.inv_sqrt_n * ops.inv_sqrt_n;
  // Keeps the midpoint stage inside the band; without it the step is only first order.
  auto project = [&](cvector& f) {
    if (!cfg.dealias) return;
    plan3.forward_raw(f);
    for (std::size_t i = 0; i < n; ++i) f[i] = band[i] ? f[i] * s2 : cplx(0, 0);
    plan3.backward_raw(f);
  };

  double filtered = 0, dnp = 0;
  double ns = sig.norm2();
  const double n0 = ns;
  auto record = [&](std::size_t step, double z_um) {
    auto& rec = acc.steps[step];
    rec.z_um = z_um;
    rec.signal_photons += ns;
    rec.filtered_photons += filtered;
    rec.pump_change += dnp;
  };
  auto snapshot = [&](std::size_t step) {
    for (std::size_t k = 0; k < snap_steps.size(); ++k) {
      if (snap_steps[k] != step) continue;
      auto& s = acc.snapshots[k];
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::norm(sig.data[i]);
        s.sum_abs2[i] += p;
        s.sum_abs4[i] += p * p;
      }
    }
  };
  record(0, 0.0);
  snapshot(0);
  cplx* a = sig.data.data();
  for (std::size_t s = 0; s < n_steps; ++s) {
    const double z = double(s) * dz;
    for (std::size_t i = 0; i < n; ++i) a[i] *= ops.pre_s[i];
    plan3.backward_raw(sig.data);
    if (!cfg.frozen_pump) {
      for (std::size_t i = 0; i < n; ++i) delta[i] *= ops.pre_p[i];
      plan3.backward_raw(delta);
    }
    model.pump_at(z + 0.5 * dz, pump2d, plan2);
    const double dn = model.nonlinear_step(sig.data, cfg.frozen_pump ? nullptr : &delta, pump2d,
                                           z, dz, mid, project);
    plan3.forward_raw(sig.data);
    if (!cfg.frozen_pump) {
      dnp = dn;
      plan3.forward_raw(delta);
      for (std::size_t i = 0; i < n; ++i) delta[i] *= ops.post_p[i];
    }
    ns = 0;
    if (cfg.dealias) {
      double removed = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (band[i]) {
          a[i] *= ops.post_s[i];
          ns += std::norm(a[i]);
        } else {
          removed += std::norm(a[i]);
          a[i] = 0;
        }
      }
      filtered += removed * s2;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        a[i] *= ops.post_s[i];
        ns += std::norm(a[i]);
      }
    }
    if (!std::isfinite(ns)) {
      double amax = 0;
      for (const auto& v : sig.data)
        if (std::isfinite(std::abs(v))) amax = std::max(amax, std::abs(v));
      std::ostringstream os;
      os << "propagation diverged at z = " << (z + dz) * 1e-3 << " mm (trajectory " << traj
         << ", max |A| = " << amax << ")";
      throw DivergenceError(os.str(), z + dz, amax);
    }
    record(s + 1, z + dz);
    snapshot(s + 1);
  }
  TrajectorySummary t;
  t.index = traj;
  // The band-limited equations conserve N_s + 2 N_p; what the band removes each step is
  // discretization residue and is reported separately, not counted.
  const double converted = ns - n0;
  const double invariant = ns + 2 * dnp - n0;
  t.manley_rowe_drift = (cfg.frozen_pump || converted == 0) ? 0.0 : std::abs(invariant / converted);
  t.depletion_fraction = model.pump_photons() > 0 ? -dnp / model.pump_photons() : 0.0;
  acc.trajectories.push_back(t);
}

}  // namespace detail

/// Runs the stochastic ensemble: n trajectories of symmetric split-step integration
/// (half linear, nonlinear, half linear per dz) over the crystal length.
/// Trajectory i is assigned to worker i mod W and worker sums are merged in order,
/// so results are bit reproducible for a given seed and worker count.
inline EnsembleResult propagate(const PropagationConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  if (cfg.trajectories == 0) throw ConfigError("simulation.trajectories must be >= 1");
  const Medium medium(cfg.crystal);
  SplitStepModel model(medium, cfg.pump, cfg.grid, cfg.chi_override);

  const double length = medium.spec().length_um();
  const std::size_t n_steps = std::max<std::size_t>(1, std::size_t(std::llround(length / cfg.grid.dz_um)));
  const double dz = length / double(n_steps);
  if (model.step_phase(dz) > cfg.max_step_phase) {
    std::ostringstream os;
    os << "simulation.dz_um: nonlinear phase per step " << model.step_phase(dz) << " rad exceeds "
       << cfg.max_step_phase << "; use dz_um <= " << cfg.max_step_phase / model.step_phase(1.0);
    throw ConfigError(os.str());
  }

  std::vector<std::size_t> snap_steps;
  std::vector<double> requested = cfg.snapshots_z_mm;
  if (requested.empty()) requested.push_back(medium.spec().length_mm);
  for (double zmm : requested) {
    if (zmm < 0 || zmm > medium.spec().length_mm + 1e-9)
      throw ConfigError("simulation.snapshots_z_mm: values must lie in [0, crystal.length_mm]");
    const std::size_t s = std::size_t(std::llround(zmm * 1e3 / dz));
    if (std::abs(double(s) * dz - zmm * 1e3) > 1e-6 * dz)
      warn("snapshot at " + std::to_string(zmm) + " mm moved to the nearest step boundary");
    snap_steps.push_back(s);
  }

  const auto& grid = model.grid();
  detail::StepOperators ops;
  ops.inv_sqrt_n = 1.0 / std::sqrt(double(grid.size()));
  ops.pre_s = model.multipliers(Carrier::signal, 0.5 * dz);
  for (auto& v : ops.pre_s) v *= ops.inv_sqrt_n;
  ops.post_s = ops.pre_s;
  if (!cfg.frozen_pump) {
    ops.pre_p = model.multipliers(Carrier::pump, 0.5 * dz);
    for (auto& v : ops.pre_p) v *= ops.inv_sqrt_n;
    ops.post_p = ops.pre_p;
  }
  const unsigned workers = worker_count(cfg.workers, cfg.trajectories);

  std::vector<detail::Accumulator> accs(workers);
  for (auto& a : accs) {
    a.steps.assign(n_steps + 1, StepRecord{});
    a.snapshots.resize(snap_steps.size());
    for (std::size_t k = 0; k < snap_steps.size(); ++k) {
      a.snapshots[k].z_um = double(snap_steps[k]) * dz;
      a.snapshots[k].sum_abs2.assign(grid.size(), 0.0);
      a.snapshots[k].sum_abs4.assign(grid.size(), 0.0);
    }
  }

  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      const FftPlan plan3(grid.nx, grid.ny, grid.nt, cfg.fft_flags);
      const FftPlan plan2(grid.nx, grid.ny, 1);
      for (std::size_t t = w; t < cfg.trajectories; t += workers) {
        detail::run_trajectory(model, cfg, t, n_steps, dz, snap_steps, plan3, plan2, ops,
                               accs[w]);
        const std::size_t d = ++done;
        if (cfg.progress) {
          std::lock_guard lock(progress_mutex);
          cfg.progress(d, cfg.trajectories);
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  EnsembleResult r;
  r.grid = grid;
  r.grid.dz_um = dz;
  r.n_trajectories = cfg.trajectories;
  r.seed = cfg.seed;
  r.chi = model.chi();
  r.gains = model.gains();
  r.q0p = cfg.pump.q0p();
  r.Gx = medium.Gx();
  r.length_mm = medium.spec().length_mm;
  r.frozen_pump = cfg.frozen_pump;
  r.band = model.band();
  r.pump_photons = model.pump_photons();
  r.delta_ref = model.delta_ref();
  r.evanescent_modes = model.evanescent_modes();
  r.out_of_window_modes = model.out_of_window_modes();
  r.snapshots = std::move(accs[0].snapshots);
  r.steps = std::move(accs[0].steps);
  r.trajectories = std::move(accs[0].trajectories);
  for (unsigned w = 1; w < workers; ++w) {
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
      auto& dst = r.snapshots[k];
      const auto& src = accs[w].snapshots[k];
      for (std::size_t i = 0; i < dst.sum_abs2.size(); ++i) {
        dst.sum_abs2[i] += src.sum_abs2[i];
        dst.sum_abs4[i] += src.sum_abs4[i];
      }
    }
    for (std::size_t s = 0; s < r.steps.size(); ++s) {
      r.steps[s].signal_photons += accs[w].steps[s].signal_photons;
      r.steps[s].filtered_photons += accs[w].steps[s].filtered_photons;
      r.steps[s].pump_change += accs[w].steps[s].pump_change;
    }
    r.trajectories.insert(r.trajectories.end(), accs[w].trajectories.begin(),
                          accs[w].trajectories.end());
  }
  const double inv_n = 1.0 / double(cfg.trajectories);
  for (auto& s : r.steps) {
    s.signal_photons *= inv_n;
    s.filtered_photons *= inv_n;
    s.pump_change *= inv_n;
  }
  std::sort(r.trajectories.begin(), r.trajectories.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return r;
}

/// Photon number per mode, ⟨|A_s|²⟩ - ½, at a snapshot. Modes outside the simulated
/// band are reported as 0.
inline std::vector<double> photon_spectrum(const EnsembleResult& r, std::size_t snapshot) {
  if (r.n_trajectories == 0) throw ConfigError("photon_spectrum: empty ensemble");
  if (snapshot >= r.snapshots.size()) throw ConfigError("photon_spectrum: no such snapshot");
  const auto& s = r.snapshots[snapshot];
  std::vector<double> out(s.sum_abs2.size(), 0.0);
  const double inv = 1.0 / double(r.n_trajectories);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (r.band[i]) out[i] = s.sum_abs2[i] * inv - 0.5;
  return out;
}

/// Standard error of the per-mode mean ⟨|A_s|²⟩ over trajectories.
inline std::vector<double> photon_spectrum_stderr(const EnsembleResult& r, std::size_t snapshot) {
  const auto& s = r.snapshots.at(snapshot);
  const double n = double(r.n_trajectories);
  std::vector<double> out(s.sum_abs2.size(), 0.0);
  if (r.n_trajectories < 2) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = s.sum_abs2[i] / n;
    const double var = std::max(0.0, (s.sum_abs4[i] / n - m * m) * n / (n - 1));
    out[i] = std::sqrt(var / n);
  }
  return out;
}

struct SectionPoint {
  double qx;
  double wavelength_um;
  double photons;
};

/// (q_x, λ) section of the spectrum at q_y = 0.
inline std::vector<SectionPoint> spectrum_section_qx_lambda(const EnsembleResult& r,
                                                            std::size_t snapshot,
                                                            double omega_signal) {
  const auto spec = photon_spectrum(r, snapshot);
  const auto& g = r.grid;
  std::vector<SectionPoint> out;
  for (std::size_t ix = 0; ix < g.nx; ++ix)
    for (std::size_t it = 0; it < g.nt; ++it) {
      const std::size_t i = g.index(ix, 0, it);
      if (!r.band[i]) continue;
      out.push_back({g.qx(ix), units::two_pi * units::c_um_per_ps / (omega_signal + g.omega(it)),
                     spec[i]});
    }
  return out;
}

}  // namespace npc
