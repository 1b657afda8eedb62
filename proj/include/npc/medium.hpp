#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <variant>

#include "npc/constants.hpp"
#include "npc/dispersion.hpp"
#include "npc/errors.hpp"
#include "npc/roots.hpp"

namespace npc {

using cplx = std::complex<double>;

enum class Field { signal, pump };
enum class KzMode { exact, paraxial };

/// A point of the 3D Fourier space: transverse wavevector (µm⁻¹) and frequency
/// offset from the carrier (rad/ps).
struct Mode {
  double qx = 0;
  double qy = 0;
  double omega = 0;
  double q2() const noexcept { return qx * qx + qy * qy; }
};

struct CrystalSpec {
  double poling_period_um = 7.782;
  double length_mm = 10.0;
  double temperature_C = 85.0;
  double d01_over_deff = 0.32;
  double deff_pm_per_V = 13.8;
  double pump_wavelength_um = 0.532;
  DispersionModel dispersion = DispersionModel::lithium_tantalate();

  void validate() const {
    if (!(poling_period_um > 0)) throw ConfigError("crystal.poling_period_um must be > 0");
    if (!(length_mm > 0)) throw ConfigError("crystal.length_mm must be > 0");
    if (!(d01_over_deff > 0)) throw ConfigError("crystal.d01_over_deff must be > 0");
    if (!(deff_pm_per_V > 0)) throw ConfigError("crystal.deff_pm_per_V must be > 0");
    if (!(pump_wavelength_um > 0)) throw ConfigError("crystal.pump_wavelength_um must be > 0");
  }

  /// Transverse and longitudinal components of the fundamental reciprocal vectors
  /// G1 = (-Gx, -Gz), G2 = (+Gx, -Gz) of the hexagonal lattice.
  double Gx() const noexcept { return units::two_pi / (std::sqrt(3.0) * poling_period_um); }
  double Gz() const noexcept { return units::two_pi / poling_period_um; }
  double length_um() const noexcept { return length_mm * units::um_per_mm; }
};

/// Crystal with the carrier quantities of the degenerate process cached. Immutable.
class Medium {
 public:
  explicit Medium(CrystalSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    omega_p_ = units::two_pi * units::c_um_per_ps / spec_.pump_wavelength_um;
    omega_s_ = 0.5 * omega_p_;
    k_s_ = k(Field::signal, 0.0);
    k_p_ = k(Field::pump, 0.0);
    // Fourth-order central differences with a 1 rad/ps step; k is smooth on that scale.
    const double h = 1.0;
    auto ks = [&](double w) { return k(Field::signal, w); };
    auto kp = [&](double w) { return k(Field::pump, w); };
    k_s1_ = (-ks(2 * h) + 8 * ks(h) - 8 * ks(-h) + ks(-2 * h)) / (12 * h);
    k_p1_ = (-kp(2 * h) + 8 * kp(h) - 8 * kp(-h) + kp(-2 * h)) / (12 * h);
    k_s2_ = (-ks(2 * h) + 16 * ks(h) - 30 * k_s_ + 16 * ks(-h) - ks(-2 * h)) / (12 * h * h);
  }

  const CrystalSpec& spec() const noexcept { return spec_; }
  double Gx() const noexcept { return spec_.Gx(); }
  double Gz() const noexcept { return spec_.Gz(); }
  double omega_signal() const noexcept { return omega_s_; }
  double omega_pump() const noexcept { return omega_p_; }
  double k_signal() const noexcept { return k_s_; }
  double k_pump() const noexcept { return k_p_; }
  /// dk_s/dΩ (ps/µm), inverse group velocity of the signal.
  double k1_signal() const noexcept { return k_s1_; }
  double k1_pump() const noexcept { return k_p1_; }
  /// d²k_s/dΩ² (ps²/µm), group-velocity dispersion of the signal.
  double k2_signal() const noexcept { return k_s2_; }

  double carrier(Field f) const noexcept { return f == Field::signal ? omega_s_ : omega_p_; }

  /// Full-dispersion wavenumber at carrier + Ω.
  double k(Field f, double omega_offset) const {
    return spec_.dispersion.wavenumber(carrier(f) + omega_offset, spec_.temperature_C);
  }

  /// Second-order Taylor expansion of the signal wavenumber around the carrier.
  double k_signal_taylor(double omega_offset) const noexcept {
    return k_s_ + k_s1_ * omega_offset + 0.5 * k_s2_ * omega_offset * omega_offset;
  }

  bool in_window(Field f, double omega_offset) const noexcept {
    return spec_.dispersion.omega_in_window(carrier(f) + omega_offset);
  }

  double refractive_index(Field f, double omega_offset = 0.0) const {
    return k(f, omega_offset) * units::c_um_per_ps / (carrier(f) + omega_offset);
  }

  /// Longitudinal wavevector component. Exact mode: sqrt(k² - q²), throws
  /// EvanescentError when q² > k². Paraxial: k - q²/(2k); with `taylor` the
  /// wavenumber itself is expanded to second order in Ω (signal only).
  double wavevector_z(double omega_offset, double qx, double qy, Field f, KzMode mode,
                      bool taylor = false) const {
    const double kk = (taylor && f == Field::signal) ? k_signal_taylor(omega_offset)
                                                     : k(f, omega_offset);
    const double q2 = qx * qx + qy * qy;
    if (mode == KzMode::paraxial) return kk - q2 / (2 * kk);
    const double kz2 = kk * kk - q2;
    if (kz2 < 0) {
      std::ostringstream os;
      os << "wavevector_z: evanescent mode |q|=" << std::sqrt(q2) << " > k=" << kk << " µm⁻¹";
      throw EvanescentError(os.str());
    }
    return std::sqrt(kz2);
  }

  double wavevector_z(const Mode& m, Field f, KzMode mode = KzMode::exact) const {
    return wavevector_z(m.omega, m.qx, m.qy, f, mode);
  }

 private:
  CrystalSpec spec_;
  double omega_s_ = 0, omega_p_ = 0, k_s_ = 0, k_p_ = 0, k_s1_ = 0, k_p1_ = 0, k_s2_ = 0;
};

/// D = k_sz(w_s) + k_sz(w_i) - k_pz(w_p) + G_z. The pump mode is fixed by the caller
/// from energy and transverse-momentum conservation.
inline double phase_mismatch(const Medium& medium, const Mode& signal, const Mode& idler,
                             const Mode& pump, KzMode mode = KzMode::exact) {
  return medium.wavevector_z(signal, Field::signal, mode) +
         medium.wavevector_z(idler, Field::signal, mode) -
         medium.wavevector_z(pump, Field::pump, mode) + medium.Gz();
}

/// Residual of the degeneracy condition 2k_s - k_pz + G_z - |2Gx|²/(4k_s) = 0 for the
/// shared mode at q = (Gx, 0), Ω = 0 with the pump tilted by Gx. The exact form uses
/// 2 k_sz(Gx) in place of the paraxial 2k_s - Gx²/k_s.
inline double degeneracy_residual(const DispersionModel& dispersion, double temperature_C,
                                  double pump_wavelength_um, double poling_period_um,
                                  KzMode mode = KzMode::exact) {
  const double Gz = units::two_pi / poling_period_um;
  const double Gx = Gz / std::sqrt(3.0);
  const double kp = units::two_pi * dispersion.refractive_index(pump_wavelength_um, temperature_C) /
                    pump_wavelength_um;
  const double ls = 2 * pump_wavelength_um;
  const double ks = units::two_pi * dispersion.refractive_index(ls, temperature_C) / ls;
  const double kpz = std::sqrt(kp * kp - Gx * Gx);
  const double two_ksz = mode == KzMode::exact ? 2 * std::sqrt(ks * ks - Gx * Gx)
                                               : 2 * ks - Gx * Gx / ks;
  return two_ksz - kpz + Gz;
}

/// Poling period (µm) that puts the degenerate shared modes at q = (±Gx, 0) on
/// quasi-phase-matching.
inline double solve_poling_period(const DispersionModel& dispersion, double temperature_C,
                                  double pump_wavelength_um = 0.532,
                                  KzMode mode = KzMode::exact) {
  auto f = [&](double period) {
    return degeneracy_residual(dispersion, temperature_C, pump_wavelength_um, period, mode);
  };
  // The residual decreases monotonically with the period in this bracket.
  auto root = bisect(f, 2.0, 40.0, 1e-13);
  if (!root || std::abs(root->residual) > 1e-6)
    throw ConfigError("solve_poling_period: no quasi-phase-matching period in [2, 40] µm");
  return root->x;
}

/// Coupling constant χ ≃ d01 sqrt(ħ ω_p ω_s² / (8 ε0 c³ n_p n_s²)), returned in
/// mm⁻¹ per unit pump amplitude, amplitudes being sqrt(photons / (µm² ps)).
inline double coupling_constant(const Medium& medium) {
  const auto& s = medium.spec();
  const double d01 = s.d01_over_deff * s.deff_pm_per_V * 1e-12;  // m/V
  const double wp = medium.omega_pump() * 1e12;                  // rad/s
  const double ws = medium.omega_signal() * 1e12;
  const double np = medium.refractive_index(Field::pump);
  const double ns = medium.refractive_index(Field::signal);
  const double c3 = units::c_si * units::c_si * units::c_si;
  const double chi_si = d01 * std::sqrt(units::hbar_si * wp * ws * ws /
                                        (8 * units::eps0_si * c3 * np * ns * ns));  // sqrt(s)
  // sqrt(photons/(µm² ps)) = 1e12 / (m sqrt(s)); result in 1/m, then to 1/mm.
  return chi_si * 1e12 / 1e3;
}

struct PlaneWave {};
struct Gaussian {
  double waist_x_um;
  double waist_y_um;
};
using PumpProfile = std::variant<PlaneWave, Gaussian>;

/// Dual pump A_p(x) = α1 e^{i q0p x} + α2 e^{-i q0p x} (times an optional elliptical
/// Gaussian envelope). Pump 1 is the stronger wave; if |α2| > |α1| on input the two
/// waves are swapped, which mirrors the x axis (`mirrored` records it).
class PumpConfig {
 public:
  PumpConfig(cplx alpha1, cplx alpha2, double q0p_um_inv, PumpProfile profile = PlaneWave{})
      : alpha1_(alpha1), alpha2_(alpha2), q0p_(q0p_um_inv), profile_(profile) {
    if (std::abs(alpha2_) > std::abs(alpha1_)) {
      std::swap(alpha1_, alpha2_);
      mirrored_ = true;
    }
    if (!(q0p_ >= 0)) throw ConfigError("pump.q0p_um_inv must be >= 0");
    if (auto* g = std::get_if<Gaussian>(&profile_)) {
      if (!(g->waist_x_um > 0 && g->waist_y_um > 0))
        throw ConfigError("pump waists must be > 0");
    }
  }

  /// Amplitudes back-solved from the single-pump-equivalent gain ḡ and the ratio r = g2/g1.
  static PumpConfig from_gain(double gbar_per_mm, cplx r, double q0p_um_inv, double chi,
                              PumpProfile profile = PlaneWave{}) {
    if (!(gbar_per_mm > 0)) throw ConfigError("pump.gbar_per_mm must be > 0");
    if (std::abs(r) > 1.0 + 1e-12) throw ConfigError("pump ratio |r| must be <= 1");
    const double a1 = gbar_per_mm / (chi * std::sqrt(1.0 + std::norm(r)));
    return PumpConfig(cplx(a1, 0), r * a1, q0p_um_inv, profile);
  }

  cplx alpha1() const noexcept { return alpha1_; }
  cplx alpha2() const noexcept { return alpha2_; }
  double q0p() const noexcept { return q0p_; }
  const PumpProfile& profile() const noexcept { return profile_; }
  bool mirrored() const noexcept { return mirrored_; }
  bool is_gaussian() const noexcept { return std::holds_alternative<Gaussian>(profile_); }

 private:
  cplx alpha1_, alpha2_;
  double q0p_;
  PumpProfile profile_;
  bool mirrored_ = false;
};

/// g1 = χα1, g2 = χα2 (mm⁻¹), ḡ = sqrt(|g1|² + |g2|²), r = g2/g1.
struct GainParameters {
  cplx g1;
  cplx g2;
  double gbar;
  cplx r;

  static GainParameters from(cplx g1, cplx g2) {
    if (std::abs(g1) == 0 && std::abs(g2) == 0)
      throw ConfigError("gain_parameters: both pump amplitudes are zero");
    if (std::abs(g2) > std::abs(g1)) std::swap(g1, g2);
    return GainParameters{g1, g2, std::hypot(std::abs(g1), std::abs(g2)), g2 / g1};
  }

  /// Parameters for a given ḡ and complex ratio r, with g1 real and positive.
  static GainParameters from_ratio(double gbar, cplx r) {
    if (std::abs(r) > 1.0 + 1e-12) throw ConfigError("gain ratio |r| must be <= 1");
    const double g1 = gbar / std::sqrt(1.0 + std::norm(r));
    return from(cplx(g1, 0), r * g1);
  }
};

inline GainParameters gain_parameters(const PumpConfig& pump, double chi) {
  return GainParameters::from(chi * pump.alpha1(), chi * pump.alpha2());
}

}  // namespace npc
