#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "npc/constants.hpp"
#include "npc/errors.hpp"

namespace npc {

/// Temperature-dependent Sellmeier relation for the extraordinary index,
///
///   n_e^2 = a1 + b1 f + (a2 + b2 f) / (λ^2 - (a3 + b3 f)^2)
///              + (a4 + b4 f) / (λ^2 - a5^2) - a6 λ^2,
///   f = (T - t_ref)(T + t_ref + 2·273.16),
///
/// with λ in µm and T in °C. The coefficient set and its validity window are
/// configuration data; `lithium_tantalate()` returns the shipped default.
struct SellmeierCoefficients {
  std::array<double, 6> a{};
  std::array<double, 4> b{};
  double t_ref_C = 24.5;
};

class DispersionModel {
 public:
  DispersionModel(SellmeierCoefficients coefficients, double lambda_min_um, double lambda_max_um,
                  double t_min_C, double t_max_C, std::string name = "custom")
      : coeff_(coefficients),
        lambda_min_(lambda_min_um),
        lambda_max_(lambda_max_um),
        t_min_(t_min_C),
        t_max_(t_max_C),
        name_(std::move(name)) {
    if (!(lambda_min_ > 0 && lambda_max_ > lambda_min_))
      throw ConfigError("sellmeier: invalid wavelength window");
    if (!(t_max_ > t_min_)) throw ConfigError("sellmeier: invalid temperature window");
  }

  /// MgO-doped LiTaO3, extraordinary polarization. The UV oscillator strength a2 is
  /// refit (0.08488 -> 0.084748) so that the degenerate 1064 nm shared mode is
  /// quasi-phase-matched at Λ = 7.782 µm, 85 °C.
  static DispersionModel lithium_tantalate() {
    SellmeierCoefficients c;
    c.a = {4.5615, 0.084748, 0.1927, 5.5832, 8.3067, 0.021696};
    c.b = {4.782e-7, 3.0913e-8, 2.7326e-8, 1.4837e-5};
    c.t_ref_C = 24.5;
    return DispersionModel(c, 0.4, 4.0, 20.0, 250.0, "LiTaO3:MgO extraordinary");
  }

  double lambda_min_um() const noexcept { return lambda_min_; }
  double lambda_max_um() const noexcept { return lambda_max_; }
  double t_min_C() const noexcept { return t_min_; }
  double t_max_C() const noexcept { return t_max_; }
  const std::string& name() const noexcept { return name_; }
  const SellmeierCoefficients& coefficients() const noexcept { return coeff_; }

  bool in_window(double lambda_um) const noexcept {
    return lambda_um >= lambda_min_ && lambda_um <= lambda_max_;
  }

  double refractive_index(double lambda_um, double temperature_C) const {
    if (!in_window(lambda_um)) {
      std::ostringstream os;
      os << "refractive_index: wavelength " << lambda_um << " µm outside valid window ["
         << lambda_min_ << ", " << lambda_max_ << "] µm";
      throw DomainError(os.str());
    }
    if (temperature_C < t_min_ || temperature_C > t_max_) {
      std::ostringstream os;
      os << "refractive_index: temperature " << temperature_C << " °C outside valid window ["
         << t_min_ << ", " << t_max_ << "] °C";
      throw DomainError(os.str());
    }
    const auto& a = coeff_.a;
    const auto& b = coeff_.b;
    const double f = (temperature_C - coeff_.t_ref_C) * (temperature_C + coeff_.t_ref_C + 546.32);
    const double l2 = lambda_um * lambda_um;
    const double uv = a[2] + b[2] * f;
    const double n2 = a[0] + b[0] * f + (a[1] + b[1] * f) / (l2 - uv * uv) +
                      (a[3] + b[3] * f) / (l2 - a[4] * a[4]) - a[5] * l2;
    return std::sqrt(n2);
  }

  /// Wavenumber k(ω) = ω n(ω)/c in µm⁻¹ for ω in rad/ps.
  double wavenumber(double omega, double temperature_C) const {
    const double lambda = units::two_pi * units::c_um_per_ps / omega;
    return omega * refractive_index(lambda, temperature_C) / units::c_um_per_ps;
  }

  bool omega_in_window(double omega) const noexcept {
    return omega > 0 && in_window(units::two_pi * units::c_um_per_ps / omega);
  }

 private:
  SellmeierCoefficients coeff_;
  double lambda_min_, lambda_max_, t_min_, t_max_;
  std::string name_;
};

}  // namespace npc
