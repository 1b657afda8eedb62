#pragma once

#include <numbers>

// Internal unit system: lengths in µm, times in ps, angular frequencies in rad/ps.
namespace npc::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double c_um_per_ps = 299.792458;

// SI values, only used to evaluate the coupling constant.
inline constexpr double hbar_si = 1.054571817e-34;
inline constexpr double eps0_si = 8.8541878128e-12;
inline constexpr double c_si = 299792458.0;

inline constexpr double um_per_mm = 1000.0;

inline constexpr double golden_ratio = std::numbers::phi;

}  // namespace npc::units
