#pragma once

#include <array>
#include <string>
#include <string_view>

#include "npc/errors.hpp"

namespace npc {

/// QPM surface labels. At spatial resonance Σ12 and Σ21 merge into Σ0.
enum class Branch { Sigma0, Sigma11, Sigma22, Sigma12, Sigma21 };

inline constexpr std::array<Branch, 5> all_branches{Branch::Sigma0, Branch::Sigma11,
                                                   Branch::Sigma22, Branch::Sigma12,
                                                   Branch::Sigma21};

inline std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::Sigma0: return "S0";
    case Branch::Sigma11: return "S11";
    case Branch::Sigma22: return "S22";
    case Branch::Sigma12: return "S12";
    case Branch::Sigma21: return "S21";
  }
  return "?";
}

inline Branch branch_from_string(std::string_view s) {
  for (Branch b : all_branches)
    if (s == to_string(b)) return b;
  throw ConfigError("unknown branch label '" + std::string(s) +
                    "' (expected S0, S11, S22, S12 or S21)");
}

/// Transverse resultant ρ (along x) of pump and lattice wavevectors for a branch:
/// ρ11 = q0p + Gx, ρ12 = q0p - Gx, ρ21 = -q0p + Gx, ρ22 = -q0p - Gx; ρ0 = 0.
inline double resultant(Branch b, double q0p, double Gx) noexcept {
  switch (b) {
    case Branch::Sigma0: return 0.0;
    case Branch::Sigma11: return q0p + Gx;
    case Branch::Sigma12: return q0p - Gx;
    case Branch::Sigma21: return -q0p + Gx;
    case Branch::Sigma22: return -q0p - Gx;
  }
  return 0.0;
}

}  // namespace npc
