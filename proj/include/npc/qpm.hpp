#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "npc/branch.hpp"
#include "npc/constants.hpp"
#include "npc/errors.hpp"
#include "npc/medium.hpp"
#include "npc/roots.hpp"

namespace npc {

struct QpmSample {
  double qx;
  double qy;
  double omega;
  double residual;  // |D| at the sample, µm⁻¹
};

struct QpmBranch {
  Branch label;
  double resultant;  // ρ along x, µm⁻¹
  std::vector<QpmSample> samples;
};

struct QpmOptions {
  double tolerance = 1e-6;  // accepted |D|, µm⁻¹
  KzMode kz = KzMode::exact;
  // Roots closer than this to the ray origin collapse to an explicit vertex (µm⁻¹).
  double vertex_cell = 0.0;
};

/// Phase mismatch of the pair (q, Ω), (ρ e_x - q, -Ω) on a branch with resultant ρ.
/// Evanescent signal or idler maps to -inf so that ray searches treat it as "outside".
inline double branch_mismatch(const Medium& medium, double rho, double q0p, double qx, double qy,
                              double omega, KzMode mode = KzMode::exact) {
  try {
    return medium.wavevector_z(omega, qx, qy, Field::signal, mode) +
           medium.wavevector_z(-omega, rho - qx, -qy, Field::signal, mode) -
           medium.wavevector_z(0.0, q0p, 0.0, Field::pump, mode) + medium.Gz();
  } catch (const EvanescentError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

/// Center of the (near-circular) branch cross-section at Ω: the point where the
/// radial derivative of D vanishes, ρ k(Ω)/(k(Ω) + k(-Ω)).
inline double branch_center(const Medium& medium, double rho, double omega) {
  const double k1 = medium.k(Field::signal, omega);
  const double k2 = medium.k(Field::signal, -omega);
  return rho * k1 / (k1 + k2);
}

/// Samples of the zero set of D on a branch by radial bisection along rays from the
/// cross-section center, one ray per (Ω, angle). Returns found roots only.
inline QpmBranch exact_branch(Branch label, const Medium& medium, double q0p,
                              const std::vector<double>& omega_grid,
                              const std::vector<double>& angle_grid, const QpmOptions& opt = {}) {
  if (omega_grid.empty() || angle_grid.empty())
    throw ConfigError("exact_branch: omega and angle grids must be nonempty");
  const double rho = resultant(label, q0p, medium.Gx());
  const double cell = opt.vertex_cell > 0 ? opt.vertex_cell : medium.Gx() / 16;
  QpmBranch out{label, rho, {}};
  for (double w : omega_grid) {
    if (!medium.in_window(Field::signal, w) || !medium.in_window(Field::signal, -w)) continue;
    const double cx = branch_center(medium, rho, w);
    auto D = [&](double qx, double qy) { return branch_mismatch(medium, rho, q0p, qx, qy, w, opt.kz); };
    const double d0 = D(cx, 0.0);
    if (std::abs(d0) <= opt.tolerance ||
        (d0 < 0 && std::sqrt(medium.k_signal() * -d0) < cell)) {
      out.samples.push_back({cx, 0.0, w, std::abs(d0)});
      continue;
    }
    if (d0 < 0) continue;
    for (double a : angle_grid) {
      const double ux = std::cos(a), uy = std::sin(a);
      auto along = [&](double s) { return D(cx + s * ux, s * uy); };
      double hi = 0.05;
      while (along(hi) > 0 && hi < 1e3) hi *= 2;
      if (!(along(hi) <= 0)) continue;
      auto root = bisect(along, 0.0, hi, 1e-15);
      if (!root || !std::isfinite(root->residual) || std::abs(root->residual) > opt.tolerance)
        continue;
      out.samples.push_back({cx + root->x * ux, root->x * uy, w, std::abs(root->residual)});
    }
  }
  return out;
}

struct Ring {
  double center_x;
  double center_y;
  double radius;
};

/// Largest |Ω| for which the second-order Taylor model of k(Ω) + k(-Ω) stays within
/// `fraction` of its own Ω² term. Scanned in 0.5 rad/ps steps.
inline double paraxial_window(const Medium& medium, double fraction = 0.05) {
  const double k2 = medium.k2_signal();
  double last = 0;
  for (double w = 0.5;; w += 0.5) {
    if (!medium.in_window(Field::signal, w) || !medium.in_window(Field::signal, -w)) break;
    const double exact = medium.k(Field::signal, w) + medium.k(Field::signal, -w) -
                         2 * medium.k_signal();
    const double taylor = k2 * w * w;
    if (std::abs(exact - taylor) > fraction * std::abs(taylor)) break;
    last = w;
  }
  return last;
}

/// D0(Ω) of a branch in the paraxial model: the exact mismatch at the degenerate
/// cross-section center plus the second-order Taylor change of k(Ω) + k(-Ω) and of the
/// ρ²/(2(k1+k2)) offset (µm⁻¹).
inline double paraxial_d0(Branch label, const Medium& medium, double q0p, double omega) {
  const double rho = resultant(label, q0p, medium.Gx());
  const double ks = medium.k_signal();
  const double k1 = medium.k_signal_taylor(omega);
  const double k2 = medium.k_signal_taylor(-omega);
  const double vertex = branch_mismatch(medium, rho, q0p, 0.5 * rho, 0.0, 0.0);
  return vertex + (k1 + k2 - 2 * ks) - rho * rho / (2 * (k1 + k2)) + rho * rho / (4 * ks);
}

/// Paraxial cross-section of a branch at Ω: center ρ k1/(k1+k2) ≈ ρ/2 and radius
/// sqrt(2 k1 k2 D0/(k1+k2)) ≈ sqrt(k_s D0). None when D0 < 0 or |Ω| exceeds
/// `max_omega` (0 → paraxial_window()).
inline std::optional<Ring> paraxial_ring(Branch label, const Medium& medium, double q0p,
                                         double omega, double max_omega = 0.0) {
  const double window = max_omega > 0 ? max_omega : paraxial_window(medium);
  if (std::abs(omega) > window) return std::nullopt;
  const double rho = resultant(label, q0p, medium.Gx());
  const double k1 = medium.k_signal_taylor(omega);
  const double k2 = medium.k_signal_taylor(-omega);
  double d0 = paraxial_d0(label, medium, q0p, omega);
  if (d0 < -1e-10) return std::nullopt;
  d0 = std::max(d0, 0.0);  // vertex: rounding of the degeneracy residual
  return Ring{rho * k1 / (k1 + k2), 0.0, std::sqrt(2 * k1 * k2 * d0 / (k1 + k2))};
}

struct SharedPoint {
  double omega;
  double qy;  // ≥ 0; the line is symmetric in q_y
  double residual;
};

struct SharedModeLine {
  Branch first;
  Branch second;
  double qx;
  std::vector<SharedPoint> points;
};

/// Intersection of two branches. Both mismatches depend on q only through |q| and
/// |ρ - q|, so they coincide on the plane q_x = (ρ_a + ρ_b)/2; q_y(Ω) solves D = 0
/// there. Ω values without an intersection are skipped.
inline SharedModeLine shared_modes(std::pair<Branch, Branch> pair, const Medium& medium,
                                   double q0p, const std::vector<double>& omega_grid,
                                   double tolerance = 1e-6) {
  if (pair.first == pair.second) throw ConfigError("shared_modes: branches must differ");
  const double ra = resultant(pair.first, q0p, medium.Gx());
  const double rb = resultant(pair.second, q0p, medium.Gx());
  SharedModeLine line{pair.first, pair.second, 0.5 * (ra + rb), {}};
  if (std::abs(ra - rb) < 1e-12) return line;  // same surface, no line
  for (double w : omega_grid) {
    if (!medium.in_window(Field::signal, w) || !medium.in_window(Field::signal, -w)) continue;
    auto D = [&](double qy) { return branch_mismatch(medium, ra, q0p, line.qx, qy, w); };
    const double d0 = D(0.0);
    if (std::abs(d0) <= tolerance) {
      line.points.push_back({w, 0.0, std::abs(d0)});
      continue;
    }
    if (d0 < 0) continue;
    double hi = 0.05;
    while (D(hi) > 0 && hi < 1e3) hi *= 2;
    if (!(D(hi) <= 0)) continue;
    auto root = bisect(D, 0.0, hi, 1e-15);
    if (!root || std::abs(root->residual) > tolerance) continue;
    line.points.push_back({w, root->x, std::abs(root->residual)});
  }
  return line;
}

/// Branch pairs whose intersections carry shared modes: at resonance the lines
/// q_x = ±G_x (and the weak q_x = 0 line); off resonance the four lines ±q0p, ±G_x.
inline std::vector<std::pair<Branch, Branch>> shared_pairs(bool resonant) {
  if (resonant)
    return {{Branch::Sigma0, Branch::Sigma11},
            {Branch::Sigma0, Branch::Sigma22},
            {Branch::Sigma11, Branch::Sigma22}};
  return {{Branch::Sigma11, Branch::Sigma12},
          {Branch::Sigma11, Branch::Sigma21},
          {Branch::Sigma22, Branch::Sigma12},
          {Branch::Sigma22, Branch::Sigma21}};
}

/// Branches present for a pump tilt: Σ0, Σ11, Σ22 at resonance, else Σ11, Σ22, Σ12, Σ21.
inline std::vector<Branch> branches_for(bool resonant) {
  if (resonant) return {Branch::Sigma0, Branch::Sigma11, Branch::Sigma22};
  return {Branch::Sigma11, Branch::Sigma22, Branch::Sigma12, Branch::Sigma21};
}

}  // namespace npc
