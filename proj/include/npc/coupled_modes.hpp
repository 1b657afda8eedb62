#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "npc/branch.hpp"
#include "npc/constants.hpp"
#include "npc/errors.hpp"
#include "npc/medium.hpp"
#include "npc/ode.hpp"

namespace npc {

// ---------------------------------------------------------------------------
// Two-mode processes
// ---------------------------------------------------------------------------

struct TwoModeProcess {
  Branch branch;
  cplx gamma;       // gain enhancement relative to ḡ
  double gbar;      // mm⁻¹
  double mismatch;  // D̄, mm⁻¹
};

/// Gain enhancement factor of an isolated twin-mode pair on a branch:
/// Σ0 → (g1+g2)/ḡ, Σ11 → g1/ḡ, Σ22 → g2/ḡ. Off resonance the single-pump
/// branches Σ12 (pump 1) and Σ21 (pump 2) carry g1/ḡ and g2/ḡ.
inline cplx two_mode_gamma(Branch branch, const GainParameters& g) {
  switch (branch) {
    case Branch::Sigma0: return (g.g1 + g.g2) / g.gbar;
    case Branch::Sigma11:
    case Branch::Sigma12: return g.g1 / g.gbar;
    case Branch::Sigma22:
    case Branch::Sigma21: return g.g2 / g.gbar;
  }
  throw ConfigError("two_mode_gamma: unknown branch");
}

/// N = sinh²(|γ| ḡ z) for vacuum input on a phase-matched pair. z in mm.
inline double two_mode_photon_number(cplx gamma, double gbar, double z_mm) {
  if (z_mm < 0) throw ConfigError("two_mode_photon_number: z must be >= 0");
  const double s = std::sinh(std::abs(gamma) * gbar * z_mm);
  return s * s;
}

/// Vacuum-input photon number of a pair with coupling |g| and mismatch D (both mm⁻¹):
/// N = |g|²/G² sinh²(Gz), G = sqrt(|g|² - D²/4); the oscillating branch for G² < 0.
inline double two_mode_photon_number_mismatched(double g, double D, double z_mm) {
  const double G2 = g * g - 0.25 * D * D;
  if (G2 > 0) {
    const double G = std::sqrt(G2);
    const double s = std::sinh(G * z_mm);
    return g * g / G2 * s * s;
  }
  if (G2 < 0) {
    const double G = std::sqrt(-G2);
    const double s = std::sin(G * z_mm);
    return g * g / (-G2) * s * s;
  }
  return g * g * z_mm * z_mm;
}

// ---------------------------------------------------------------------------
// Four-mode processes among shared modes
// ---------------------------------------------------------------------------

using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;
using Matrix2c = Eigen::Matrix<cplx, 2, 2>;

/// Linear system d/dz (b_s, c_s, b_i†, c_i†) = M(z) (b_s, c_s, b_i†, c_i†) with
/// M = [[0, K e^{-iD̄z}], [K* e^{iD̄z}, 0]], K = [[g1, g1+g2], [g1+g2, g2]].
struct FourModeSystem {
  GainParameters gains;
  double mismatch = 0;  // D̄ (mm⁻¹)
  Matrix4c matrix;      // M at z = 0
  double lambda_plus = 0;
  double lambda_minus = 0;

  Matrix2c coupling() const { return matrix.block<2, 2>(0, 2); }

  Matrix4c at(double z_mm) const {
    Matrix4c m = matrix;
    const cplx ph = std::polar(1.0, -mismatch * z_mm);
    m.block<2, 2>(0, 2) *= ph;
    m.block<2, 2>(2, 0) *= std::conj(ph);
    return m;
  }
};

inline Matrix2c coupling_block(const GainParameters& g) {
  Matrix2c k;
  k << g.g1, g.g1 + g.g2, g.g1 + g.g2, g.g2;
  return k;
}

/// The two nonnegative magnitudes (Λ+, Λ-) of the eigenvalues ±Λ± of M at D̄ = 0,
/// from a numerical eigen-decomposition.
inline std::pair<double, double> eigen_magnitudes(const Matrix4c& m) {
  Eigen::ComplexEigenSolver<Matrix4c> solver(m, false);
  std::array<double, 4> a{};
  for (int i = 0; i < 4; ++i) a[i] = std::abs(solver.eigenvalues()[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  return {0.5 * (a[0] + a[1]), 0.5 * (a[2] + a[3])};
}

inline FourModeSystem four_mode_matrix(const GainParameters& g, double mismatch = 0.0) {
  FourModeSystem s;
  s.gains = g;
  s.mismatch = mismatch;
  const Matrix2c k = coupling_block(g);
  s.matrix.setZero();
  s.matrix.block<2, 2>(0, 2) = k;
  s.matrix.block<2, 2>(2, 0) = k.conjugate();
  std::tie(s.lambda_plus, s.lambda_minus) = eigen_magnitudes(s.matrix);
  return s;
}

inline std::pair<double, double> four_mode_eigenvalues(const GainParameters& g) {
  return eigen_magnitudes(four_mode_matrix(g).matrix);
}

/// (Λ+, Λ-) for real r: ḡ/sqrt(1+r²) |(1+r)/2 ± sqrt(5(1+r²)+6r)/2|.
inline std::pair<double, double> four_mode_eigenvalues_real_ratio(double gbar, double r) {
  const double root = std::sqrt(5 * (1 + r * r) + 6 * r);
  const double scale = gbar / std::sqrt(1 + r * r);
  return {scale * std::abs(0.5 * (1 + r) + 0.5 * root),
          scale * std::abs(0.5 * (1 + r) - 0.5 * root)};
}

struct EigenvalueLandscape {
  std::vector<double> r_abs;
  std::vector<double> phase;
  // Row-major [r index][phase index], normalized to ḡ.
  std::vector<double> plus;
  std::vector<double> minus;

  double plus_at(std::size_t i, std::size_t j) const { return plus[i * phase.size() + j]; }
  double minus_at(std::size_t i, std::size_t j) const { return minus[i * phase.size() + j]; }
};

inline EigenvalueLandscape eigenvalue_landscape(const std::vector<double>& r_abs,
                                                const std::vector<double>& phase, double gbar) {
  for (double r : r_abs)
    if (r < 0 || r > 1) throw ConfigError("eigenvalue_landscape: |r| grid must lie in [0, 1]");
  EigenvalueLandscape out{r_abs, phase, {}, {}};
  out.plus.reserve(r_abs.size() * phase.size());
  out.minus.reserve(r_abs.size() * phase.size());
  for (double r : r_abs) {
    for (double ph : phase) {
      const auto [lp, lm] = four_mode_eigenvalues(GainParameters::from_ratio(gbar, std::polar(r, ph)));
      out.plus.push_back(lp / gbar);
      out.minus.push_back(lm / gbar);
    }
  }
  return out;
}

/// Uniform grids for the landscape: |r| in [0, 1] inclusive, phase in [0, 2π).
inline std::vector<double> linspace(double a, double b, std::size_t n, bool endpoint = true) {
  std::vector<double> v(n);
  const double d = n > 1 ? (b - a) / double(endpoint ? n - 1 : n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) v[i] = a + d * double(i);
  return v;
}

struct BeamSplitter {
  double theta;
  double cos_theta;
  double sin_theta;
  double lambda_plus;
  double lambda_minus;
};

/// Rotation (δ_j, σ_j) = [[cosΘ, -sinΘ], [sinΘ, cosΘ]] (b_j, c_j) that splits the
/// four-mode process into σ (gain Λ+) and δ (gain -Λ-) twin pairs. Real r only.
inline BeamSplitter beam_splitter_decomposition(const GainParameters& g) {
  if (std::abs(g.r.imag()) > 1e-12 * std::max(1.0, std::abs(g.r)))
    throw UnsupportedCase(
        "beam_splitter_decomposition: r = g2/g1 must be real; use four_mode_eigenvalues for "
        "complex ratios");
  const double r = g.r.real();
  const double root = std::sqrt(5 * (1 + r * r) + 6 * r);
  const double c2 = std::max(0.0, 0.5 - (1 - r) / (2 * root));
  const double s2 = std::max(0.0, 0.5 + (1 - r) / (2 * root));
  BeamSplitter bs;
  bs.cos_theta = std::sqrt(c2);
  bs.sin_theta = std::sqrt(s2);
  bs.theta = std::atan2(bs.sin_theta, bs.cos_theta);
  std::tie(bs.lambda_plus, bs.lambda_minus) = four_mode_eigenvalues_real_ratio(g.gbar, r);
  return bs;
}

/// Block-diagonal rotation blockdiag(R, R) mapping (b_s, c_s, b_i†, c_i†) to
/// (δ_s, σ_s, δ_i†, σ_i†).
inline Matrix4c beam_splitter_rotation(const BeamSplitter& bs) {
  Matrix4c t = Matrix4c::Zero();
  for (int blk = 0; blk < 4; blk += 2) {
    t(blk, blk) = bs.cos_theta;
    t(blk, blk + 1) = -bs.sin_theta;
    t(blk + 1, blk) = bs.sin_theta;
    t(blk + 1, blk + 1) = bs.cos_theta;
  }
  return t;
}

/// Frobenius norm of the couplings between the δ pair (rows/cols 0, 2) and the
/// σ pair (rows/cols 1, 3) in a matrix expressed in the rotated basis.
inline double off_block_norm(const Matrix4c& m) {
  double s = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if ((i % 2) != (j % 2)) s += std::norm(m(i, j));
  return std::sqrt(s);
}

/// Fundamental matrix U(z) of the four-mode system including the e^{∓iD̄z} phases,
/// so that (b_s, c_s, b_i†, c_i†)(z) = U(z) (b_s, c_s, b_i†, c_i†)(0). z in mm.
inline Matrix4c four_mode_propagator(const FourModeSystem& sys, double z_mm,
                                     const OdeTolerance& tol = {}) {
  if (z_mm < 0) throw ConfigError("integrate_four_mode: z must be >= 0");
  auto rhs = [&](double z, const Matrix4c& u) -> Matrix4c { return sys.at(z) * u; };
  return dopri5<Matrix4c>(rhs, Matrix4c::Identity(), 0.0, z_mm, tol);
}

/// Propagates a classical amplitude vector (b_s, c_s, b_i*, c_i*).
inline Vector4c integrate_four_mode(const FourModeSystem& sys, double z_mm, const Vector4c& state,
                                    const OdeTolerance& tol = {}) {
  return four_mode_propagator(sys, z_mm, tol) * state;
}

struct FourModePhotons {
  double b_s, c_s, b_i, c_i;
};

/// Mean photon numbers after propagation of the vacuum, from the Bogoliubov
/// coefficients in U: a signal mode picks up |U|² from the idler columns and
/// vice versa.
inline FourModePhotons vacuum_photon_numbers(const Matrix4c& u) {
  auto row = [&](int i, int c0) { return std::norm(u(i, c0)) + std::norm(u(i, c0 + 1)); };
  return {row(0, 2), row(1, 2), row(2, 0), row(3, 0)};
}

/// Deviation from the Bogoliubov condition U η U† = η, η = diag(1, 1, -1, -1).
inline double symplectic_defect(const Matrix4c& u) {
  Matrix4c eta = Matrix4c::Zero();
  eta.diagonal() << 1, 1, -1, -1;
  return (u * eta * u.adjoint() - eta).cwiseAbs().maxCoeff();
}

}  // namespace npc
