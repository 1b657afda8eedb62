#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "npc/grid.hpp"
#include "npc/medium.hpp"
#include "npc/pump.hpp"

using namespace npc;

namespace {

// Reference values from an independent 30-digit evaluation of the Sellmeier relation.
constexpr double kN1064 = 2.13155386792457427;
constexpr double kN532 = 2.19880896693619967;
constexpr double kResonantPeriod = 7.78198555621170253;
constexpr double kChi = 3.45963341379578199e-5;  // mm⁻¹ per sqrt(photons/(µm² ps))
constexpr double kK2 = 1.99915818190103700e-7;   // ps²/µm

Medium default_medium() { return Medium(CrystalSpec{}); }

}  // namespace

TEST(Dispersion, IndexAtCarriers) {
  const auto d = DispersionModel::lithium_tantalate();
  EXPECT_NEAR(d.refractive_index(1.064, 85.0), kN1064, 1e-13);
  EXPECT_NEAR(d.refractive_index(0.532, 85.0), kN532, 1e-13);
  EXPECT_EQ(d.refractive_index(1.064, 85.0) - d.refractive_index(1.064, 85.0), 0.0);
}

TEST(Dispersion, IndexAboveOneAndSmooth) {
  const auto d = DispersionModel::lithium_tantalate();
  const double h = 1e-3;
  for (double l = 0.4 + h; l <= 1.6 - h; l += 0.01) {
    const double n = d.refractive_index(l, 85.0);
    EXPECT_GT(n, 1.0);
    const double d2 = (d.refractive_index(l + h, 85.0) - 2 * n + d.refractive_index(l - h, 85.0)) / (h * h);
    EXPECT_TRUE(std::isfinite(d2));
  }
}

TEST(Dispersion, OutOfWindowNamesWindow) {
  const auto d = DispersionModel::lithium_tantalate();
  try {
    d.refractive_index(5.0, 85.0);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("[0.4, 4]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(d.refractive_index(1.0, 400.0), DomainError);
}

TEST(Medium, DerivativesMatchReference) {
  const auto m = default_medium();
  EXPECT_NEAR(m.k2_signal(), kK2, 1e-11);
  EXPECT_NEAR(m.k_signal(), 12.5873570906066747, 1e-11);
  EXPECT_NEAR(m.k1_signal(), 7.27804522811706802e-3, 1e-11);
}

TEST(Medium, LatticeVectors) {
  CrystalSpec s;
  EXPECT_NEAR(s.Gx(), 0.466, 1e-3);
  EXPECT_GT(s.Gz(), 0);
  EXPECT_NEAR(s.Gz() / s.Gx(), std::sqrt(3.0), 1e-15);
  s.poling_period_um = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.poling_period_um = 7.782;
  s.length_mm = -1;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Medium, WavevectorOnAxisAndGrazing) {
  const auto m = default_medium();
  for (auto f : {Field::signal, Field::pump}) {
    EXPECT_DOUBLE_EQ(m.wavevector_z(0.0, 0, 0, f, KzMode::exact), m.k(f, 0.0));
    EXPECT_DOUBLE_EQ(m.wavevector_z(0.0, 0, 0, f, KzMode::paraxial), m.k(f, 0.0));
  }
  const double k = m.k_signal();
  EXPECT_NEAR(m.wavevector_z(0.0, k, 0, Field::signal, KzMode::exact), 0.0, 1e-12);
  EXPECT_THROW(m.wavevector_z(0.0, 1.01 * k, 0, Field::signal, KzMode::exact), EvanescentError);
}

TEST(Medium, ParaxialCloseToExactAtSmallAngle) {
  const auto m = default_medium();
  const double k = m.k_signal();
  const double q = 0.1 * k;
  const double ex = m.wavevector_z(0.0, q, 0, Field::signal, KzMode::exact);
  const double px = m.wavevector_z(0.0, q, 0, Field::signal, KzMode::paraxial);
  EXPECT_LT(std::abs(px - ex) / ex, 1e-4);
}

TEST(Medium, KzNeverExceedsK) {
  const auto m = default_medium();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uq(-3.0, 3.0), uw(-300.0, 300.0);
  for (int i = 0; i < 2000; ++i) {
    const double qx = uq(rng), qy = uq(rng), w = uw(rng);
    for (auto f : {Field::signal, Field::pump}) {
      const double k = m.k(f, w);
      EXPECT_LE(m.wavevector_z(w, qx, qy, f, KzMode::exact), k);
      EXPECT_LE(m.wavevector_z(w, qx, qy, f, KzMode::paraxial), k);
    }
  }
}

TEST(Medium, PolingPeriodSolve) {
  const auto d = DispersionModel::lithium_tantalate();
  const double period = solve_poling_period(d, 85.0);
  EXPECT_NEAR(period, kResonantPeriod, 1e-9);
  EXPECT_NEAR(period, 7.782, 1e-3);
  EXPECT_LT(std::abs(degeneracy_residual(d, 85.0, 0.532, period)), 1e-6);
}

TEST(Medium, MismatchVanishesAtSharedMode) {
  CrystalSpec s;
  s.poling_period_um = solve_poling_period(s.dispersion, 85.0);
  const Medium m(s);
  const double gx = m.Gx();
  for (double sign : {1.0, -1.0}) {
    const Mode sig{sign * gx, 0, 0};
    const Mode idl{-sign * gx, 0, 0};
    // Σ0 pair: signal +Gx, idler -Gx, pump tilt Gx with the lattice term cancelling it.
    const double D = m.wavevector_z(sig, Field::signal) + m.wavevector_z(idl, Field::signal) -
                     m.wavevector_z(Mode{gx, 0, 0}, Field::pump) + m.Gz();
    EXPECT_LT(std::abs(D), 1e-6);
  }
}

TEST(Medium, MismatchSymmetricInSignalIdler) {
  const auto m = default_medium();
  const Mode a{0.3, -0.1, 40}, b{-0.2, 0.15, -40}, p{0.1, 0.05, 0};
  EXPECT_DOUBLE_EQ(phase_mismatch(m, a, b, p), phase_mismatch(m, b, a, p));
}

TEST(Medium, ParaxialMismatchCloseToExact) {
  const auto m = default_medium();
  const double omega_max = 30.0;
  double worst = 0;
  for (double qx = -0.6; qx <= 0.6; qx += 0.05)
    for (double qy = -0.6; qy <= 0.6; qy += 0.05) {
      if (qx * qx + qy * qy > 0.36) continue;
      for (double w = -omega_max; w <= omega_max; w += 10) {
        const Mode s{qx, qy, w}, i{-qx, -qy, -w}, p{0, 0, 0};
        worst = std::max(worst, std::abs(phase_mismatch(m, s, i, p, KzMode::paraxial) -
                                         phase_mismatch(m, s, i, p, KzMode::exact)));
      }
    }
  EXPECT_LT(worst, 1e-3);
}

TEST(Medium, CouplingConstant) {
  CrystalSpec s;
  const double chi = coupling_constant(Medium(s));
  EXPECT_NEAR(chi / kChi, 1.0, 1e-9);
  CrystalSpec full = s;
  full.d01_over_deff = 1.0;
  EXPECT_NEAR(chi / coupling_constant(Medium(full)), 0.32, 1e-12);
  CrystalSpec twice = s;
  twice.d01_over_deff = 0.64;
  EXPECT_NEAR(coupling_constant(Medium(twice)) / chi, 2.0, 1e-12);
}

TEST(Gains, Basics) {
  const cplx a(3.0, 1.0);
  const double chi = 0.5;
  {
    const auto g = gain_parameters(PumpConfig(a, 0.0, 0.466), chi);
    EXPECT_EQ(std::abs(g.r), 0.0);
    EXPECT_DOUBLE_EQ(g.gbar, std::abs(chi * a));
  }
  {
    const auto g = gain_parameters(PumpConfig(a, a, 0.466), chi);
    EXPECT_NEAR(std::abs(g.r - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(g.gbar, std::sqrt(2.0) * std::abs(chi * a), 1e-13);
  }
  {
    const double phi = 0.7;
    const auto g = gain_parameters(PumpConfig(a, a * std::polar(1.0, phi), 0.466), chi);
    EXPECT_NEAR(std::abs(g.r), 1.0, 1e-14);
    EXPECT_NEAR(std::arg(g.r), phi, 1e-14);
  }
  EXPECT_THROW(gain_parameters(PumpConfig(0.0, 0.0, 0.466), chi), ConfigError);
}

TEST(Gains, InvariantsRandom) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const cplx a1(n(rng), n(rng)), a2(n(rng), n(rng));
    const PumpConfig p(a1, a2, 0.4);
    EXPECT_GE(std::abs(p.alpha1()), std::abs(p.alpha2()));
    const auto g = gain_parameters(p, 0.7);
    EXPECT_NEAR(g.gbar * g.gbar, std::norm(g.g1) + std::norm(g.g2),
                1e-14 * g.gbar * g.gbar);
    EXPECT_LE(std::abs(g.r), 1.0);
  }
}

TEST(Gains, SwapMirrors) {
  const PumpConfig p(1.0, 2.0, 0.4);
  EXPECT_TRUE(p.mirrored());
  EXPECT_EQ(p.alpha1(), cplx(2.0));
}

TEST(Gains, FromGainBackSolves) {
  const double chi = coupling_constant(Medium(CrystalSpec{}));
  const auto p = PumpConfig::from_gain(0.4, cplx(0.5, 0.5), 0.466, chi);
  const auto g = gain_parameters(p, chi);
  EXPECT_NEAR(g.gbar, 0.4, 1e-14);
  EXPECT_NEAR(std::abs(g.r - cplx(0.5, 0.5)), 0.0, 1e-14);
}

namespace {

GridSpec pump_grid(double gx) {
  GridSpec g;
  g.nx = 128;
  g.ny = 8;
  g.nt = 4;
  g.Lx_um = 16 * units::two_pi / gx;
  g.Ly_um = 100;
  g.T_ps = 1;
  return g;
}

}  // namespace

TEST(Pump, SymmetricAndAntisymmetric) {
  const double gx = CrystalSpec{}.Gx();
  const auto grid = pump_grid(gx);
  const cplx a(0.8, 0.3);
  const auto sym = build_pump(PumpConfig(a, a, gx), grid);
  const auto anti = build_pump(PumpConfig(a, -a, gx), grid);
  for (std::size_t ix = 0; ix < grid.nx; ++ix) {
    const double x = grid.x(ix);
    EXPECT_NEAR(std::abs(sym(ix, 3, 1) - 2.0 * a * std::cos(gx * x)), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(anti(ix, 2, 0) - 2.0 * cplx(0, 1) * a * std::sin(gx * x)), 0.0, 1e-13);
  }
  EXPECT_EQ(anti(0, 0, 0), cplx(0, 0));
}

TEST(Pump, SpectrumHasTwoPeaks) {
  const double gx = CrystalSpec{}.Gx();
  const auto grid = pump_grid(gx);
  const cplx a1(1.0, 0.0), a2(0.25, 0.5);
  auto f = build_pump(PumpConfig(a1, a2, gx), grid);
  FftPlan plan(grid.nx, grid.ny, grid.nt);
  f.to_spectral(plan);
  const double s = std::sqrt(double(grid.size()));
  const std::size_t p1 = grid.spectral_index(gx, 0, 0), p2 = grid.spectral_index(-gx, 0, 0);
  EXPECT_NEAR(std::abs(f.data[p1] / s - a1), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(f.data[p2] / s - a2), 0.0, 1e-12);
  double rest = 0;
  for (std::size_t i = 0; i < f.data.size(); ++i)
    if (i != p1 && i != p2) rest += std::norm(f.data[i]);
  EXPECT_LT(rest, 1e-20 * grid.size());
}

TEST(Pump, UnresolvedFringeRejected) {
  const double gx = CrystalSpec{}.Gx();
  auto grid = pump_grid(gx);
  grid.nx = 64;
  EXPECT_THROW(build_pump(PumpConfig(1.0, 1.0, gx), grid), ConfigError);
}

TEST(Pump, GaussianEnvelope) {
  const double gx = CrystalSpec{}.Gx();
  auto grid = pump_grid(gx);
  const auto f = build_pump(PumpConfig(1.0, 0.0, gx, Gaussian{40.0, 20.0}), grid);
  double peak = 0;
  for (const auto& v : f.data) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 1.0, 1e-2);
  EXPECT_LT(std::abs(f(0, 0, 0)), 1e-3);
}
