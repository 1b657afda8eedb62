#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "npc/errors.hpp"

namespace npc {

struct OdeTolerance {
  double rtol = 1e-12;
  double atol = 1e-14;
  double h_min = 1e-14;
  long max_steps = 1000000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

/// Dormand–Prince 5(4) with PI-free step control, for Eigen-like state types that
/// support +, scalar *, and cwiseAbs().maxCoeff(). Integrates y' = f(z, y) from z0 to z1.
template <class State, class Rhs>
State dopri5(Rhs&& f, State y, double z0, double z1, const OdeTolerance& tol = {},
             OdeStats* stats = nullptr) {
  if (z1 == z0) return y;
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double dir = z1 > z0 ? 1.0 : -1.0;
  double z = z0;
  double h = dir * std::min(std::abs(z1 - z0), 1e-2 * std::max(1.0, std::abs(z1 - z0)));
  State k1 = f(z, y);
  long steps = 0;
  while (dir * (z1 - z) > 0) {
    if (++steps > tol.max_steps) throw StepUnderflow("dopri5: step budget exhausted");
    if (dir * (z + h - z1) > 0) h = z1 - z;
    const State k2 = f(z + c2 * h, State(y + h * (a21 * k1)));
    const State k3 = f(z + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 = f(z + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = f(z + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 =
        f(z + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    const State y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = f(z + h, y_new);
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double scale = tol.atol + tol.rtol * std::max(y.cwiseAbs().maxCoeff(),
                                                        y_new.cwiseAbs().maxCoeff());
    const double err_norm = err.cwiseAbs().maxCoeff() / scale;
    if (err_norm <= 1.0) {
      z += h;
      y = y_new;
      k1 = k7;
      if (stats) ++stats->accepted;
    } else if (stats) {
      ++stats->rejected;
    }
    const double factor =
        err_norm == 0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
    h *= factor;
    if (std::abs(h) < tol.h_min * std::max(1.0, std::abs(z))) {
      std::ostringstream os;
      os << "dopri5: step size underflow at z=" << z;
      throw StepUnderflow(os.str());
    }
  }
  return y;
}

}  // namespace npc
