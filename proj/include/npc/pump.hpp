#pragma once

#include <cmath>
#include <sstream>

#include "npc/constants.hpp"
#include "npc/diagnostics.hpp"
#include "npc/errors.hpp"
#include "npc/grid.hpp"
#include "npc/medium.hpp"

namespace npc {

/// Transverse pump profile on the (x, y) plane, nx×ny row-major, in the amplitude
/// units of `config` (x measured from the grid origin, envelope centered in the box).
inline cvector pump_transverse(const PumpConfig& config, const GridSpec& grid) {
  grid.validate();
  const double q0p = config.q0p();
  if (q0p > 0) {
    const double samples = units::two_pi / q0p / grid.dx();
    if (samples < 8.0 - 1e-9) {
      std::ostringstream os;
      os << "pump: transverse fringe resolved by " << samples
         << " samples (need >= 8); increase nx or reduce Lx_um";
      throw ConfigError(os.str());
    }
    const double cells = q0p / grid.dqx();
    if (std::abs(cells - std::round(cells)) > 1e-6)
      warn("pump tilt q0p is not a multiple of the grid spacing in q_x");
  }
  const Gaussian* gauss = std::get_if<Gaussian>(&config.profile());
  if (gauss && (grid.Lx_um < 4 * gauss->waist_x_um || grid.Ly_um < 4 * gauss->waist_y_um))
    warn("pump: transverse window is smaller than 4 waists; periodic images overlap");
  cvector out(grid.nx * grid.ny);
  const double x0 = 0.5 * grid.Lx_um, y0 = 0.5 * grid.Ly_um;
  for (std::size_t ix = 0; ix < grid.nx; ++ix) {
    const double x = grid.x(ix);
    const cplx carrier = config.alpha1() * std::polar(1.0, q0p * x) +
                         config.alpha2() * std::polar(1.0, -q0p * x);
    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
      double env = 1.0;
      if (gauss) {
        const double u = (x - x0) / gauss->waist_x_um;
        const double v = (grid.y(iy) - y0) / gauss->waist_y_um;
        env = std::exp(-(u * u + v * v));
      }
      out[ix * grid.ny + iy] = carrier * env;
    }
  }
  return out;
}

/// Dual pump field on the full grid, direct domain, monochromatic (flat in t).
inline SpectralField build_pump(const PumpConfig& config, const GridSpec& grid) {
  const cvector plane = pump_transverse(config, grid);
  SpectralField f(grid, Carrier::pump, Domain::direct);
  for (std::size_t ix = 0; ix < grid.nx; ++ix)
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
      for (std::size_t it = 0; it < grid.nt; ++it) f(ix, iy, it) = plane[ix * grid.ny + iy];
  return f;
}

}  // namespace npc
