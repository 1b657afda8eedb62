#pragma once

#include <cmath>
#include <optional>

namespace npc {

struct Root {
  double x;
  double residual;
};

/// Bisection on [lo, hi]. Requires f(lo) and f(hi) of opposite sign (or one of them
/// already within tol). Stops when |f| < tol or the bracket can no longer shrink.
template <class F>
std::optional<Root> bisect(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (std::abs(flo) < tol) return Root{lo, flo};
  if (std::abs(fhi) < tol) return Root{hi, fhi};
  if ((flo > 0) == (fhi > 0)) return std::nullopt;
  Root best = std::abs(flo) < std::abs(fhi) ? Root{lo, flo} : Root{hi, fhi};
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (std::abs(fm) < std::abs(best.residual)) best = {mid, fm};
    if (std::abs(fm) < tol) break;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return best;
}

}  // namespace npc
