#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <new>
#include <sstream>
#include <vector>

#include "npc/constants.hpp"
#include "npc/errors.hpp"

namespace npc {

using cplx = std::complex<double>;

/// std::allocator replacement returning FFTW-aligned storage, so that plans made
/// on one buffer can be executed on any other.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using cvector = std::vector<cplx, FftwAllocator<cplx>>;

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

/// Signed FFT frequency index of array position i for length n (numpy.fft.fftfreq * n).
inline long fft_index(std::size_t i, std::size_t n) {
  return i < (n + 1) / 2 ? long(i) : long(i) - long(n);
}

/// Uniform (x, y, t) grid and its reciprocal (qx, qy, Ω) grid. Array layout is
/// row-major over (x, y, t). Spatial transforms use e^{-iq·x}; the time transform
/// uses e^{+iΩt}, so spectral index m along t carries Ω = -fft_index(m)·dΩ.
struct GridSpec {
  std::size_t nx = 128, ny = 64, nt = 64;
  double Lx_um = 0, Ly_um = 0, T_ps = 0;
  double dz_um = 40;

  void validate() const {
    if (!is_power_of_two(nx) || !is_power_of_two(ny) || !is_power_of_two(nt))
      throw ConfigError("simulation: nx, ny, nt must be powers of two");
    if (!(Lx_um > 0 && Ly_um > 0 && T_ps > 0))
      throw ConfigError("simulation: Lx_um, Ly_um, T_ps must be > 0");
    if (!(dz_um > 0)) throw ConfigError("simulation.dz_um must be > 0");
  }

  std::size_t size() const noexcept { return nx * ny * nt; }
  std::size_t index(std::size_t ix, std::size_t iy, std::size_t it) const noexcept {
    return (ix * ny + iy) * nt + it;
  }
  double dx() const noexcept { return Lx_um / double(nx); }
  double dy() const noexcept { return Ly_um / double(ny); }
  double dt() const noexcept { return T_ps / double(nt); }
  double dqx() const noexcept { return units::two_pi / Lx_um; }
  double dqy() const noexcept { return units::two_pi / Ly_um; }
  double domega() const noexcept { return units::two_pi / T_ps; }
  double cell_volume() const noexcept { return dx() * dy() * dt(); }
  double qx_max() const noexcept { return dqx() * double(nx / 2); }
  double qy_max() const noexcept { return dqy() * double(ny / 2); }
  double omega_max() const noexcept { return domega() * double(nt / 2); }

  double x(std::size_t ix) const noexcept { return dx() * double(ix); }
  double y(std::size_t iy) const noexcept { return dy() * double(iy); }
  double qx(std::size_t ix) const noexcept { return dqx() * double(fft_index(ix, nx)); }
  double qy(std::size_t iy) const noexcept { return dqy() * double(fft_index(iy, ny)); }
  double omega(std::size_t it) const noexcept { return -domega() * double(fft_index(it, nt)); }

  /// Array position of the spectral sample nearest to (qx, qy, Ω), wrapped periodically.
  std::size_t spectral_index(double qx_v, double qy_v, double omega_v) const noexcept {
    auto wrap = [](long m, std::size_t n) {
      long r = m % long(n);
      return std::size_t(r < 0 ? r + long(n) : r);
    };
    const long mx = std::lround(qx_v / dqx());
    const long my = std::lround(qy_v / dqy());
    const long mt = -std::lround(omega_v / domega());
    return index(wrap(mx, nx), wrap(my, ny), wrap(mt, nt));
  }
};

enum class Domain { direct, spectral };

/// In-place unitary 3D (or 2D with nt = 1) FFT pair. Plan creation is serialized;
/// execution on distinct buffers is thread safe.
class FftPlan {
 public:
  FftPlan(std::size_t nx, std::size_t ny, std::size_t nt, unsigned flags = FFTW_ESTIMATE)
      : n_(nx * ny * nt) {
    cvector scratch(n_);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    std::lock_guard lock(planner_mutex());
    if (nt > 1) {
      forward_ = fftw_plan_dft_3d(int(nx), int(ny), int(nt), p, p, FFTW_FORWARD, flags);
      backward_ = fftw_plan_dft_3d(int(nx), int(ny), int(nt), p, p, FFTW_BACKWARD, flags);
    } else {
      forward_ = fftw_plan_dft_2d(int(nx), int(ny), p, p, FFTW_FORWARD, flags);
      backward_ = fftw_plan_dft_2d(int(nx), int(ny), p, p, FFTW_BACKWARD, flags);
    }
    if (!forward_ || !backward_) throw Error("FFTW plan creation failed");
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  /// direct → spectral
  void forward(cvector& a) const { run(forward_, a); }
  /// spectral → direct
  void backward(cvector& a) const { run(backward_, a); }

  // Transforms without the 1/sqrt(N) factor, for callers that fold it elsewhere.
  void forward_raw(cvector& a) const { execute(forward_, a); }
  void backward_raw(cvector& a) const { execute(backward_, a); }
  std::size_t size() const noexcept { return n_; }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  void execute(fftw_plan plan, cvector& a) const {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    fftw_execute_dft(plan, p, p);
  }
  void run(fftw_plan plan, cvector& a) const {
    execute(plan, a);
    const double s = 1.0 / std::sqrt(double(n_));
    for (auto& v : a) v *= s;
  }

  std::size_t n_;
  fftw_plan forward_{};
  fftw_plan backward_{};
};

enum class Carrier { signal, pump };

/// Complex envelope sampled on a GridSpec, tagged with the domain it is stored in.
struct SpectralField {
  GridSpec grid;
  Carrier carrier = Carrier::signal;
  Domain domain = Domain::direct;
  cvector data;

  SpectralField() = default;
  SpectralField(const GridSpec& g, Carrier c, Domain d)
      : grid(g), carrier(c), domain(d), data(g.size(), cplx(0, 0)) {}

  cplx& operator()(std::size_t ix, std::size_t iy, std::size_t it) {
    return data[grid.index(ix, iy, it)];
  }
  const cplx& operator()(std::size_t ix, std::size_t iy, std::size_t it) const {
    return data[grid.index(ix, iy, it)];
  }

  double norm2() const {
    double s = 0;
    for (const auto& v : data) s += std::norm(v);
    return s;
  }

  void to_spectral(const FftPlan& plan) {
    if (domain == Domain::spectral) return;
    plan.forward(data);
    domain = Domain::spectral;
  }
  void to_direct(const FftPlan& plan) {
    if (domain == Domain::direct) return;
    plan.backward(data);
    domain = Domain::direct;
  }
};

}  // namespace npc
