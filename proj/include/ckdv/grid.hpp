#ifndef CKDV_GRID_HPP
#define CKDV_GRID_HPP

// Periodic one-dimensional grid with Fourier pseudo-spectral calculus.
//
// The domain is [-L/2, L/2) with N nodes x_j = -L/2 + j L / N. Transforms
// are real-to-complex: a spectrum holds the N/2 + 1 non-negative modes,
// the negative ones being implied by Hermitian symmetry. Mode m has
// wavenumber k_m = 2 pi m / L; mode N/2 is the Nyquist mode.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ckdv/error.hpp"

namespace ckdv {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

namespace detail {

// FFTW planning and plan destruction are not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlans {
 public:
  explicit FftPlans(std::size_t n) : n_(n) {
    std::vector<double> real(n);
    std::vector<Complex> spec(n / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(spec.data());
    std::lock_guard lock(fftw_planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(), c, flags);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), c, real.data(), flags);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  void forward(std::span<const double> in, std::span<Complex> out) const {
    // r2c leaves its input untouched.
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
  }

  // Unnormalized; the caller divides by N. Clobbers `in`.
  void inverse_inplace(std::span<Complex> in, std::span<double> out) const {
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
  }

  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_plan forward_{};
  fftw_plan inverse_{};
};

}  // namespace detail

/// Uniform periodic grid. Cheap to copy: all copies share node and plan data.
class Grid1D {
 public:
  Grid1D(double length, std::size_t n_points) {
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw ConfigError("grid length must be positive and finite, got " +
                        std::to_string(length));
    }
    if (n_points < 16 || (n_points & (n_points - 1)) != 0) {
      throw ConfigError("grid size must be a power of two >= 16, got " +
                        std::to_string(n_points));
    }
    auto impl = std::make_shared<Impl>();
    impl->length = length;
    impl->n = n_points;
    impl->nodes.resize(n_points);
    const double dx = length / static_cast<double>(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
      impl->nodes[j] = -0.5 * length + static_cast<double>(j) * dx;
    }
    impl->plans = std::make_unique<detail::FftPlans>(n_points);
    impl_ = std::move(impl);
  }

  double length() const { return impl_->length; }
  std::size_t size() const { return impl_->n; }
  double spacing() const { return impl_->length / static_cast<double>(impl_->n); }
  double node(std::size_t j) const { return impl_->nodes[j]; }
  std::span<const double> nodes() const { return impl_->nodes; }

  std::size_t spectrum_size() const { return impl_->n / 2 + 1; }
  std::size_t nyquist_index() const { return impl_->n / 2; }

  /// Wavenumber of half-spectrum mode m (0 <= m <= N/2).
  double wavenumber(std::size_t m) const {
    return 2.0 * std::numbers::pi * static_cast<double>(m) / impl_->length;
  }

  /// Full-length wavenumber array in the standard DFT layout
  /// (0, 1, ..., N/2 - 1, -N/2, ..., -1) * 2 pi / L.
  std::vector<double> wavenumbers() const {
    const auto n = static_cast<long>(impl_->n);
    std::vector<double> k(impl_->n);
    for (long j = 0; j < n; ++j) {
      const long m = j < n / 2 ? j : j - n;
      k[static_cast<std::size_t>(j)] =
          2.0 * std::numbers::pi * static_cast<double>(m) / impl_->length;
    }
    return k;
  }

  /// Highest mode kept by the two-thirds rule.
  std::size_t dealias_cutoff() const { return impl_->n / 3; }

  void forward(std::span<const double> values, std::span<Complex> out) const {
    check_sizes(values.size(), out.size());
    impl_->plans->forward(values, out);
  }

  Spectrum forward(std::span<const double> values) const {
    Spectrum out(spectrum_size());
    forward(values, out);
    return out;
  }

  /// Normalized inverse transform. `scratch` must hold spectrum_size() values.
  void inverse(std::span<const Complex> spectrum, std::span<double> out,
               std::span<Complex> scratch) const {
    check_sizes(out.size(), spectrum.size());
    std::copy(spectrum.begin(), spectrum.end(), scratch.begin());
    impl_->plans->inverse_inplace(scratch, out);
    const double scale = 1.0 / static_cast<double>(impl_->n);
    for (double& v : out) v *= scale;
  }

  std::vector<double> inverse(std::span<const Complex> spectrum) const {
    std::vector<double> out(size());
    Spectrum scratch(spectrum_size());
    inverse(spectrum, out, scratch);
    return out;
  }

  friend bool operator==(const Grid1D& a, const Grid1D& b) {
    return a.impl_ == b.impl_ ||
           (a.impl_->n == b.impl_->n && a.impl_->length == b.impl_->length);
  }

 private:
  struct Impl {
    double length = 0.0;
    std::size_t n = 0;
    std::vector<double> nodes;
    std::unique_ptr<detail::FftPlans> plans;
  };

  void check_sizes(std::size_t n_real, std::size_t n_spec) const {
    if (n_real != impl_->n || n_spec != spectrum_size()) {
      throw PreconditionError("transform buffer size does not match grid");
    }
  }

  std::shared_ptr<const Impl> impl_;
};

inline Grid1D make_grid(double length, std::size_t n_points) {
  return Grid1D(length, n_points);
}

/// Node samples of a real function on a grid.
class RealField {
 public:
  explicit RealField(Grid1D grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

  RealField(Grid1D grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw PreconditionError("field has " + std::to_string(values_.size()) +
                              " samples but the grid has " +
                              std::to_string(grid_.size()) + " nodes");
    }
  }

  template <class F>
  static RealField sample(const Grid1D& grid, F&& f) {
    std::vector<double> v(grid.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(grid.node(j));
    return RealField(grid, std::move(v));
  }

  const Grid1D& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double operator[](std::size_t j) const { return values_[j]; }
  double& operator[](std::size_t j) { return values_[j]; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  RealField& operator+=(const RealField& o) {
    check_same(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += o.values_[j];
    return *this;
  }
  RealField& operator-=(const RealField& o) {
    check_same(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= o.values_[j];
    return *this;
  }
  RealField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  /// Pointwise product.
  RealField& operator*=(const RealField& o) {
    check_same(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] *= o.values_[j];
    return *this;
  }

  friend RealField operator+(RealField a, const RealField& b) { return a += b; }
  friend RealField operator-(RealField a, const RealField& b) { return a -= b; }
  friend RealField operator*(RealField a, const RealField& b) { return a *= b; }
  friend RealField operator*(double s, RealField a) { return a *= s; }
  friend RealField operator*(RealField a, double s) { return a *= s; }
  friend RealField operator-(RealField a) { return a *= -1.0; }

 private:
  void check_same(const RealField& o) const {
    if (!(grid_ == o.grid_)) throw PreconditionError("fields live on different grids");
  }

  Grid1D grid_;
  std::vector<double> values_;
};

inline double max_abs_diff(const RealField& a, const RealField& b) {
  if (!(a.grid() == b.grid())) throw PreconditionError("fields live on different grids");
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

// --- spectral kernels --------------------------------------------------------

/// Multiplies a half-spectrum by (ik)^order. The Nyquist mode is dropped for
/// odd orders, where it has no signed counterpart.
inline void apply_derivative(const Grid1D& grid, std::span<Complex> spec, int order) {
  const std::size_t nyq = grid.nyquist_index();
  for (std::size_t m = 0; m < spec.size(); ++m) {
    const double k = grid.wavenumber(m);
    Complex factor;
    switch (order) {
      case 1: factor = Complex(0.0, k); break;
      case 2: factor = Complex(-k * k, 0.0); break;
      case 3: factor = Complex(0.0, -k * k * k); break;
      default: throw ConfigError("derivative order must be 1, 2 or 3");
    }
    spec[m] *= factor;
  }
  if (order % 2 == 1) spec[nyq] = 0.0;
}

/// Two-thirds rule: zero every mode above N/3.
inline void apply_dealias(const Grid1D& grid, std::span<Complex> spec) {
  for (std::size_t m = grid.dealias_cutoff() + 1; m < spec.size(); ++m) spec[m] = 0.0;
}

/// Keep only modes 0..cutoff.
inline void apply_lowpass(std::span<Complex> spec, std::size_t cutoff) {
  for (std::size_t m = cutoff + 1; m < spec.size(); ++m) spec[m] = 0.0;
}

/// Multiplies by exp(-i k s): the field translated right by s. The Nyquist
/// coefficient stays real and picks up cos(k s).
inline void apply_translation(const Grid1D& grid, std::span<Complex> spec, double s) {
  const std::size_t nyq = grid.nyquist_index();
  for (std::size_t m = 0; m < nyq; ++m) spec[m] *= std::polar(1.0, -grid.wavenumber(m) * s);
  spec[nyq] = Complex(spec[nyq].real() * std::cos(grid.wavenumber(nyq) * s), 0.0);
}

// --- field operations --------------------------------------------------------

inline RealField deriv(const RealField& f, int order) {
  if (order < 1 || order > 3) throw ConfigError("derivative order must be 1, 2 or 3");
  const Grid1D& g = f.grid();
  Spectrum spec = g.forward(f.values());
  apply_derivative(g, spec, order);
  return RealField(g, g.inverse(spec));
}

/// Trapezoid rule on periodic data: L times the sample mean.
inline double integrate(const RealField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.grid().spacing();
}

inline RealField dealias(const RealField& f) {
  const Grid1D& g = f.grid();
  Spectrum spec = g.forward(f.values());
  apply_dealias(g, spec);
  return RealField(g, g.inverse(spec));
}

/// f(x - s), evaluated spectrally (exact for band-limited fields).
inline RealField translate(const RealField& f, double s) {
  const Grid1D& g = f.grid();
  Spectrum spec = g.forward(f.values());
  apply_translation(g, spec, s);
  return RealField(g, g.inverse(spec));
}

inline constexpr double kDefaultDecayTolerance = 1e-8;

/// Primitive F(x) = integral of f from the left edge to x, with F(x_0) = 0.
///
/// The zero-mean part is inverted in transform space and the mean is
/// carried by the linear term mean * (x - x_0), which is what cumulative
/// trapezoid integration gives for a constant. The left edge stands in for
/// -infinity, so f must have decayed there.
inline RealField antiderivative(const RealField& f,
                                double decay_tol = kDefaultDecayTolerance) {
  const Grid1D& g = f.grid();
  if (std::abs(f[0]) > decay_tol) {
    std::ostringstream msg;
    msg << "domain too small for line-integral proxy: |f(x_0)| = " << std::abs(f[0]) << " exceeds "
        << decay_tol;
    throw PreconditionError(msg.str());
  }
  Spectrum spec = g.forward(f.values());
  const double mean = spec[0].real() / static_cast<double>(g.size());
  spec[0] = 0.0;
  spec[g.nyquist_index()] = 0.0;
  for (std::size_t m = 1; m < g.nyquist_index(); ++m) {
    spec[m] /= Complex(0.0, g.wavenumber(m));
  }
  std::vector<double> F = g.inverse(spec);
  const double offset = F[0];
  const double x0 = g.node(0);
  for (std::size_t j = 0; j < F.size(); ++j) F[j] += mean * (g.node(j) - x0) - offset;
  return RealField(g, std::move(F));
}

}  // namespace ckdv

#endif  // CKDV_GRID_HPP
