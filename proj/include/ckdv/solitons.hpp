#ifndef CKDV_SOLITONS_HPP
#define CKDV_SOLITONS_HPP

// One-soliton of the coupled system: u = phi_C(x - x0 - C t), xi = 0, where
// phi_C is the decaying solution of phi'' + phi^2 / 2 = C phi,
//
//   phi_C(y) = 3 C sech^2( sqrt(C) y / 2 ).

#include <cmath>
#include <cstddef>
#include <sstream>

#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"
#include "ckdv/state.hpp"

namespace ckdv {

/// Largest tolerated profile value at distance L/2 from the centre.
inline constexpr double kSolitonEdgeTolerance = 1e-10;

struct SolitonSpec {
  double C = 1.0;
  double x0 = 0.0;

  double peak() const { return 3.0 * C; }
  double width() const { return 2.0 / std::sqrt(C); }
};

/// Closed-form profile on the real line.
inline double soliton_value(double C, double y) {
  const double s = 1.0 / std::cosh(0.5 * std::sqrt(C) * y);
  return 3.0 * C * s * s;
}

inline void check_soliton_fits(const SolitonSpec& spec, const Grid1D& grid) {
  if (!(spec.C > 0.0) || !std::isfinite(spec.C)) {
    std::ostringstream msg;
    msg << "soliton speed C must be positive, got " << spec.C;
    throw ConfigError(msg.str());
  }
  const double edge = soliton_value(spec.C, 0.5 * grid.length());
  if (edge >= kSolitonEdgeTolerance) {
    std::ostringstream msg;
    msg << "soliton with C = " << spec.C << " does not decay on a domain of length " << grid.length()
        << " (edge value " << edge << ")";
    throw PreconditionError(msg.str());
  }
}

/// Wraps y into [-L/2, L/2).
inline double wrap_periodic(double y, double length) {
  double w = std::fmod(y + 0.5 * length, length);
  if (w < 0.0) w += length;
  return w - 0.5 * length;
}

/// The travelling profile at time t, centred at x0 + C t (periodically wrapped).
inline RealField soliton_profile(const SolitonSpec& spec, const Grid1D& grid, double t = 0.0) {
  check_soliton_fits(spec, grid);
  const double centre = spec.x0 + spec.C * t;
  return RealField::sample(grid, [&](double x) {
    return soliton_value(spec.C, wrap_periodic(x - centre, grid.length()));
  });
}

inline CoupledState soliton_state(const SolitonSpec& spec, const Grid1D& grid, std::size_t n_components = 2) {
  return CoupledState(soliton_profile(spec, grid), std::vector<RealField>(n_components, RealField(grid)));
}

/// max |f'' + f^2/2 - C f| with spectral f''.
inline double tw_residual(const RealField& f, double C) {
  const RealField f2 = deriv(f, 2);
  double worst = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    worst = std::max(worst, std::abs(f2[j] + 0.5 * f[j] * f[j] - C * f[j]));
  }
  return worst;
}

}  // namespace ckdv

#endif  // CKDV_SOLITONS_HPP
