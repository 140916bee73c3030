#ifndef CKDV_STATE_HPP
#define CKDV_STATE_HPP

// Field state of the coupled system: the real field u and the Clifford
// coefficients phi_i of xi. Only coefficients are stored; every grade of the
// expansion evolves by the same scalar equation, so higher-grade
// coefficients are just extra component slots.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"

namespace ckdv {

inline constexpr std::size_t kMaxComponents = 16;

class CoupledState {
 public:
  CoupledState(const Grid1D& grid, std::size_t n_components)
      : u(grid), phi(n_components, RealField(grid)) {
    validate_shape();
  }

  CoupledState(RealField u_field, std::vector<RealField> phi_fields)
      : u(std::move(u_field)), phi(std::move(phi_fields)) {
    validate_shape();
  }

  const Grid1D& grid() const { return u.grid(); }
  std::size_t components() const { return phi.size(); }

  bool all_finite() const {
    if (!u.all_finite()) return false;
    for (const auto& p : phi) {
      if (!p.all_finite()) return false;
    }
    return true;
  }

  /// Largest |value| over every field.
  double max_abs() const {
    double m = u.max_abs();
    for (const auto& p : phi) m = std::max(m, p.max_abs());
    return m;
  }

  void validate_shape() const {
    if (phi.empty() || phi.size() > kMaxComponents) {
      throw ConfigError("number of xi components must be in 1.." +
                        std::to_string(kMaxComponents) + ", got " +
                        std::to_string(phi.size()));
    }
    for (const auto& p : phi) {
      if (!(p.grid() == u.grid())) throw PreconditionError("state fields live on different grids");
    }
  }

  RealField u;
  std::vector<RealField> phi;
};

/// Time derivative (u_t, xi_t) of a state.
struct StateRate {
  RealField du;
  std::vector<RealField> dphi;

  double max_abs() const {
    double m = du.max_abs();
    for (const auto& p : dphi) m = std::max(m, p.max_abs());
    return m;
  }
};

/// P(xi xi-bar) = sum_i phi_i^2, the body of xi times its conjugate.
inline RealField p_body(const CoupledState& s) {
  RealField p(s.grid());
  for (const auto& f : s.phi) {
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += f[j] * f[j];
  }
  return p;
}

inline RealField p_body_deriv(const CoupledState& s) { return deriv(p_body(s), 1); }

namespace detail {

inline CoupledState axpy_fields(double a, const RealField& xu, std::span<const RealField> xphi,
                                const CoupledState& y) {
  if (xphi.size() != y.phi.size() || !(xu.grid() == y.grid())) {
    throw PreconditionError("axpy_state: shape mismatch");
  }
  CoupledState out = y;
  out.u += a * xu;
  for (std::size_t i = 0; i < xphi.size(); ++i) out.phi[i] += a * xphi[i];
  return out;
}

}  // namespace detail

/// y + a x, componentwise.
inline CoupledState axpy_state(double a, const CoupledState& x, const CoupledState& y) {
  return detail::axpy_fields(a, x.u, x.phi, y);
}

inline CoupledState axpy_state(double a, const StateRate& x, const CoupledState& y) {
  return detail::axpy_fields(a, x.du, x.dphi, y);
}

inline CoupledState scale_state(const CoupledState& s, double a) {
  CoupledState out = s;
  out.u *= a;
  for (auto& p : out.phi) p *= a;
  return out;
}

inline CoupledState operator+(const CoupledState& a, const CoupledState& b) {
  return axpy_state(1.0, b, a);
}

inline CoupledState operator-(const CoupledState& a, const CoupledState& b) {
  return axpy_state(-1.0, b, a);
}

/// Spectral translation of the state to the right by s. With
/// `include_xi == false` only u moves.
inline CoupledState translate_state(const CoupledState& s, double shift, bool include_xi = true) {
  CoupledState out = s;
  out.u = translate(s.u, shift);
  if (include_xi) {
    for (auto& p : out.phi) p = translate(p, shift);
  }
  return out;
}

inline CoupledState dealias_state(const CoupledState& s) {
  CoupledState out = s;
  out.u = dealias(s.u);
  for (auto& p : out.phi) p = dealias(p);
  return out;
}

inline double max_abs_diff(const CoupledState& a, const CoupledState& b) {
  if (a.components() != b.components()) throw PreconditionError("state shape mismatch");
  double m = max_abs_diff(a.u, b.u);
  for (std::size_t i = 0; i < a.components(); ++i) m = std::max(m, max_abs_diff(a.phi[i], b.phi[i]));
  return m;
}

inline double max_abs_diff(const StateRate& a, const StateRate& b) {
  if (a.dphi.size() != b.dphi.size()) throw PreconditionError("rate shape mismatch");
  double m = max_abs_diff(a.du, b.du);
  for (std::size_t i = 0; i < a.dphi.size(); ++i) m = std::max(m, max_abs_diff(a.dphi[i], b.dphi[i]));
  return m;
}

}  // namespace ckdv

#endif  // CKDV_STATE_HPP
