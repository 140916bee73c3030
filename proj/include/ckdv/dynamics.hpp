#ifndef CKDV_DYNAMICS_HPP
#define CKDV_DYNAMICS_HPP

// Right-hand side of the coupled system
//
//   u_t  = -u''' - u u' - (1/4) (sum_i phi_i^2)'
//   phi_t = -phi_i''' - (1/2) (phi_i u)'
//
// together with the variational derivatives of the Hamiltonian and the
// check that the Hamiltonian flow under the brackets
// {u,u} = d_x delta, {phi_i,phi_j} = delta_ij d_x delta reproduces it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"
#include "ckdv/state.hpp"

namespace ckdv {

/// Nonlinear part of the right-hand side evaluated in transform space.
///
/// Field 0 is u, fields 1..N_c are phi_i. Quadratic products are formed on
/// the nodes and, when dealiasing is on, truncated by the two-thirds rule
/// before differentiation. Owns its workspace; one instance per thread.
class NonlinearTerm {
 public:
  NonlinearTerm(Grid1D grid, std::size_t n_components, bool dealias = true)
      : grid_(std::move(grid)),
        dealias_(dealias),
        phys_(n_components + 1, std::vector<double>(grid_.size())),
        product_(grid_.size()),
        scratch_(grid_.spectrum_size()) {}

  std::size_t fields() const { return phys_.size(); }

  /// out[f] = spectrum of the nonlinear rate of field f. Returns the largest
  /// |value| of the input fields on the nodes (NaN if any value is non-finite).
  double operator()(std::span<const Spectrum> in, std::span<Spectrum> out) {
    const std::size_t nf = phys_.size();
    for (std::size_t f = 0; f < nf; ++f) grid_.inverse(in[f], phys_[f], scratch_);
    const std::vector<double>& u = phys_[0];
    const std::size_t n = grid_.size();

    double peak = 0.0;
    for (const auto& field : phys_) {
      for (double v : field) {
        if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
        peak = std::max(peak, std::abs(v));
      }
    }

    // u: -(u^2/2 + P/4)'
    for (std::size_t j = 0; j < n; ++j) {
      double p = 0.0;
      for (std::size_t f = 1; f < nf; ++f) p += phys_[f][j] * phys_[f][j];
      product_[j] = 0.5 * u[j] * u[j] + 0.25 * p;
    }
    finish(0, out);
    // phi_i: -(phi_i u / 2)'
    for (std::size_t f = 1; f < nf; ++f) {
      for (std::size_t j = 0; j < n; ++j) product_[j] = 0.5 * phys_[f][j] * u[j];
      finish(f, out);
    }
    return peak;
  }

 private:
  void finish(std::size_t f, std::span<Spectrum> out) {
    grid_.forward(product_, out[f]);
    if (dealias_) apply_dealias(grid_, out[f]);
    apply_derivative(grid_, out[f], 1);
    for (auto& c : out[f]) c = -c;
  }

  Grid1D grid_;
  bool dealias_;
  std::vector<std::vector<double>> phys_;
  std::vector<double> product_;
  Spectrum scratch_;
};

namespace detail {

inline std::vector<Spectrum> to_spectra(const CoupledState& s) {
  std::vector<Spectrum> out;
  out.reserve(s.components() + 1);
  out.push_back(s.grid().forward(s.u.values()));
  for (const auto& p : s.phi) out.push_back(s.grid().forward(p.values()));
  return out;
}

inline CoupledState from_spectra(const Grid1D& g, std::span<const Spectrum> spec) {
  std::vector<RealField> phi;
  phi.reserve(spec.size() - 1);
  for (std::size_t f = 1; f < spec.size(); ++f) phi.emplace_back(g, g.inverse(spec[f]));
  return CoupledState(RealField(g, g.inverse(spec[0])), std::move(phi));
}

}  // namespace detail

/// (u_t, xi_t) of the coupled system.
inline StateRate rhs(const CoupledState& s, bool dealias = true) {
  if (!s.all_finite()) throw NumericalError("rhs: state has non-finite values", 0.0);
  const Grid1D& g = s.grid();
  std::vector<Spectrum> spec = detail::to_spectra(s);
  std::vector<Spectrum> nl(spec.size(), Spectrum(g.spectrum_size()));
  NonlinearTerm term(g, s.components(), dealias);
  term(spec, nl);
  for (std::size_t f = 0; f < spec.size(); ++f) {
    apply_derivative(g, spec[f], 3);
    for (std::size_t m = 0; m < spec[f].size(); ++m) spec[f][m] = nl[f][m] - spec[f][m];
  }
  CoupledState r = detail::from_spectra(g, spec);
  return StateRate{std::move(r.u), std::move(r.phi)};
}

/// delta H / delta u = -u^2 - P/2 - 2 u''. The quadratic part is dealiased,
/// matching the truncation used by rhs.
inline RealField grad_h_u(const CoupledState& s) {
  const Grid1D& g = s.grid();
  const RealField p = p_body(s);
  RealField q(g);
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = -s.u[j] * s.u[j] - 0.5 * p[j];
  return dealias(q) - 2.0 * deriv(s.u, 2);
}

/// delta H / delta phi_i = -u phi_i - 2 phi_i'' (0-based component index).
inline RealField grad_h_phi(const CoupledState& s, std::size_t i) {
  if (i >= s.components()) throw ConfigError("component index out of range");
  RealField q = -1.0 * (s.u * s.phi[i]);
  return dealias(q) - 2.0 * deriv(s.phi[i], 2);
}

/// Scale s applied to H when generating the flow d_x(s delta H / delta field).
struct BracketConvention {
  double generator_scale = 0.5;

  static BracketConvention half() { return {0.5}; }
  static BracketConvention unit() { return {1.0}; }
};

inline StateRate bracket_flow(const CoupledState& s, BracketConvention conv) {
  if (conv.generator_scale != 0.5 && conv.generator_scale != 1.0) {
    throw ConfigError("generator scale must be 1 or 1/2");
  }
  StateRate r{conv.generator_scale * deriv(grad_h_u(s), 1), {}};
  r.dphi.reserve(s.components());
  for (std::size_t i = 0; i < s.components(); ++i) {
    r.dphi.push_back(conv.generator_scale * deriv(grad_h_phi(s, i), 1));
  }
  return r;
}

struct BracketReport {
  double residual_half = 0.0;
  double residual_one = 0.0;
  double inferred_scale = 0.5;
};

/// Compares the bracket flow of H and H/2 with rhs, residuals normalized by
/// the max-norm of rhs.
inline BracketReport bracket_consistency(const CoupledState& s) {
  const StateRate ref = rhs(s);
  const double norm = ref.max_abs();
  if (!(norm > 0.0)) throw PreconditionError("degenerate normalization: rhs vanishes");
  BracketReport rep;
  rep.residual_half = max_abs_diff(bracket_flow(s, BracketConvention::half()), ref) / norm;
  rep.residual_one = max_abs_diff(bracket_flow(s, BracketConvention::unit()), ref) / norm;
  rep.inferred_scale = rep.residual_half <= rep.residual_one ? 0.5 : 1.0;
  return rep;
}

}  // namespace ckdv

#endif  // CKDV_DYNAMICS_HPP
