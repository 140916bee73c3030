#ifndef CKDV_INVARIANTS_HPP
#define CKDV_INVARIANTS_HPP

// Conserved quantities of the coupled system, the H1 Sobolev norm and the
// a-priori bound on that norm.
//
//   H      = int ( -u^3/3 - u P/2 + (u')^2 + sum_i (phi_i')^2 ) dx
//   V      = int ( u^2 + P ) dx
//   H1     = int u dx,   H_half_i = int phi_i dx
//   M_ij   = int phi_i(x) int_{-inf}^x phi_j(s) ds dx
//   ||.||^2 = int ( u^2 + sum phi_i^2 + (u')^2 + sum (phi_i')^2 ) dx
//
// with P = sum_i phi_i^2. The Clifford-valued non-local invariant is kept as
// the full matrix M; its scalar part is -sum_i M_ii and its bivector parts
// are M_ij - M_ji.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"
#include "ckdv/state.hpp"

namespace ckdv {

inline double hamiltonian(const CoupledState& s) {
  const RealField p = p_body(s);
  const RealField du = deriv(s.u, 1);
  RealField density(s.grid());
  for (std::size_t j = 0; j < density.size(); ++j) {
    const double u = s.u[j];
    density[j] = -u * u * u / 3.0 - 0.5 * u * p[j] + du[j] * du[j];
  }
  for (const auto& phi : s.phi) {
    const RealField dphi = deriv(phi, 1);
    for (std::size_t j = 0; j < density.size(); ++j) density[j] += dphi[j] * dphi[j];
  }
  return integrate(density);
}

inline double casimir_v(const CoupledState& s) {
  RealField density = p_body(s);
  for (std::size_t j = 0; j < density.size(); ++j) density[j] += s.u[j] * s.u[j];
  return integrate(density);
}

struct Masses {
  double H1 = 0.0;
  std::vector<double> H_half;
};

inline Masses masses(const CoupledState& s) {
  Masses m{integrate(s.u), {}};
  for (const auto& phi : s.phi) m.H_half.push_back(integrate(phi));
  return m;
}

/// Square matrix stored row-major.
struct Matrix {
  std::size_t n = 0;
  std::vector<double> data;

  explicit Matrix(std::size_t size = 0) : n(size), data(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

/// M_ij = int phi_i F_j dx with F_j the primitive of phi_j anchored at the
/// left edge. Every phi_j must have decayed there.
inline Matrix nonlocal_matrix(const CoupledState& s, double decay_tol = kDefaultDecayTolerance) {
  const std::size_t n = s.components();
  std::vector<RealField> primitives;
  primitives.reserve(n);
  for (const auto& phi : s.phi) primitives.push_back(antiderivative(phi, decay_tol));
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = integrate(s.phi[i] * primitives[j]);
  }
  return m;
}

namespace detail {

// int (f^2 + f'^2) dx from a half-spectrum, by Parseval. Identical to the
// trapezoid rule applied to f^2 + (spectral f')^2, so the Nyquist mode
// contributes to f^2 only.
inline double h1_sq_from_spectrum(const Grid1D& g, std::span<const Complex> c) {
  const std::size_t nyq = g.nyquist_index();
  double sum = std::norm(c[0]) + std::norm(c[nyq]);
  for (std::size_t m = 1; m < nyq; ++m) {
    const double k = g.wavenumber(m);
    sum += 2.0 * (1.0 + k * k) * std::norm(c[m]);
  }
  const double n = static_cast<double>(g.size());
  return sum * g.length() / (n * n);
}

inline double h1_sq_field(const RealField& f) {
  return h1_sq_from_spectrum(f.grid(), f.grid().forward(f.values()));
}

}  // namespace detail

/// ||(u, xi)||_{H1}^2.
inline double sobolev_h1_sq(const CoupledState& s) {
  double sum = detail::h1_sq_field(s.u);
  for (const auto& phi : s.phi) sum += detail::h1_sq_field(phi);
  return sum;
}

inline double sobolev_h1(const CoupledState& s) { return std::sqrt(sobolev_h1_sq(s)); }

/// ||(u_a - u_b, xi_a - xi_b)||_{H1}.
inline double sobolev_h1(const CoupledState& a, const CoupledState& b) {
  if (!(a.grid() == b.grid())) throw PreconditionError("sobolev_h1: grid mismatch");
  return sobolev_h1(a - b);
}

/// (1/sqrt 2) ||(u, xi)||_{H1} - sup|u| over the nodes. Non-negative by the
/// one-dimensional Sobolev embedding.
inline double sup_norm_margin(double sup_u, double sobolev_sq) {
  return std::sqrt(0.5 * sobolev_sq) - sup_u;
}

inline double sup_norm_margin(const CoupledState& s) {
  return sup_norm_margin(s.u.max_abs(), sobolev_h1_sq(s));
}

/// d = V / (2 sqrt 2), e = V + H, bound = (d + sqrt(d^2 + 4e)) / 2.
struct AprioriData {
  double d = 0.0;
  double e = 0.0;
  double bound = 0.0;
};

inline AprioriData apriori_from(double V, double H) {
  AprioriData a;
  a.d = V / (2.0 * std::numbers::sqrt2);
  a.e = V + H;
  const double disc = a.d * a.d + 4.0 * a.e;
  if (disc < 0.0) {
    throw NumericalError("a-priori bound: d^2 + 4e < 0, inconsistent V and H", 0.0);
  }
  a.bound = 0.5 * (a.d + std::sqrt(disc));
  return a;
}

inline AprioriData apriori(const CoupledState& s0) { return apriori_from(casimir_v(s0), hamiltonian(s0)); }

struct InvariantReport {
  double t = 0.0;
  double H = 0.0;
  double V = 0.0;
  double H1 = 0.0;
  std::vector<double> H_half;
  std::optional<Matrix> M;
  double sobolev_sq = 0.0;
  double apriori_bound = 0.0;
  double sup_u = 0.0;
};

struct InvariantOptions {
  bool nonlocal = true;
  double decay_tol = kDefaultDecayTolerance;
};

inline InvariantReport make_report(const CoupledState& s, double t, double apriori_bound,
                                   const InvariantOptions& opts = {}) {
  InvariantReport r;
  r.t = t;
  r.H = hamiltonian(s);
  r.V = casimir_v(s);
  auto m = masses(s);
  r.H1 = m.H1;
  r.H_half = std::move(m.H_half);
  if (opts.nonlocal) r.M = nonlocal_matrix(s, opts.decay_tol);
  r.sobolev_sq = sobolev_h1_sq(s);
  r.apriori_bound = apriori_bound;
  r.sup_u = s.u.max_abs();
  return r;
}

struct AprioriCheck {
  bool ok = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_t = 0.0;
};

/// ok iff sqrt(sobolev_sq) <= bound at every record.
inline AprioriCheck check_apriori(std::span<const InvariantReport> records, const AprioriData& bound) {
  if (records.empty()) throw PreconditionError("check_apriori: no records");
  AprioriCheck c;
  for (const auto& r : records) {
    const double margin = bound.bound - std::sqrt(r.sobolev_sq);
    if (margin < c.worst_margin) {
      c.worst_margin = margin;
      c.worst_t = r.t;
    }
  }
  c.ok = c.worst_margin >= 0.0;
  return c;
}

/// Maximum over records of the drift relative to the first record. For
/// vector-valued quantities the drift is max_i |Q_i(t) - Q_i(0)| divided by
/// max_i |Q_i(0)|; a quantity that starts at exactly zero reports its
/// absolute drift.
struct InvariantDrift {
  double H = 0.0;
  double V = 0.0;
  double H1 = 0.0;
  double Hhalf_max = 0.0;
  double M_max = 0.0;
};

namespace detail {

inline double relative_drift(double q0, double q) {
  const double scale = std::abs(q0);
  return scale > 0.0 ? std::abs(q - q0) / scale : std::abs(q - q0);
}

inline double relative_drift(std::span<const double> q0, std::span<const double> q) {
  double scale = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < q0.size(); ++i) {
    scale = std::max(scale, std::abs(q0[i]));
    diff = std::max(diff, std::abs(q[i] - q0[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace detail

inline InvariantDrift invariant_drift(std::span<const InvariantReport> records) {
  InvariantDrift d;
  if (records.empty()) return d;
  const InvariantReport& r0 = records.front();
  for (const auto& r : records) {
    d.H = std::max(d.H, detail::relative_drift(r0.H, r.H));
    d.V = std::max(d.V, detail::relative_drift(r0.V, r.V));
    d.H1 = std::max(d.H1, detail::relative_drift(r0.H1, r.H1));
    d.Hhalf_max = std::max(d.Hhalf_max, detail::relative_drift(r0.H_half, r.H_half));
    if (r0.M && r.M) d.M_max = std::max(d.M_max, detail::relative_drift(r0.M->data, r.M->data));
  }
  return d;
}

/// Observer that records an InvariantReport per sample. The a-priori bound
/// comes from the first state it sees.
class InvariantMonitor {
 public:
  explicit InvariantMonitor(InvariantOptions opts = {}) : opts_(opts) {}

  void operator()(double t, const CoupledState& s) {
    if (!bound_) bound_ = apriori(s);
    records_.push_back(make_report(s, t, bound_->bound, opts_));
  }

  const std::vector<InvariantReport>& records() const { return records_; }
  const std::optional<AprioriData>& bound() const { return bound_; }

 private:
  InvariantOptions opts_;
  std::optional<AprioriData> bound_;
  std::vector<InvariantReport> records_;
};

}  // namespace ckdv

#endif  // CKDV_INVARIANTS_HPP
