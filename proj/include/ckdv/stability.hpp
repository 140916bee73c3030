#ifndef CKDV_STABILITY_HPP
#define CKDV_STABILITY_HPP

// Liapunov stability experiments for the ground state and the one-soliton.
//
// Distances:
//   d_I (a, b)  = ||(u_a - u_b, xi_a - xi_b)||_{H1}
//   d_II(a, b)  = inf_tau ||(tau u_a - u_b, xi_a - xi_b)||_{H1}
// where (tau u)(x) = u(x + tau). By default only u is translated.
//
// For a perturbed soliton (u, xi) = (phi + h, xi) with Delta H = H(u, xi) -
// H(phi, 0), the checks are
//   |Delta H| <= [max(1, C) + delta / (3 sqrt 2)] ||(h, xi)||^2_{H1}
//    Delta H  >= (1/6) min(1, C) d_II^2
// and, with H conserved, d_II(t) <= sqrt(6 Delta H / min(1, C)) for all t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"
#include "ckdv/integrator.hpp"
#include "ckdv/invariants.hpp"
#include "ckdv/parallel.hpp"
#include "ckdv/solitons.hpp"
#include "ckdv/state.hpp"

namespace ckdv {

inline double distance_d1(const CoupledState& a, const CoupledState& b) { return sobolev_h1(a, b); }

struct QuotientDistance {
  double value = 0.0;
  /// Minimizing translation: tau u_a(x) = u_a(x + tau_star).
  double tau_star = 0.0;
};

namespace detail {

// H1 objective || (tau a) - b ||^2 over the translated field pairs plus a
// constant from the untranslated ones.
class TranslationObjective {
 public:
  TranslationObjective(const Grid1D& g, std::vector<Spectrum> a, std::vector<Spectrum> b, double fixed)
      : g_(g), a_(std::move(a)), b_(std::move(b)), fixed_(fixed), work_(g.spectrum_size()) {}

  double operator()(double tau) const {
    double sum = fixed_;
    for (std::size_t f = 0; f < a_.size(); ++f) {
      std::copy(a_[f].begin(), a_[f].end(), work_.begin());
      apply_translation(g_, work_, -tau);
      for (std::size_t m = 0; m < work_.size(); ++m) work_[m] -= b_[f][m];
      sum += h1_sq_from_spectrum(g_, work_);
    }
    return sum;
  }

  /// Objective at every grid shift tau_j = j dx (j = 0..N-1), from one
  /// inverse transform of the weighted cross spectrum.
  std::vector<double> grid_scan() const {
    const std::size_t nm = g_.spectrum_size();
    const std::size_t nyq = g_.nyquist_index();
    Spectrum cross(nm);
    double norms = fixed_;
    for (std::size_t f = 0; f < a_.size(); ++f) {
      norms += h1_sq_from_spectrum(g_, a_[f]) + h1_sq_from_spectrum(g_, b_[f]);
      for (std::size_t m = 0; m < nm; ++m) {
        const double k = g_.wavenumber(m);
        const double w = (m == nyq) ? 1.0 : 1.0 + k * k;
        cross[m] += w * a_[f][m] * std::conj(b_[f][m]);
      }
    }
    // c2r gives sum over the full spectrum, i.e. the Hermitian extension.
    std::vector<double> y = g_.inverse(cross);
    const double n = static_cast<double>(g_.size());
    const double scale = g_.length() / n;  // inverse() already divided by N
    for (double& v : y) v = norms - 2.0 * scale * v;
    return y;
  }

 private:
  const Grid1D& g_;
  std::vector<Spectrum> a_, b_;
  double fixed_;
  mutable Spectrum work_;
};

}  // namespace detail

/// d_II with the translation acting on u only (the default) or on
/// every field when `translate_xi` is set.
///
/// The objective is scanned over all N grid shifts through a correlation in
/// transform space, then refined by golden-section search on one grid
/// spacing either side of the best shift. The result never exceeds the
/// value at tau = 0, so d_II <= d_I.
inline QuotientDistance distance_d2(const CoupledState& a, const CoupledState& b, bool translate_xi = false) {
  if (!(a.grid() == b.grid()) || a.components() != b.components()) {
    throw PreconditionError("distance_d2: grid or shape mismatch");
  }
  const Grid1D& g = a.grid();
  std::vector<Spectrum> sa{g.forward(a.u.values())};
  std::vector<Spectrum> sb{g.forward(b.u.values())};
  double fixed = 0.0;
  for (std::size_t i = 0; i < a.components(); ++i) {
    if (translate_xi) {
      sa.push_back(g.forward(a.phi[i].values()));
      sb.push_back(g.forward(b.phi[i].values()));
    } else {
      fixed += detail::h1_sq_field(a.phi[i] - b.phi[i]);
    }
  }
  const detail::TranslationObjective objective(g, std::move(sa), std::move(sb), fixed);

  const std::vector<double> scan = objective.grid_scan();
  const auto best = static_cast<std::size_t>(std::min_element(scan.begin(), scan.end()) - scan.begin());
  const long n = static_cast<long>(g.size());
  const long shift = static_cast<long>(best) <= n / 2 ? static_cast<long>(best) : static_cast<long>(best) - n;
  const double dx = g.spacing();
  const double coarse = static_cast<double>(shift) * dx;

  // Golden section on [coarse - dx, coarse + dx].
  constexpr double inv_phi = 0.6180339887498949;
  double lo = coarse - dx;
  double hi = coarse + dx;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < 100 && hi - lo > 1e-15 * dx; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }

  QuotientDistance best_result{f1 <= f2 ? f1 : f2, f1 <= f2 ? x1 : x2};
  if (const double v = objective(coarse); v < best_result.value) best_result = {v, coarse};
  // tau = 0 through the same route as d_I keeps d_II <= d_I exact.
  if (const double v = sobolev_h1_sq(a - b); v <= best_result.value) best_result = {v, 0.0};
  best_result.value = std::sqrt(std::max(best_result.value, 0.0));
  return best_result;
}

enum class PerturbationMode { u_only, xi_only, mixed };

inline PerturbationMode parse_perturbation_mode(const std::string& s) {
  if (s == "u-only") return PerturbationMode::u_only;
  if (s == "xi-only") return PerturbationMode::xi_only;
  if (s == "mixed") return PerturbationMode::mixed;
  throw ConfigError("unknown perturbation mode '" + s + "' (expected u-only, xi-only or mixed)");
}

inline std::string to_string(PerturbationMode m) {
  switch (m) {
    case PerturbationMode::u_only: return "u-only";
    case PerturbationMode::xi_only: return "xi-only";
    case PerturbationMode::mixed: return "mixed";
  }
  return "mixed";
}

/// Shape of the random bump fields used for perturbations and random
/// initial data. Lengths are fractions of the domain length.
struct BumpShape {
  std::size_t count = 4;
  double centre_spread = 1.0 / 8.0;  // centres uniform in [-spread L, spread L]
  double min_width = 1.0 / 20.0;
  double max_width = 1.0 / 14.0;
  /// Highest retained mode as a fraction of N (modes 0..N*fraction).
  double band_fraction = 1.0 / 16.0;
};

/// Sum of Gaussian bumps with N(0,1) amplitudes, projected onto the low band.
inline RealField random_bumps(const Grid1D& g, std::mt19937_64& rng, const BumpShape& shape = {}) {
  const double L = g.length();
  std::uniform_real_distribution<double> centre(-shape.centre_spread * L, shape.centre_spread * L);
  std::uniform_real_distribution<double> width(shape.min_width * L, shape.max_width * L);
  std::normal_distribution<double> amplitude(0.0, 1.0);
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t b = 0; b < shape.count; ++b) {
    const double c = centre(rng);
    const double w = width(rng);
    const double a = amplitude(rng);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double y = (g.node(j) - c) / w;
      v[j] += a * std::exp(-y * y);
    }
  }
  Spectrum spec = g.forward(v);
  apply_lowpass(spec, static_cast<std::size_t>(shape.band_fraction * static_cast<double>(g.size())));
  return RealField(g, g.inverse(spec));
}

/// Band-limited, boundary-decayed random increment with H1 norm exactly
/// `delta`. Deterministic in `seed`.
inline CoupledState make_perturbation(const Grid1D& g, std::size_t n_components, double delta,
                                      std::uint64_t seed, PerturbationMode mode = PerturbationMode::mixed,
                                      const BumpShape& shape = {}) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("perturbation size must be >= 0");
  CoupledState inc(g, n_components);
  if (delta == 0.0) return inc;
  std::mt19937_64 rng(seed);
  if (mode != PerturbationMode::xi_only) inc.u = random_bumps(g, rng, shape);
  if (mode != PerturbationMode::u_only) {
    for (auto& p : inc.phi) p = random_bumps(g, rng, shape);
  }
  const double norm = sobolev_h1(inc);
  if (!(norm > 0.0)) throw NumericalError("random perturbation vanished", 0.0);
  return scale_state(inc, delta / norm);
}

/// Scales every field so that V equals v_target.
inline CoupledState rescale_to_v(const CoupledState& s, double v_target) {
  const double v = casimir_v(s);
  if (!(v > 0.0)) throw PreconditionError("rescale_to_v: state has zero V");
  if (!(v_target >= 0.0)) throw ConfigError("rescale_to_v: target V must be >= 0");
  return scale_state(s, std::sqrt(v_target / v));
}

struct PerturbedState {
  CoupledState state;
  /// Realized d_I from the base state.
  double delta = 0.0;
};

/// base + a * direction, optionally rescaled onto the V level set of `base`,
/// with the amplitude a tuned so that d_I(result, base) = delta.
inline PerturbedState perturb(const CoupledState& base, const CoupledState& direction, double delta,
                              bool v_rescale) {
  if (delta == 0.0) return {base, 0.0};
  const double dir_norm = sobolev_h1(direction);
  if (!(dir_norm > 0.0)) throw PreconditionError("perturb: zero direction");
  const double v_base = casimir_v(base);
  auto build = [&](double amp) {
    CoupledState s = axpy_state(amp / dir_norm, direction, base);
    if (v_rescale) s = rescale_to_v(s, v_base);
    return s;
  };
  double amp = delta;
  PerturbedState out{build(amp), 0.0};
  out.delta = distance_d1(out.state, base);
  if (!v_rescale) return out;
  // d_I is close to linear in the amplitude, so a ratio update converges fast.
  for (int it = 0; it < 40 && std::abs(out.delta - delta) > 1e-14 * delta; ++it) {
    if (!(out.delta > 0.0)) break;
    amp *= delta / out.delta;
    PerturbedState trial{build(amp), 0.0};
    trial.delta = distance_d1(trial.state, base);
    out = std::move(trial);
  }
  return out;
}

struct DeltaHCheck {
  bool ok = true;
  double dH = 0.0;
  double bound = 0.0;
  /// bound - |dH| for the upper check, dH - bound for the lower one.
  double margin = 0.0;
};

namespace detail {

// H differences are limited by the round-off of H itself.
inline double dh_roundoff(double h_a, double h_b) {
  return 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(h_a) + std::abs(h_b));
}

}  // namespace detail

inline double upper_coefficient(double C, double delta) {
  return std::max(1.0, C) + delta / (3.0 * std::numbers::sqrt2);
}

inline double lower_coefficient(double C) { return std::min(1.0, C) / 6.0; }

/// |Delta H| <= [max(1, C) + delta/(3 sqrt 2)] ||(h, xi)||^2_{H1} at t = 0.
inline DeltaHCheck check_dh_upper(double C, const CoupledState& soliton, const CoupledState& perturbed,
                                  double delta) {
  const double h0 = hamiltonian(soliton);
  const double h1 = hamiltonian(perturbed);
  const double dist = distance_d1(perturbed, soliton);
  DeltaHCheck c;
  c.dH = h1 - h0;
  c.bound = upper_coefficient(C, delta) * dist * dist;
  c.margin = c.bound - std::abs(c.dH);
  c.ok = c.margin >= -detail::dh_roundoff(h0, h1);
  return c;
}

/// Delta H >= (1/6) min(1, C) d_II^2.
inline DeltaHCheck check_dh_lower(double C, const CoupledState& soliton, const CoupledState& perturbed,
                                  bool translate_xi = false) {
  const double h0 = hamiltonian(soliton);
  const double h1 = hamiltonian(perturbed);
  const double d2 = distance_d2(perturbed, soliton, translate_xi).value;
  DeltaHCheck c;
  c.dH = h1 - h0;
  c.bound = lower_coefficient(C) * d2 * d2;
  c.margin = c.dH - c.bound;
  c.ok = c.margin >= -detail::dh_roundoff(h0, h1);
  return c;
}

struct StabilitySample {
  double t = 0.0;
  double dI = 0.0;
  double dII = 0.0;
  double tau_star = 0.0;
  double sobolev = 0.0;
  double sup_u = 0.0;
};

struct StabilityOptions {
  SolverConfig solver{1e-3, 20.0, 100, true, false};
  std::size_t n_components = 2;
  PerturbationMode mode = PerturbationMode::mixed;
  bool v_rescale = true;
  bool translate_xi = false;
  std::size_t threads = 0;
  BumpShape shape{};
};

struct StabilityRunReport {
  std::uint64_t seed = 0;
  double delta = 0.0;
  double C = 1.0;
  double dH = 0.0;
  double upper_coeff = 0.0;
  double lower_coeff = 0.0;
  double upper_margin = 0.0;
  double lower_margin = 0.0;
  double tracking_bound = 0.0;
  double worst_tracking_margin = std::numeric_limits<double>::infinity();
  double worst_sup_margin = std::numeric_limits<double>::infinity();
  double drift = 0.0;  // max relative drift of H and V along the run
  std::vector<StabilitySample> series;
  bool ok_upper = false;
  bool ok_lower = false;
  bool ok_tracking = false;
};

/// Records d_I, d_II and norms against the exact travelling soliton.
class SolitonTracker {
 public:
  SolitonTracker(const SolitonSpec& spec, std::size_t n_components, bool translate_xi)
      : spec_(spec), n_components_(n_components), translate_xi_(translate_xi) {}

  void operator()(double t, const CoupledState& s) {
    const CoupledState exact(soliton_profile(spec_, s.grid(), t),
                             std::vector<RealField>(n_components_, RealField(s.grid())));
    StabilitySample sample;
    sample.t = t;
    sample.dI = distance_d1(s, exact);
    const auto q = distance_d2(s, exact, translate_xi_);
    sample.dII = q.value;
    sample.tau_star = q.tau_star;
    const double norm_sq = sobolev_h1_sq(s);
    sample.sobolev = std::sqrt(norm_sq);
    sample.sup_u = s.u.max_abs();
    const double H = hamiltonian(s);
    const double V = casimir_v(s);
    if (series_.empty()) {
      h0_ = H;
      v0_ = V;
    }
    drift_ = std::max({drift_, detail::relative_drift(h0_, H), detail::relative_drift(v0_, V)});
    drift_series_.push_back(drift_);
    series_.push_back(sample);
  }

  const std::vector<StabilitySample>& series() const { return series_; }
  /// Running maximum of the H/V drift, aligned with series().
  const std::vector<double>& drift_series() const { return drift_series_; }

 private:
  SolitonSpec spec_;
  std::size_t n_components_;
  bool translate_xi_;
  double h0_ = 0.0, v0_ = 0.0, drift_ = 0.0;
  std::vector<StabilitySample> series_;
  std::vector<double> drift_series_;
};

/// Slack allowed on the tracking inequality given the invariant drift.
inline double tracking_slack(double drift) { return 1e-6 + 10.0 * drift; }

inline StabilityRunReport run_soliton_stability_single(const Grid1D& g, double C, double delta, std::uint64_t seed,
                                                       const StabilityOptions& opts) {
  const SolitonSpec spec{C, 0.0};
  const CoupledState soliton = soliton_state(spec, g, opts.n_components);
  StabilityRunReport rep;
  rep.seed = seed;
  rep.C = C;
  CoupledState start = soliton;
  if (delta > 0.0) {
    const CoupledState dir = make_perturbation(g, opts.n_components, 1.0, seed, opts.mode, opts.shape);
    PerturbedState p = perturb(soliton, dir, delta, opts.v_rescale);
    start = std::move(p.state);
    rep.delta = p.delta;
  }
  const DeltaHCheck up = check_dh_upper(C, soliton, start, rep.delta);
  const DeltaHCheck low = check_dh_lower(C, soliton, start, opts.translate_xi);
  rep.dH = up.dH;
  rep.upper_coeff = upper_coefficient(C, rep.delta);
  rep.lower_coeff = lower_coefficient(C);
  rep.upper_margin = up.margin;
  rep.lower_margin = low.margin;
  rep.ok_upper = up.ok;
  rep.ok_lower = low.ok;
  rep.tracking_bound = std::sqrt(std::max(rep.dH, 0.0) / rep.lower_coeff);

  SolitonTracker tracker(spec, opts.n_components, opts.translate_xi);
  const Observer obs = std::ref(tracker);
  evolve(start, opts.solver, std::span(&obs, 1));
  rep.series = tracker.series();
  rep.ok_tracking = rep.dH >= 0.0;
  for (std::size_t k = 0; k < rep.series.size(); ++k) {
    const auto& s = rep.series[k];
    const double margin = rep.tracking_bound + tracking_slack(tracker.drift_series()[k]) - s.dII;
    rep.worst_tracking_margin = std::min(rep.worst_tracking_margin, margin);
    if (margin < 0.0) rep.ok_tracking = false;
    rep.worst_sup_margin = std::min(rep.worst_sup_margin, std::sqrt(0.5) * s.sobolev - s.sup_u);
  }
  rep.drift = tracker.drift_series().empty() ? 0.0 : tracker.drift_series().back();
  return rep;
}

/// One report per seed. Seeds run in parallel; each run is sequential.
inline std::vector<StabilityRunReport> run_soliton_stability(const Grid1D& g, double C, double delta,
                                                             std::span<const std::uint64_t> seeds,
                                                             const StabilityOptions& opts = {}) {
  std::vector<StabilityRunReport> out(seeds.size());
  parallel_for(seeds.size(), worker_count(opts.threads),
               [&](std::size_t i) { out[i] = run_soliton_stability_single(g, C, delta, seeds[i], opts); });
  return out;
}

struct GroundStateReport {
  std::uint64_t seed = 0;
  double delta = 0.0;
  AprioriData bound;
  double max_norm = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_sup_margin = std::numeric_limits<double>::infinity();
  std::vector<StabilitySample> series;
  bool ok = false;
};

inline GroundStateReport run_ground_state_single(const Grid1D& g, double delta, std::uint64_t seed,
                                                 const StabilityOptions& opts) {
  GroundStateReport rep;
  rep.seed = seed;
  rep.delta = delta;
  const CoupledState start = make_perturbation(g, opts.n_components, delta, seed, opts.mode, opts.shape);
  rep.bound = apriori(start);
  auto record = [&](double t, const CoupledState& s) {
    StabilitySample sample;
    sample.t = t;
    sample.sobolev = sobolev_h1(s);
    sample.dI = sample.sobolev;
    sample.dII = sample.sobolev;
    sample.sup_u = s.u.max_abs();
    rep.series.push_back(sample);
  };
  const Observer obs = record;
  evolve(start, opts.solver, std::span(&obs, 1));
  for (const auto& s : rep.series) {
    rep.max_norm = std::max(rep.max_norm, s.sobolev);
    rep.worst_margin = std::min(rep.worst_margin, rep.bound.bound - s.sobolev);
    rep.worst_sup_margin = std::min(rep.worst_sup_margin, std::sqrt(0.5) * s.sobolev - s.sup_u);
  }
  rep.ok = rep.worst_margin >= 0.0;
  return rep;
}

/// Random data of H1 norm delta around (0, 0), checked against the a-priori
/// bound built from its own V and H.
inline std::vector<GroundStateReport> run_ground_state_stability(const Grid1D& g, double delta,
                                                                 std::span<const std::uint64_t> seeds,
                                                                 const StabilityOptions& opts = {}) {
  std::vector<GroundStateReport> out(seeds.size());
  parallel_for(seeds.size(), worker_count(opts.threads),
               [&](std::size_t i) { out[i] = run_ground_state_single(g, delta, seeds[i], opts); });
  return out;
}

}  // namespace ckdv

#endif  // CKDV_STABILITY_HPP
