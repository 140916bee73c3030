#ifndef CKDV_INTEGRATOR_HPP
#define CKDV_INTEGRATOR_HPP

// Integrating-factor RK4 for the coupled system.
//
// In transform space each field obeys v_t = i k^3 v + N(v). With
// E(h) = exp(i k^3 h) the dispersion is applied exactly and the nonlinear
// term is advanced with classical RK4 on w = E(-t) v:
//
//   a = N(v)
//   b = N(E(dt/2) (v + dt/2 a))
//   c = N(E(dt/2) v + dt/2 b)
//   d = N(E(dt) v + dt E(dt/2) c)
//   v <- E(dt) v + dt/6 (E(dt) a + 2 E(dt/2) (b + c) + d)

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ckdv/dynamics.hpp"
#include "ckdv/error.hpp"
#include "ckdv/grid.hpp"
#include "ckdv/state.hpp"

namespace ckdv {

/// Any node value above this magnitude aborts the run.
inline constexpr double kBlowUpThreshold = 1e8;

/// Advective step bound c dx / max(1, sup|u|) with c = 1/2. The k^3 term is
/// integrated exactly and does not constrain the step.
inline double suggest_dt(const Grid1D& grid, const CoupledState& s) {
  return 0.5 * grid.spacing() / std::max(1.0, s.u.max_abs());
}

class IfRk4Stepper {
 public:
  /// A negative dt integrates backward in time.
  IfRk4Stepper(const Grid1D& grid, std::size_t n_components, double dt, bool dealias = true)
      : grid_(grid),
        dt_(dt),
        nonlinear_(grid, n_components, dealias),
        full_(grid.spectrum_size()),
        half_(grid.spectrum_size()) {
    if (!std::isfinite(dt) || dt == 0.0) throw ConfigError("time step must be finite and non-zero");
    for (std::size_t m = 0; m < full_.size(); ++m) {
      const double k = grid.wavenumber(m);
      const double omega = m == grid.nyquist_index() ? 0.0 : k * k * k;
      full_[m] = std::polar(1.0, omega * dt);
      half_[m] = std::polar(1.0, 0.5 * omega * dt);
    }
    const std::size_t nf = n_components + 1;
    const Spectrum zero(grid.spectrum_size());
    for (auto* buf : {&a_, &b_, &c_, &d_, &tmp_}) buf->assign(nf, zero);
  }

  double dt() const { return dt_; }

  /// Advances `v` (field spectra, u first) by one step. `t` and `step` only
  /// annotate errors.
  void advance(std::vector<Spectrum>& v, double t = 0.0, std::size_t step = 0) {
    const std::size_t nf = v.size();
    const std::size_t nm = full_.size();
    const double h = dt_;

    const double peak = nonlinear_(v, a_);
    if (!(peak <= kBlowUpThreshold)) {
      std::ostringstream msg;
      msg << "blow-up or instability detected at t = " << t << " (step " << step << ", max |field| = " << peak
          << ")";
      throw NumericalError(msg.str(), t, step);
    }

    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t m = 0; m < nm; ++m) tmp_[f][m] = half_[m] * (v[f][m] + 0.5 * h * a_[f][m]);
    nonlinear_(tmp_, b_);

    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t m = 0; m < nm; ++m) tmp_[f][m] = half_[m] * v[f][m] + 0.5 * h * b_[f][m];
    nonlinear_(tmp_, c_);

    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t m = 0; m < nm; ++m) tmp_[f][m] = full_[m] * v[f][m] + h * half_[m] * c_[f][m];
    nonlinear_(tmp_, d_);

    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t m = 0; m < nm; ++m) {
        v[f][m] = full_[m] * v[f][m] +
                  (h / 6.0) * (full_[m] * a_[f][m] + 2.0 * half_[m] * (b_[f][m] + c_[f][m]) + d_[f][m]);
      }
    }
  }

 private:
  Grid1D grid_;
  double dt_;
  NonlinearTerm nonlinear_;
  Spectrum full_, half_;
  std::vector<Spectrum> a_, b_, c_, d_, tmp_;
};

inline void check_state_health(const CoupledState& s, double t, std::size_t step) {
  const double peak = s.max_abs();
  if (!(peak <= kBlowUpThreshold)) {
    std::ostringstream msg;
    msg << "blow-up or instability detected at t = " << t << " (step " << step << ")";
    throw NumericalError(msg.str(), t, step);
  }
}

/// One integrating-factor RK4 step.
inline CoupledState step(const CoupledState& s, double dt, bool dealias = true) {
  IfRk4Stepper stepper(s.grid(), s.components(), dt, dealias);
  std::vector<Spectrum> v = detail::to_spectra(s);
  stepper.advance(v);
  CoupledState out = detail::from_spectra(s.grid(), v);
  check_state_health(out, dt, 1);
  return out;
}

struct SolverConfig {
  double dt = 1e-3;
  double t_end = 10.0;
  std::size_t sample_every = 1;
  bool dealias = true;
  /// Skip the suggest_dt ceiling check.
  bool allow_large_dt = false;

  /// Throws ConfigError unless the configuration is usable for `s`. Returns
  /// the number of steps.
  std::size_t validate(const CoupledState& s) const {
    if (!std::isfinite(dt) || dt == 0.0) throw ConfigError("dt must be finite and non-zero");
    if (!std::isfinite(t_end) || t_end < 0.0) throw ConfigError("t_end must be finite and >= 0");
    if (sample_every < 1) throw ConfigError("sample_every must be >= 1");
    const double ceiling = suggest_dt(s.grid(), s);
    if (!allow_large_dt && std::abs(dt) > ceiling) {
      std::ostringstream msg;
      msg << "dt = " << dt << " exceeds the stability ceiling " << ceiling
          << " (set allow_large_dt to override)";
      throw ConfigError(msg.str());
    }
    const double steps = t_end / std::abs(dt);
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
      throw ConfigError("t_end must be an integer multiple of dt");
    }
    if (t_end > 0.0 && rounded < 1.0) throw ConfigError("t_end must be >= dt");
    return static_cast<std::size_t>(rounded);
  }
};

/// Called with (t, state) at every sample.
using Observer = std::function<void(double, const CoupledState&)>;

struct EvolveResult {
  CoupledState final_state;
  std::vector<double> sample_times;
  std::size_t steps = 0;
};

/// Fixed-step evolution. Observers run at step 0, every `sample_every` steps
/// and after the last step. With dealiasing on, the run starts from the
/// two-thirds projection of `initial`, which is what the first sample sees.
inline EvolveResult evolve(const CoupledState& initial, const SolverConfig& cfg,
                           std::span<const Observer> observers = {}) {
  if (!initial.all_finite()) throw NumericalError("initial state has non-finite values", 0.0);
  const std::size_t n_steps = cfg.validate(initial);
  const Grid1D& g = initial.grid();

  std::vector<Spectrum> v = detail::to_spectra(initial);
  if (cfg.dealias) {
    for (auto& s : v) apply_dealias(g, s);
  }
  IfRk4Stepper stepper(g, initial.components(), cfg.dt, cfg.dealias);

  EvolveResult result{detail::from_spectra(g, v), {}, n_steps};
  auto sample = [&](std::size_t s, const CoupledState& state) {
    const double t = static_cast<double>(s) * cfg.dt;
    check_state_health(state, t, s);
    result.sample_times.push_back(t);
    for (const auto& obs : observers) obs(t, state);
  };
  sample(0, result.final_state);

  for (std::size_t s = 1; s <= n_steps; ++s) {
    try {
      stepper.advance(v, static_cast<double>(s - 1) * cfg.dt, s - 1);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [step " + std::to_string(s - 1) + "]", e.time(), s - 1);
    }
    if (s % cfg.sample_every == 0 || s == n_steps) {
      result.final_state = detail::from_spectra(g, v);
      sample(s, result.final_state);
    }
  }
  return result;
}

}  // namespace ckdv

#endif  // CKDV_INTEGRATOR_HPP
