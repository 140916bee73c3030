#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ckdv/dynamics.hpp"
#include "ckdv/invariants.hpp"
#include "ckdv/solitons.hpp"
#include "oracles.hpp"

using namespace ckdv;
using std::numbers::pi;

namespace {

const Grid1D& trig() {
  static const Grid1D g(2 * pi, 16);
  return g;
}

const Grid1D& wide() {
  static const Grid1D g(40 * pi, 512);
  return g;
}

RealField sample(const Grid1D& g, double (*f)(double)) { return RealField::sample(g, f); }

}  // namespace

TEST(Rhs, ZeroIsAFixedPoint) {
  EXPECT_EQ(rhs(CoupledState(wide(), 2)).max_abs(), 0.0);
}

TEST(Rhs, SolitonTravels) {
  // du/dt = -C u' for a wave moving right at speed C, with u' from the
  // closed form rather than the spectral derivative.
  auto check = [](const Grid1D& g, bool dealias_products) {
    const CoupledState s = soliton_state({1.0, 0.0}, g);
    const StateRate r = rhs(s, dealias_products);
    const auto du = RealField::sample(g, [](double x) { return -oracle::soliton_dx(1.0, x); });
    for (const auto& d : r.dphi) EXPECT_EQ(d.max_abs(), 0.0);
    return max_abs_diff(r.du, du);
  };
  EXPECT_LT(check(wide(), false), 1e-8);
  // At N = 512 the spectrum of u^2 still reaches past the two-thirds
  // cutoff (about 1e-7 after differentiation); one refinement clears it.
  EXPECT_LT(check(Grid1D(40 * pi, 1024), true), 1e-8);
  EXPECT_LT(check(wide(), true), 1e-6);
}

TEST(Rhs, PureXiTrigState) {
  CoupledState s(trig(), 1);
  s.phi[0] = sample(trig(), [](double x) { return std::sin(x); });
  const StateRate r = rhs(s);
  EXPECT_LT(max_abs_diff(r.dphi[0], sample(trig(), [](double x) { return std::cos(x); })), 1e-12);
  EXPECT_LT(max_abs_diff(r.du, sample(trig(), [](double x) { return -0.25 * std::sin(2 * x); })), 1e-12);
}

TEST(Rhs, RejectsNonFiniteState) {
  CoupledState s(trig(), 1);
  s.u[3] = std::nan("");
  EXPECT_THROW(rhs(s), NumericalError);
}

TEST(GradH, ZeroState) {
  const CoupledState z(trig(), 2);
  EXPECT_EQ(grad_h_u(z).max_abs(), 0.0);
  EXPECT_EQ(grad_h_phi(z, 0).max_abs(), 0.0);
  EXPECT_EQ(grad_h_phi(z, 1).max_abs(), 0.0);
  EXPECT_EQ(bracket_flow(z, BracketConvention::half()).max_abs(), 0.0);
}

TEST(GradH, TrigStates) {
  CoupledState s(trig(), 1);
  s.u = sample(trig(), [](double x) { return std::sin(x); });
  EXPECT_LT(max_abs_diff(grad_h_u(s), sample(trig(), [](double x) { return -std::sin(x) * std::sin(x) + 2 * std::sin(x); })),
            1e-12);

  CoupledState p(trig(), 1);
  p.phi[0] = sample(trig(), [](double x) { return std::sin(x); });
  EXPECT_LT(max_abs_diff(grad_h_phi(p, 0), sample(trig(), [](double x) { return 2 * std::sin(x); })), 1e-12);
  EXPECT_THROW(grad_h_phi(p, 1), ConfigError);
}

TEST(GradH, MatchesGateauxDerivative) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const CoupledState s = oracle::random_state(wide(), 2, seed);
    const CoupledState v = oracle::random_state(wide(), 2, 100 + seed);

    CoupledState vu(wide(), 2);
    vu.u = v.u;
    const double fd_u = oracle::gateaux(hamiltonian, s, vu);
    EXPECT_NEAR(fd_u, integrate(grad_h_u(s) * v.u), 1e-6) << "seed " << seed;

    for (std::size_t i = 0; i < 2; ++i) {
      CoupledState vp(wide(), 2);
      vp.phi[i] = v.phi[i];
      const double fd_p = oracle::gateaux(hamiltonian, s, vp);
      EXPECT_NEAR(fd_p, integrate(grad_h_phi(s, i) * v.phi[i]), 1e-6) << "seed " << seed << " i " << i;
    }
  }
}

TEST(BracketFlow, HalfScaleReproducesRhs) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const CoupledState s = oracle::random_state(wide(), 2, seed);
    const StateRate r = rhs(s);
    EXPECT_LT(max_abs_diff(bracket_flow(s, BracketConvention::half()), r), 1e-8);
    const StateRate twice = bracket_flow(s, BracketConvention::unit());
    StateRate r2 = r;
    r2.du *= 2.0;
    for (auto& d : r2.dphi) d *= 2.0;
    EXPECT_LT(max_abs_diff(twice, r2), 1e-8);
  }
  EXPECT_THROW(bracket_flow(CoupledState(trig(), 1), BracketConvention{0.3}), ConfigError);
}

TEST(BracketConsistency, Soliton) {
  const BracketReport rep = bracket_consistency(soliton_state({1.0, 0.0}, wide()));
  EXPECT_EQ(rep.inferred_scale, 0.5);
  EXPECT_LT(rep.residual_half, 1e-8);
}

TEST(BracketConsistency, TrigState) {
  CoupledState s(trig(), 2);
  s.u = sample(trig(), [](double x) { return std::sin(x); });
  s.phi[0] = sample(trig(), [](double x) { return std::cos(x); });
  const BracketReport rep = bracket_consistency(s);
  EXPECT_EQ(rep.inferred_scale, 0.5);
  EXPECT_LT(rep.residual_half, 1e-8);
}

TEST(BracketConsistency, RandomStatesSeparateTheScales) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const BracketReport rep = bracket_consistency(oracle::random_state(wide(), 2, seed));
    EXPECT_EQ(rep.inferred_scale, 0.5);
    EXPECT_GT(rep.residual_one / rep.residual_half, 1e6) << "seed " << seed;
  }
}

TEST(BracketConsistency, ZeroStateIsDegenerate) {
  EXPECT_THROW(bracket_consistency(CoupledState(trig(), 1)), PreconditionError);
}
