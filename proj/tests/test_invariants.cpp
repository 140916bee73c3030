#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ckdv/integrator.hpp"
#include "ckdv/invariants.hpp"
#include "ckdv/solitons.hpp"
#include "oracles.hpp"

using namespace ckdv;
using std::numbers::pi;

namespace {

const Grid1D& trig() {
  static const Grid1D g(2 * pi, 64);
  return g;
}

const Grid1D& wide() {
  static const Grid1D g(40 * pi, 512);
  return g;
}

// Line integrals of the C = 1 soliton by Simpson quadrature of the closed
// form.
struct SolitonIntegrals {
  double mass, square, cube, slope_sq;
};

const SolitonIntegrals& soliton_integrals() {
  static const SolitonIntegrals s = [] {
    const double L = wide().length();
    auto q = [&](auto f) { return oracle::simpson(f, -L / 2, L / 2); };
    return SolitonIntegrals{
        q([](double x) { return oracle::soliton(1, x); }),
        q([](double x) { return std::pow(oracle::soliton(1, x), 2); }),
        q([](double x) { return std::pow(oracle::soliton(1, x), 3); }),
        q([](double x) { return std::pow(oracle::soliton_dx(1, x), 2); }),
    };
  }();
  return s;
}

// Broad enough that the dispersive tail stays below the decay tolerance at
// the left edge for T = 10.
double bump(double x) { return 0.1 * std::exp(-x * x / 50); }

CoupledState gaussian_pair() {
  CoupledState s(wide(), 2);
  s.phi[0] = RealField::sample(wide(), [](double x) { return bump(x - 1); });
  s.phi[1] = RealField::sample(wide(), [](double x) { return bump(x + 1); });
  return s;
}

}  // namespace

TEST(Oracle, SolitonClosedFormIntegrals) {
  const auto& q = soliton_integrals();
  EXPECT_NEAR(q.mass, 12.0, 1e-10);
  EXPECT_NEAR(q.square, 24.0, 1e-10);
  EXPECT_NEAR(q.cube, 57.6, 1e-10);
  EXPECT_NEAR(q.slope_sq, 4.8, 1e-10);
}

TEST(Hamiltonian, Cases) {
  EXPECT_EQ(hamiltonian(CoupledState(wide(), 2)), 0.0);
  const auto& q = soliton_integrals();
  const double h = hamiltonian(soliton_state({1.0, 0.0}, wide()));
  EXPECT_NEAR(h, -q.cube / 3 + q.slope_sq, 1e-8);
  EXPECT_NEAR(h, -14.4, 1e-8);

  CoupledState s(trig(), 1);
  s.phi[0] = RealField::sample(trig(), [](double x) { return std::sin(x); });
  EXPECT_NEAR(hamiltonian(s), pi, 1e-12);
}

TEST(CasimirV, Cases) {
  EXPECT_EQ(casimir_v(CoupledState(wide(), 2)), 0.0);
  EXPECT_NEAR(casimir_v(soliton_state({1.0, 0.0}, wide())), soliton_integrals().square, 1e-8);
  CoupledState s(trig(), 2);
  s.phi[0] = RealField::sample(trig(), [](double x) { return std::sin(x); });
  s.phi[1] = s.phi[0];
  EXPECT_NEAR(casimir_v(s), 2 * pi, 1e-12);
}

TEST(Masses, Cases) {
  const Masses zero = masses(CoupledState(wide(), 2));
  EXPECT_EQ(zero.H1, 0.0);
  EXPECT_EQ(zero.H_half, std::vector<double>(2, 0.0));
  EXPECT_NEAR(masses(soliton_state({1.0, 0.0}, wide())).H1, soliton_integrals().mass, 1e-8);
  CoupledState s(trig(), 1);
  s.phi[0] = RealField::sample(trig(), [](double x) { return std::sin(x); });
  EXPECT_LT(std::abs(masses(s).H_half[0]), 1e-14);
}

TEST(NonlocalMatrix, ZeroState) {
  const Matrix m = nonlocal_matrix(CoupledState(wide(), 3));
  for (double v : m.data) EXPECT_EQ(v, 0.0);
}

TEST(NonlocalMatrix, DiagonalIsHalfMassSquared) {
  const CoupledState s = gaussian_pair();
  const Matrix m = nonlocal_matrix(s);
  const Masses ms = masses(s);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(m(i, i), 0.5 * ms.H_half[i] * ms.H_half[i], 1e-8);
}

TEST(NonlocalMatrix, OffsetBumpsAreAsymmetricAndConserved) {
  const CoupledState s = gaussian_pair();
  InvariantMonitor monitor;
  const Observer obs = std::ref(monitor);
  evolve(s, SolverConfig{1e-3, 10.0, 500, true, false}, std::span(&obs, 1));
  const auto& r = monitor.records();
  const Matrix& m0 = *r.front().M;
  EXPECT_GT(std::abs(m0(0, 1) - m0(1, 0)), 0.1);
  EXPECT_LT(invariant_drift(r).M_max, 1e-6);
}

TEST(NonlocalMatrix, UndecayedComponentRejected) {
  CoupledState s(trig(), 1);
  s.phi[0] = RealField::sample(trig(), [](double x) { return 1.0 + std::sin(x); });
  EXPECT_THROW(nonlocal_matrix(s), PreconditionError);
}

TEST(Sobolev, Cases) {
  const CoupledState a = oracle::random_state(wide(), 2, 1);
  EXPECT_EQ(sobolev_h1(a, a), 0.0);
  const auto& q = soliton_integrals();
  EXPECT_NEAR(sobolev_h1(soliton_state({1.0, 0.0}, wide())), std::sqrt(q.square + q.slope_sq), 1e-8);
  EXPECT_NEAR(sobolev_h1(soliton_state({1.0, 0.0}, wide())), std::sqrt(28.8), 1e-8);
  EXPECT_THROW(sobolev_h1(a, CoupledState(trig(), 2)), PreconditionError);
}

TEST(Sobolev, TriangleInequality) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto a = oracle::random_state(wide(), 2, 3 * seed);
    const auto b = oracle::random_state(wide(), 2, 3 * seed + 1);
    const auto c = oracle::random_state(wide(), 2, 3 * seed + 2);
    EXPECT_LE(sobolev_h1(a, c), sobolev_h1(a, b) + sobolev_h1(b, c) + 1e-12);
  }
}

TEST(Sobolev, MatchesQuadratureOfGridDerivatives) {
  const auto s = oracle::random_state(wide(), 2, 5);
  double sum = 0.0;
  for (const RealField* f : {&s.u, &s.phi[0], &s.phi[1]}) sum += integrate(*f * *f) + integrate(deriv(*f, 1) * deriv(*f, 1));
  EXPECT_NEAR(sobolev_h1_sq(s), sum, 1e-11 * sum);
}

TEST(Apriori, ZeroState) {
  const AprioriData a = apriori(CoupledState(wide(), 2));
  EXPECT_EQ(a.d, 0.0);
  EXPECT_EQ(a.e, 0.0);
  EXPECT_EQ(a.bound, 0.0);
}

TEST(Apriori, Soliton) {
  const AprioriData a = apriori(soliton_state({1.0, 0.0}, wide()));
  // Arithmetic on V = 24, H = -14.4.
  const double d = 24 / (2 * std::sqrt(2.0));
  const double e = 24 - 14.4;
  EXPECT_NEAR(a.d, d, 1e-8);
  EXPECT_NEAR(a.e, e, 1e-8);
  EXPECT_NEAR(a.bound, 0.5 * (d + std::sqrt(d * d + 4 * e)), 1e-8);
  EXPECT_NEAR(a.d, 8.48528, 1e-5);
  EXPECT_NEAR(a.bound, 9.49621, 1e-5);
  EXPECT_LE(sobolev_h1(soliton_state({1.0, 0.0}, wide())), a.bound);
}

TEST(Apriori, PureXiState) {
  CoupledState s(wide(), 1);
  s.phi[0] = RealField::sample(wide(), [](double x) { return 0.1 * oracle::sech(x); });
  EXPECT_GT(hamiltonian(s), 0.0);
  EXPECT_GT(casimir_v(s), 0.0);
  EXPECT_GT(apriori(s).bound, sobolev_h1(s));
}

TEST(CheckApriori, Cases) {
  InvariantMonitor zero;
  zero(0.0, CoupledState(wide(), 2));
  const auto c0 = check_apriori(zero.records(), *zero.bound());
  EXPECT_TRUE(c0.ok);
  EXPECT_EQ(c0.worst_margin, 0.0);

  InvariantMonitor monitor;
  const Observer obs = std::ref(monitor);
  evolve(soliton_state({1.0, 0.0}, wide()), SolverConfig{1e-3, 10.0, 1000, true, false}, std::span(&obs, 1));
  const auto c = check_apriori(monitor.records(), *monitor.bound());
  EXPECT_TRUE(c.ok);
  EXPECT_NEAR(c.worst_margin, 9.49621 - 5.36656, 1e-4);

  std::vector<InvariantReport> bad(monitor.records().begin(), monitor.records().begin() + 1);
  bad[0].sobolev_sq = 100.0;
  EXPECT_FALSE(check_apriori(bad, *monitor.bound()).ok);
  EXPECT_THROW(check_apriori({}, *monitor.bound()), PreconditionError);
}

TEST(SupNorm, EmbeddingHoldsOnRandomStates) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_GE(sup_norm_margin(oracle::random_state(wide(), 2, seed)), 0.0);
  }
  EXPECT_GE(sup_norm_margin(soliton_state({4.0, 0.0}, wide())), 0.0);
}

TEST(Drift, RelativeToFirstRecord) {
  std::vector<InvariantReport> r(2);
  r[0].H = 2.0;
  r[1].H = 2.002;
  r[0].V = 0.0;
  r[1].V = 1e-9;
  r[0].H_half = {1.0, -4.0};
  r[1].H_half = {1.0, -4.002};
  const auto d = invariant_drift(r);
  EXPECT_NEAR(d.H, 1e-3, 1e-12);
  EXPECT_NEAR(d.V, 1e-9, 1e-20);
  EXPECT_NEAR(d.Hhalf_max, 5e-4, 1e-12);
}

TEST(Conservation, SolitonRun) {
  InvariantMonitor monitor;
  const Observer obs = std::ref(monitor);
  evolve(soliton_state({1.0, 0.0}, wide()), SolverConfig{1e-3, 10.0, 500, true, false}, std::span(&obs, 1));
  const auto d = invariant_drift(monitor.records());
  EXPECT_LT(d.H, 1e-8);
  EXPECT_LT(d.V, 1e-8);
  EXPECT_LT(d.H1, 1e-8);
  EXPECT_LT(d.Hhalf_max, 1e-8);
  EXPECT_LT(d.M_max, 1e-6);
}
