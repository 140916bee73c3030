#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ckdv/grid.hpp"
#include "oracles.hpp"

using namespace ckdv;
using std::numbers::pi;

namespace {

const Grid1D& two_pi(std::size_t n = 64) {
  static const Grid1D g16(2 * pi, 16), g64(2 * pi, 64);
  return n == 16 ? g16 : g64;
}

const Grid1D& wide() {
  static const Grid1D g(40 * pi, 512);
  return g;
}

}  // namespace

TEST(Grid, NodesAndSpacing) {
  const Grid1D& g = two_pi(16);
  EXPECT_DOUBLE_EQ(g.spacing(), 2 * pi / 16);
  EXPECT_DOUBLE_EQ(g.node(0), -pi);
  EXPECT_NEAR(g.node(15), pi - 2 * pi / 16, 1e-15);
  EXPECT_EQ(g.spectrum_size(), 9u);
  EXPECT_NEAR(wide().spacing(), 0.2454, 1e-4);
  EXPECT_DOUBLE_EQ(wide().spacing(), 40 * pi / 512);
}

TEST(Grid, RejectsBadSizes) {
  EXPECT_THROW(Grid1D(10.0, 17), ConfigError);
  EXPECT_THROW(Grid1D(10.0, 8), ConfigError);
  EXPECT_THROW(Grid1D(10.0, 96), ConfigError);
  EXPECT_THROW(Grid1D(0.0, 64), ConfigError);
  EXPECT_THROW(Grid1D(-1.0, 64), ConfigError);
}

TEST(Grid, FieldsOnDifferentGridsDoNotMix) {
  RealField a(two_pi(16)), b(two_pi(64));
  EXPECT_THROW(a += b, PreconditionError);
}

TEST(Deriv, SineDerivatives) {
  const auto f = RealField::sample(two_pi(16), [](double x) { return std::sin(x); });
  const auto c = RealField::sample(two_pi(16), [](double x) { return std::cos(x); });
  EXPECT_LT(max_abs_diff(deriv(f, 1), c), 1e-12);
  EXPECT_LT(max_abs_diff(deriv(f, 2), -1.0 * f), 1e-12);
  EXPECT_LT(max_abs_diff(deriv(f, 3), -1.0 * c), 1e-12);
}

TEST(Deriv, ConstantHasZeroDerivative) {
  const auto f = RealField::sample(two_pi(), [](double) { return 2.5; });
  for (int k = 1; k <= 3; ++k) EXPECT_LT(deriv(f, k).max_abs(), 1e-14);
}

TEST(Deriv, OddOrderDropsNyquist) {
  // cos(N x / 2) sampled on the grid is the Nyquist mode; its odd
  // derivatives are not representable and are set to zero.
  const Grid1D& g = two_pi(16);
  const auto f = RealField::sample(g, [](double x) { return std::cos(8 * x); });
  EXPECT_LT(deriv(f, 1).max_abs(), 1e-12);
  EXPECT_LT(deriv(f, 3).max_abs(), 1e-9);
  EXPECT_NEAR(deriv(f, 2)[0], -64.0 * f[0], 1e-10);
}

TEST(Deriv, RejectsBadOrder) {
  const RealField f(two_pi());
  EXPECT_THROW(deriv(f, 0), ConfigError);
  EXPECT_THROW(deriv(f, 4), ConfigError);
}

TEST(Integrate, ElementaryCases) {
  EXPECT_NEAR(integrate(RealField::sample(two_pi(), [](double) { return 1.0; })), 2 * pi, 1e-14);
  EXPECT_LT(std::abs(integrate(RealField::sample(two_pi(), [](double x) { return std::sin(x); }))), 1e-14);
}

TEST(Integrate, SolitonMassAgainstQuadrature) {
  const double L = wide().length();
  const double reference = oracle::simpson([](double x) { return oracle::soliton(1.0, x); }, -L / 2, L / 2);
  EXPECT_NEAR(reference, 12.0, 1e-10);
  const auto f = RealField::sample(wide(), [](double x) { return oracle::soliton(1.0, x); });
  EXPECT_LT(f[0], 1e-12);
  EXPECT_NEAR(integrate(f), reference, 1e-10);
}

TEST(Antiderivative, ZeroGivesZero) {
  EXPECT_EQ(antiderivative(RealField(wide())).max_abs(), 0.0);
}

TEST(Antiderivative, SechSquared) {
  const auto f = RealField::sample(wide(), [](double x) {
    const double s = oracle::sech(x / 2);
    return 0.5 * s * s;
  });
  const RealField F = antiderivative(f);
  const double x0 = wide().node(0);
  const auto exact = RealField::sample(wide(), [&](double x) { return std::tanh(x / 2) - std::tanh(x0 / 2); });
  EXPECT_LT(max_abs_diff(F, exact), 1e-8);
  EXPECT_EQ(F[0], 0.0);
}

TEST(Antiderivative, RejectsUndecayedField) {
  const auto f = RealField::sample(wide(), [](double) { return 1.0; });
  EXPECT_THROW(antiderivative(f), PreconditionError);
}

TEST(Antiderivative, InvertsDerivativeOnZeroMeanFields) {
  // With non-zero mean the primitive grows linearly and is not periodic, so
  // the round trip is only an identity on zero-mean data.
  const auto f = RealField::sample(wide(), [](double x) { return x * std::exp(-x * x / 8); });
  EXPECT_LT(std::abs(integrate(f)), 1e-12);
  EXPECT_LT(max_abs_diff(deriv(antiderivative(f), 1), f), 1e-10);
}

TEST(Dealias, BandLimitedFieldUnchanged) {
  const auto f = RealField::sample(two_pi(), [](double x) { return std::sin(3 * x) + 0.5 * std::cos(10 * x); });
  EXPECT_LT(max_abs_diff(dealias(f), f), 1e-14);
}

TEST(Dealias, HighestModeRemoved) {
  const auto f = RealField::sample(two_pi(), [](double x) { return std::cos(32 * x); });
  EXPECT_LT(dealias(f).max_abs(), 1e-15);
  const auto g = RealField::sample(two_pi(), [](double x) { return std::sin(25 * x); });
  EXPECT_LT(dealias(g).max_abs(), 1e-14);
}

TEST(Dealias, Idempotent) {
  const auto f = RealField::sample(two_pi(), [](double x) { return std::exp(std::sin(x)) * std::cos(7 * x) + std::cos(25 * x); });
  const RealField once = dealias(f);
  EXPECT_LT(max_abs_diff(dealias(once), once), 1e-15);
  EXPECT_GT(max_abs_diff(once, f), 1e-6);
}

TEST(Translate, MatchesShiftedSample) {
  // translate(f, s)(x) = f(x - s)
  const auto f = RealField::sample(two_pi(), [](double x) { return std::sin(2 * x) + std::cos(5 * x); });
  const auto shifted = RealField::sample(two_pi(), [](double x) { return std::sin(2 * (x - 0.3)) + std::cos(5 * (x - 0.3)); });
  EXPECT_LT(max_abs_diff(translate(f, 0.3), shifted), 1e-13);
}
