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

const Grid1D& wide() {
  static const Grid1D g(40 * pi, 512);
  return g;
}

}  // namespace

TEST(SolitonProfile, PeakAndResidual) {
  const RealField f = soliton_profile({1.0, 0.0}, wide());
  EXPECT_DOUBLE_EQ(f[256], 3.0);  // node 256 is x = 0
  EXPECT_DOUBLE_EQ(f.max_abs(), 3.0);
  EXPECT_LT(tw_residual(f, 1.0), 1e-10);
}

TEST(SolitonProfile, ResidualAtWellResolvedSpeeds) {
  for (double C : {0.25, 0.5, 1.0}) EXPECT_LT(tw_residual(soliton_profile({C, 0.0}, wide()), C), 1e-10) << C;
}

TEST(SolitonProfile, FasterSolitonsNeedFinerGrids) {
  // The C = 4 profile is twice as narrow; N = 512 on 40 pi leaves an
  // aliasing floor well above 1e-10 that refinement removes.
  const Grid1D fine(40 * pi, 2048);
  for (double C : {2.0, 4.0}) EXPECT_LT(tw_residual(soliton_profile({C, 0.0}, fine), C), 1e-10) << C;
  EXPECT_GT(tw_residual(soliton_profile({4.0, 0.0}, wide()), 4.0), 1e-10);
}

TEST(SolitonProfile, NarrowerAtHigherSpeed) {
  const RealField f = soliton_profile({4.0, 0.0}, wide());
  EXPECT_DOUBLE_EQ(f.max_abs(), 12.0);
  // Half maximum is reached at half the C = 1 distance.
  const double y1 = 2.0 * std::acosh(std::sqrt(2.0));
  EXPECT_NEAR(soliton_value(4.0, y1 / 2), 6.0, 1e-12);
  EXPECT_NEAR(soliton_value(1.0, y1), 1.5, 1e-12);
}

TEST(SolitonProfile, TravelsAtSpeedC) {
  const RealField later = soliton_profile({1.0, 0.0}, wide(), 1.0);
  const RealField moved = soliton_profile({1.0, 1.0}, wide());
  EXPECT_EQ(max_abs_diff(later, moved), 0.0);
  const auto exact = RealField::sample(wide(), [](double x) { return oracle::soliton(1.0, x - 1.0); });
  EXPECT_LT(max_abs_diff(later, exact), 1e-14);
}

TEST(SolitonProfile, Preconditions) {
  EXPECT_THROW(soliton_profile({0.0, 0.0}, wide()), ConfigError);
  EXPECT_THROW(soliton_profile({-1.0, 0.0}, wide()), ConfigError);
  EXPECT_THROW(soliton_profile({1.0, 0.0}, Grid1D(20.0, 256)), PreconditionError);
}

TEST(SolitonState, ShapeAndInvariants) {
  const CoupledState s = soliton_state({1.0, 0.0}, wide(), 3);
  EXPECT_EQ(s.components(), 3u);
  EXPECT_EQ(p_body(s).max_abs(), 0.0);
  EXPECT_NEAR(casimir_v(s), 24.0, 1e-8);
  EXPECT_NEAR(hamiltonian(s), -14.4, 1e-8);
  EXPECT_LT(max_abs_diff(rhs(s, false).du, -1.0 * deriv(s.u, 1)), 1e-8);
}

TEST(TwResidual, Cases) {
  EXPECT_EQ(tw_residual(RealField(wide()), 1.0), 0.0);
  EXPECT_GT(tw_residual(1.1 * soliton_profile({1.0, 0.0}, wide()), 1.0), 1e-2);
}
