#include <gtest/gtest.h>

#include <cmath>

#include "nvpes/evolve.hpp"
#include "nvpes/generator.hpp"
#include "nvpes/model.hpp"
#include "nvpes/state.hpp"

using namespace nvpes;

TEST(RateSet, DefaultsMatchPublishedValues) {
  const RateSet r;
  EXPECT_DOUBLE_EQ(r.gamma0, 63.0);
  EXPECT_DOUBLE_EQ(r.gamma_f0, 12.0);
  EXPECT_DOUBLE_EQ(r.gamma_f1, 80.0);
  EXPECT_DOUBLE_EQ(r.gamma_s1, 2.4);
  EXPECT_DOUBLE_EQ(r.gamma_s0, 3.3);
  EXPECT_DOUBLE_EQ(r.c_laser, 0.1);
  EXPECT_DOUBLE_EQ(r.zfs, 2.0 * M_PI * 2870.0);
  EXPECT_DOUBLE_EQ(r.gyro, 2.0 * M_PI * 28.024);
  EXPECT_NO_THROW(r.validate());
}

TEST(RateSet, RejectsNegativeRatesAndNonPositiveLaserCoefficient) {
  RateSet r;
  r.gamma_f1 = -1.0;
  EXPECT_THROW(r.validate(), Error);
  r = RateSet{};
  r.c_laser = 0.0;
  EXPECT_THROW(r.validate(), Error);
}

TEST(DriveSchedule, RejectsEmptyAndNonPositiveSegments) {
  EXPECT_THROW(DriveSchedule(std::vector<DriveSegment>{}), Error);
  EXPECT_THROW(DriveSchedule::constant({0.0, 1.0, 0.0, 0.0}), Error);
  EXPECT_THROW(DriveSchedule::constant({1.0, -1.0, 0.0, 0.0}), Error);
  const DriveSchedule s({{0.5, 1.0, 0.0, 0.0}, {0.25, 0.0, 3.0, 0.0}});
  EXPECT_DOUBLE_EQ(s.total_duration(), 0.75);
}

TEST(DriveSegment, LaserPowerConvertsThroughCoefficient) {
  const RateSet r;
  EXPECT_DOUBLE_EQ(DriveSegment::from_laser_power(1.0, 200.0, r).pump_rate, 20.0);
}

TEST(Resonance, ZeroFieldGivesZeroFieldSplitting) {
  const RateSet r;
  const auto f = resonance_frequencies(0.0, r);
  EXPECT_DOUBLE_EQ(f.upper, r.zfs);
  EXPECT_DOUBLE_EQ(f.lower, r.zfs);
}

TEST(Resonance, ZeemanShiftIsLinearInField) {
  const RateSet r;
  const double g = 2.0 * M_PI * 28.024;
  auto f = resonance_frequencies(1.0, r);
  EXPECT_NEAR(f.upper, r.zfs + g, 1e-9);
  EXPECT_NEAR(f.lower, r.zfs - g, 1e-9);
  f = resonance_frequencies(2.0, r);
  EXPECT_NEAR(f.upper, r.zfs + 2.0 * M_PI * 56.048, 1e-9);
  EXPECT_NEAR(f.lower, r.zfs - 2.0 * M_PI * 56.048, 1e-9);
  EXPECT_THROW(resonance_frequencies(-1.0, r), Error);
}

TEST(InitialState, ThermalSplitsGroundPopulationEvenly) {
  const auto s = initial_state(InitialKind::thermal, 50);
  EXPECT_EQ(s.n_max(), 50u);
  const StateBlock b = s.block(0);
  EXPECT_DOUBLE_EQ(b.p0, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.p1, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.pm1, 1.0 / 3.0);
  EXPECT_EQ(b.coh01, std::complex<double>{});
  EXPECT_EQ(b.excited(), 0.0);
  EXPECT_EQ(b.ps, 0.0);
  for (std::size_t n = 1; n <= 50; ++n) EXPECT_EQ(s.block_trace(n), 0.0);
}

TEST(InitialState, KetsAndCustomBlocks) {
  EXPECT_EQ(initial_state(InitialKind::ket0, 50).block(0), (StateBlock{.p0 = 1.0}));
  EXPECT_EQ(initial_state(InitialKind::ket1, 50).block(0), (StateBlock{.p1 = 1.0}));
  EXPECT_EQ(initial_state(InitialKind::ketm1, 50).block(0), (StateBlock{.pm1 = 1.0}));
  const StateBlock shelf{.ps = 1.0};
  EXPECT_EQ(initial_state(InitialKind::custom, 50, shelf).block(0).ps, 1.0);
}

TEST(InitialState, RejectsBadInput) {
  EXPECT_THROW(initial_state(InitialKind::thermal, 0), Error);
  try {
    initial_state(InitialKind::custom, 4, StateBlock{.p0 = 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_state);
  }
}

TEST(Derivative, NoRatesNoDriveIsStatic) {
  RateSet r{};
  r.gamma0 = r.gamma_f0 = r.gamma_f1 = r.gamma_s0 = r.gamma_s1 = r.gamma1 = r.gamma2 = 0.0;
  auto s = initial_state(InitialKind::thermal, 3);
  s.set_block(1, {0.1, 0.2, 0.3, {0.05, -0.02}, 0.1, 0.1, 0.1, 0.05});
  const auto d = derivative(s, {1.0, 0.0, 0.0, 0.0}, r);
  for (double v : d.flat()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(d.leakage(), 0.0);
}

TEST(Derivative, SingleRadiativeChannelFeedsNextBlock) {
  RateSet r{};
  r.gamma_f0 = r.gamma_f1 = r.gamma_s0 = r.gamma_s1 = r.gamma1 = r.gamma2 = 0.0;
  auto s = initial_state(InitialKind::custom, 4, StateBlock{.pe0 = 1.0});
  const auto d = derivative(s, {1.0, 0.0, 0.0, 0.0}, r);
  EXPECT_DOUBLE_EQ(d.block(0).pe0, -63.0);
  EXPECT_DOUBLE_EQ(d.block(1).p0, 63.0);
  double others = 0.0;
  for (double v : d.flat()) others += std::abs(v);
  EXPECT_DOUBLE_EQ(others, 126.0);
}

TEST(Derivative, ThermalPumpingRaisesEachExcitedStateEqually) {
  // Hand evaluation: d(pe_i) = Γ_P·p_i − (…)·pe_i = 10·(1/3) with empty excited states.
  const auto s = initial_state(InitialKind::thermal, 4);
  const auto d = derivative(s, {1.0, 10.0, 0.0, 0.0}, RateSet{});
  EXPECT_NEAR(d.block(0).pe0, 10.0 / 3.0, 1e-14);
  EXPECT_NEAR(d.block(0).pe1, 10.0 / 3.0, 1e-14);
  EXPECT_NEAR(d.block(0).pem1, 10.0 / 3.0, 1e-14);
}

TEST(Derivative, TotalTraceIsConservedIncludingLeakage) {
  // Random state, every channel on: Σₙ d trace + d leakage must vanish.
  auto s = initial_state(InitialKind::thermal, 5);
  double x = 0.1;
  for (double& v : s.flat()) {
    x = std::fmod(x * 7.31 + 0.137, 1.0);
    v = x;
  }
  RateSet r;
  r.gamma1 = 0.7;
  r.gamma2 = 1.3;
  const auto d = derivative(s, {1.0, 17.0, 9.0, -4.0}, r);
  EXPECT_NEAR(d.total_trace() + d.leakage(), 0.0, 1e-12);
}

TEST(Derivative, MinusOneDepletionUsesItsOwnPopulation) {
  // Only the pump acts: the -1 population must lose exactly what -e1 gains.
  RateSet r{};
  r.gamma0 = r.gamma_f0 = r.gamma_f1 = r.gamma_s0 = r.gamma_s1 = r.gamma1 = r.gamma2 = 0.0;
  auto s = initial_state(InitialKind::custom, 2, StateBlock{.p1 = 0.25, .pm1 = 0.75});
  const auto d = derivative(s, {1.0, 4.0, 0.0, 0.0}, r);
  EXPECT_DOUBLE_EQ(d.block(0).pm1, -3.0);
  EXPECT_DOUBLE_EQ(d.block(0).pem1, 3.0);
  EXPECT_DOUBLE_EQ(d.block(0).p1, -1.0);
}

TEST(Derivative, SummedSystemKeepsRadiativeDecayInBlock) {
  RateSet r{};
  r.gamma_f0 = r.gamma_f1 = r.gamma_s0 = r.gamma_s1 = r.gamma1 = r.gamma2 = 0.0;
  const StateBlock b{.pe1 = 1.0};
  auto a = b.to_array();
  std::array<double, slot::count> d{};
  summed_derivative(a, d, {1.0, 0.0, 0.0, 0.0}, r);
  EXPECT_DOUBLE_EQ(d[slot::pe1], -63.0);
  EXPECT_DOUBLE_EQ(d[slot::p1], 63.0);
}
