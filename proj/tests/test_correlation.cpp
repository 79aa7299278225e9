#include <gtest/gtest.h>

#include <cmath>

#include "nvpes/correlation.hpp"

using namespace nvpes;

namespace {

RateSet only_radiative() {
  RateSet r;
  r.gamma_f0 = r.gamma_f1 = r.gamma_s0 = r.gamma_s1 = r.gamma1 = r.gamma2 = 0.0;
  return r;
}

std::vector<double> poisson(double mean, std::size_t n_max) {
  std::vector<double> p(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n)
    p[n] = std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
  return p;
}

CountingDistribution thermal_readout(double pump, double horizon, std::size_t points) {
  const auto grid = uniform_grid(horizon, points);
  const auto traj = evolve(initial_state(InitialKind::thermal, default_cutoff(RateSet{}, horizon)),
                           DriveSchedule::constant({horizon, pump, 0.0, 0.0}), RateSet{}, grid);
  return pes(traj, RateSet{});
}

}  // namespace

TEST(DelayDensity, UndrivenGroundStateNeverEmits) {
  const auto dd = delay_density(RateSet{}, {1.0, 0.0, 0.0, 0.0}, StateBlock{.p0 = 1.0}, 1.0, 0.01);
  for (double v : dd.d1) EXPECT_EQ(v, 0.0);
}

TEST(DelayDensity, StartsAtZeroFromGroundManifold) {
  const auto dd = delay_density(RateSet{}, {1.0, 20.0, 0.0, 0.0}, StateBlock{.p0 = 0.5, .p1 = 0.5}, 1.0, 0.01);
  EXPECT_EQ(dd.d1[0], 0.0);
  EXPECT_GT(dd.d1[10], 0.0);
}

TEST(DelayDensity, ExcitedResetOverrideGivesExponential) {
  const RateSet r = only_radiative();
  const auto taus = uniform_taus(0.1, 0.001);
  const auto d1 = first_emission_density(r, {1.0, 0.0, 0.0, 0.0}, StateBlock{.pe0 = 1.0}, taus);
  for (std::size_t i = 0; i < taus.size(); ++i)
    EXPECT_NEAR(d1[i], r.gamma0 * std::exp(-r.gamma0 * taus[i]), 1e-7 * r.gamma0);
}

TEST(DelayDensity, RejectsExcitedOrUnnormalizedReset) {
  try {
    delay_density(RateSet{}, {1.0, 1.0, 0.0, 0.0}, StateBlock{.p0 = 0.5, .pe0 = 0.5}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_reset);
  }
  EXPECT_THROW(delay_density(RateSet{}, {1.0, 1.0, 0.0, 0.0}, StateBlock{.p0 = 0.5}, 1.0), Error);
}

TEST(Renewal, ExponentialWaitingTimesGiveFlatDensity) {
  const double k = 63.0;
  const auto taus = uniform_taus(0.5, 1e-4);
  std::vector<double> d1;
  for (double t : taus) d1.push_back(k * std::exp(-k * t));
  const auto d = renewal_solve(taus, d1);
  for (double v : d) EXPECT_NEAR(v / k, 1.0, 1e-3);
}

TEST(Renewal, ZeroKernelGivesZero) {
  const auto taus = uniform_taus(1.0, 0.01);
  const std::vector<double> d1(taus.size(), 0.0);
  for (double v : renewal_solve(taus, d1)) EXPECT_EQ(v, 0.0);
}

TEST(Renewal, SecondOrderConvergence) {
  // Oracle: Erlang-2 waiting times d1 = k²τe^{−kτ} have renewal density
  // D(τ) = (k/2)(1 − e^{−2kτ}) in closed form.
  const double k = 20.0, horizon = 0.5;
  auto max_error = [&](double h) {
    const auto taus = uniform_taus(horizon, h);
    std::vector<double> d1;
    for (double t : taus) d1.push_back(k * k * t * std::exp(-k * t));
    const auto d = renewal_solve(taus, d1);
    double worst = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i)
      worst = std::max(worst, std::abs(d[i] - 0.5 * k * (1 - std::exp(-2 * k * taus[i]))));
    return worst;
  };
  const double e1 = max_error(0.004), e2 = max_error(0.002), e3 = max_error(0.001);
  EXPECT_GE(e1 / e2, 3.5);
  EXPECT_GE(e2 / e3, 3.5);
}

TEST(Renewal, RejectsNonUniformGrid) {
  const std::vector<double> taus{0.0, 0.1, 0.25};
  const std::vector<double> d1{0.0, 1.0, 1.0};
  try {
    renewal_solve(taus, d1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::grid);
  }
}

TEST(G2, AntibunchedAtZeroAndNormalizedAtHorizon) {
  for (double pump : {5.0, 15.0, 20.0}) {
    const auto c = g2(RateSet{}, {1.0, pump, 0.0, 0.0}, 5.0);
    EXPECT_LT(c.g2.front(), 1e-6);
    EXPECT_NEAR(c.g2.back(), 1.0, 0.02);
    for (std::size_t i = 0; i < c.d.size(); ++i) EXPECT_GE(c.d[i], c.d1[i] - 1e-12);
  }
}

TEST(G2, DipNarrowsAndBunchingGrowsWithPower) {
  double prev_width = 1e9, prev_peak = 0.0;
  for (double pump : {5.0, 15.0, 20.0}) {
    const auto c = g2(RateSet{}, {1.0, pump, 0.0, 0.0}, 5.0);
    const double width = rise_time(c);
    const double peak = *std::max_element(c.g2.begin(), c.g2.end());
    EXPECT_LT(width, prev_width) << pump;
    EXPECT_GT(peak, prev_peak) << pump;
    EXPECT_GT(peak, 1.0);
    prev_width = width;
    prev_peak = peak;
  }
}

TEST(G2, ShortHorizonIsRejected) {
  try {
    g2(RateSet{}, {1.0, 5.0, 0.0, 0.0}, 0.05, 0.001);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::horizon);
  }
  EXPECT_THROW(g2(RateSet{}, {1.0, 0.0, 0.0, 0.0}, 1.0), Error);
}

TEST(Mandel, PoissonAndNumberStates) {
  const auto pois = mandel_q(CountingDistribution::from_pmf(poisson(6.0, 80), 1.0));
  EXPECT_NEAR(pois.q[0], 0.0, 1e-10);
  const auto fock = mandel_q(CountingDistribution::from_pmf({0, 0, 0, 0, 1.0}, 1.0));
  EXPECT_NEAR(fock.q[0], -1.0, 1e-14);
  EXPECT_THROW(mandel_q(CountingDistribution::from_pmf({1.0}, 0.0)), Error);
}

TEST(Mandel, InvariantUnderEmptyHighBins) {
  auto p = poisson(2.0, 30);
  const double a = mandel_q(CountingDistribution::from_pmf(p)).q[0];
  p.resize(200, 0.0);
  EXPECT_DOUBLE_EQ(mandel_q(CountingDistribution::from_pmf(p)).q[0], a);
}

TEST(Mandel, ThermalStartAntibunchesThenBunches) {
  const auto c = mandel_q(thermal_readout(10.0, 6.0, 241));
  EXPECT_TRUE(std::isnan(c.q[0]));
  EXPECT_LT(c.q_min, 0.0);
  EXPECT_GT(c.t_zero, c.t_min);
  EXPECT_GT(c.q.back(), 0.0);
  for (double q : c.q)
    if (!std::isnan(q)) EXPECT_GE(q, -1.0);
}

TEST(Mandel, CharacteristicTimesShrinkWithPower) {
  double prev_tmin = 1e9, prev_t0 = 1e9, prev_depth = 0.0;
  for (double pump : {5.0, 10.0, 20.0}) {
    const auto c = mandel_q(thermal_readout(pump, 6.0, 601));
    EXPECT_LT(c.t_min, prev_tmin) << pump;
    EXPECT_LT(c.t_zero, prev_t0) << pump;
    EXPECT_GT(-c.q_min, prev_depth) << pump;
    prev_tmin = c.t_min;
    prev_t0 = c.t_zero;
    prev_depth = -c.q_min;
  }
}
