#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nvpes/evolve.hpp"
#include "nvpes/statistics.hpp"

using namespace nvpes;

namespace {

std::vector<double> poisson(double mean, std::size_t n_max) {
  std::vector<double> p(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n)
    p[n] = std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
  return p;
}

// Oracle: every threshold rule "assign |0⟩ above c" for c = -1..n_max.
double brute_force_min_error(const std::vector<double>& p0, const std::vector<double>& p1) {
  double best = 1.0;
  for (long c = -1; c < static_cast<long>(p0.size()); ++c) {
    double e0 = 0.0, e1 = 0.0;
    for (long n = 0; n < static_cast<long>(p0.size()); ++n) (n <= c ? e0 : e1) += (n <= c ? p0[n] : p1[n]);
    best = std::min(best, 0.5 * (e0 + e1));
  }
  return best;
}

// Oracle: closed form for two Poisson laws, minimized on a dense s grid
// and then polished by ternary search.
double poisson_chernoff(double l0, double l1) {
  auto g = [&](double s) { return s * l0 + (1 - s) * l1 - std::pow(l0, s) * std::pow(l1, 1 - s); };
  double a = 0.0, b = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
    if (g(m1) > g(m2)) b = m2; else a = m1;
  }
  return g(0.5 * (a + b));
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

RateSet only_radiative() {
  RateSet r;
  r.gamma_f0 = r.gamma_f1 = r.gamma_s0 = r.gamma_s1 = r.gamma1 = r.gamma2 = 0.0;
  return r;
}

CountingDistribution readout(InitialKind kind, double pump, std::vector<double> grid) {
  const auto traj = evolve(initial_state(kind, 64),
                           DriveSchedule::constant({grid.back(), pump, 0.0, 0.0}), RateSet{}, grid);
  return pes(traj, RateSet{});
}

}  // namespace

TEST(Pes, StartsAsDeltaAtZero) {
  const auto d = readout(InitialKind::thermal, 10.0, {0.0, 0.7});
  EXPECT_EQ(d.pmf(0, 0), 1.0);
  for (std::size_t n = 1; n <= d.n_max(); ++n) EXPECT_EQ(d.pmf(n, 0), 0.0);
}

TEST(Pes, OneJumpDecay) {
  const RateSet r = only_radiative();
  const auto grid = uniform_grid(0.1, 21);
  const auto traj = evolve(initial_state(InitialKind::custom, 4, StateBlock{.pe0 = 1.0}),
                           DriveSchedule::constant({0.1, 0.0, 0.0, 0.0}), r, grid);
  const auto d = pes(traj, r);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(d.pmf(1, i), 1.0 - std::exp(-r.gamma0 * grid[i]), 1e-7);
}

TEST(Pes, ColumnsAreNormalized) {
  const auto d = readout(InitialKind::thermal, 10.0, uniform_grid(3.0, 31));
  for (std::size_t i = 0; i < d.size(); ++i) {
    double sum = 0.0;
    for (double v : d.raw_column(i)) sum += v;
    EXPECT_NEAR(sum + d.leakage(i), 1.0, 1e-8);
  }
}

TEST(Moments, DeltaAndCoinFlip) {
  const auto delta = CountingDistribution::from_pmf({0, 0, 0, 1.0});
  EXPECT_DOUBLE_EQ(moments(delta, 1, 0.0), 3.0);
  EXPECT_DOUBLE_EQ(moments(delta, 2, 0.0), 9.0);
  const auto coin = CountingDistribution::from_pmf({0.5, 0.5});
  EXPECT_DOUBLE_EQ(moments(coin, 1, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(moments(coin, 2, 0.0), 0.5);
}

TEST(Moments, OneJumpDecayEmitsExactlyOnePhoton) {
  const RateSet r = only_radiative();
  const auto traj = evolve(initial_state(InitialKind::custom, 4, StateBlock{.pe0 = 1.0}),
                           DriveSchedule::constant({0.6, 0.0, 0.0, 0.0}), r,
                           std::vector<double>{0.6});
  EXPECT_NEAR(moments(pes(traj, r), 1, 0.6), 1.0, 1e-9);
}

TEST(Moments, OffGridTimeIsAnError) {
  const auto d = CountingDistribution::from_pmf({1.0}, 0.5);
  try {
    moments(d, 1, 0.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::grid);
  }
  EXPECT_THROW(moments(d, 0, 0.5), Error);
}

TEST(Moments, WarnsWhenTailIsTruncated) {
  std::vector<std::string> seen;
  auto old = set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  moments(CountingDistribution::from_pmf({0.9}, 0.0, 0.1), 1, 0.0);
  set_warning_sink(old);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("leakage"), std::string::npos);
}

TEST(Moments, MeanCountNeverDecreases) {
  const auto d = readout(InitialKind::ket1, 20.0, uniform_grid(2.0, 41));
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_GE(mean_at(d, i), mean_at(d, i - 1) - 1e-10);
}

TEST(Intensity, ConstantMeanHasZeroIntensity) {
  const CountingDistribution d({0.0, 0.5, 1.2}, {{0, 1.0}, {0, 1.0}, {0, 1.0}}, {0, 0, 0});
  for (double v : intensity(d).finite_difference) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Intensity, OneJumpDecayIntensity) {
  const RateSet r = only_radiative();
  const auto grid = uniform_grid(0.05, 501);
  const auto traj = evolve(initial_state(InitialKind::custom, 4, StateBlock{.pe0 = 1.0}),
                           DriveSchedule::constant({0.05, 0.0, 0.0, 0.0}), r, grid);
  const auto curve = intensity(pes(traj, r));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double exact = r.gamma0 * std::exp(-r.gamma0 * grid[i]);
    EXPECT_NEAR(curve.flux[i], exact, 1e-6);
    EXPECT_NEAR(curve.finite_difference[i], exact, 2e-3 * r.gamma0);
  }
}

TEST(Intensity, FiniteDifferenceAgreesWithFluxUnderSteadyDrive) {
  std::vector<double> grid;
  for (int k = 0; k <= 200; ++k) grid.push_back(3.0 + 0.005 * k);
  const auto traj = evolve(initial_state(InitialKind::thermal, 256),
                           DriveSchedule::constant({4.0, 20.0, 0.0, 0.0}), RateSet{}, grid);
  const auto curve = intensity(pes(traj, RateSet{}));
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(curve.finite_difference[i] / curve.flux[i], 1.0, 1e-4);
}

TEST(Intensity, NonUniformGridDerivativeIsSecondOrderExact) {
  const std::vector<double> x{0.0, 0.1, 0.35, 0.4, 0.9};
  std::vector<double> f;
  for (double v : x) f.push_back(3.0 * v * v - v + 2.0);
  const auto d = grid_derivative(x, f);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(d[i], 6.0 * x[i] - 1.0, 1e-12);
  EXPECT_THROW(grid_derivative(std::vector<double>{0, 1}, std::vector<double>{0, 1}), Error);
}

TEST(LogLikelihood, IdenticalDistributionsGiveZero) {
  const auto d = CountingDistribution::from_pmf(poisson(3.0, 40));
  for (double l : log_likelihood_ratio(d, d, 0.0))
    if (!std::isnan(l)) EXPECT_EQ(l, 0.0);
}

TEST(LogLikelihood, DisjointDeltasGiveInfinities) {
  const auto a = CountingDistribution::from_pmf({1.0, 0.0});
  const auto b = CountingDistribution::from_pmf({0.0, 1.0});
  const auto l = log_likelihood_ratio(a, b, 0.0);
  EXPECT_EQ(l[0], std::numeric_limits<double>::infinity());
  EXPECT_EQ(l[1], -std::numeric_limits<double>::infinity());
}

TEST(LogLikelihood, UndefinedBinsAndShapeErrors) {
  const auto a = CountingDistribution::from_pmf({1.0, 0.0, 0.0});
  const auto l = log_likelihood_ratio(a, a, 0.0);
  EXPECT_TRUE(std::isnan(l[2]));
  const auto other_time = CountingDistribution::from_pmf({1.0}, 0.3);
  try {
    log_likelihood_ratio(a, other_time, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
}

TEST(LogLikelihood, ReadoutAt700nsIsMonotoneInCounts) {
  // Bright |0⟩: the ratio ln(P₀/P₁) rises with n wherever both are resolved.
  const auto d0 = readout(InitialKind::ket0, 10.0, {0.0, 0.7});
  const auto d1 = readout(InitialKind::ket1, 10.0, {0.0, 0.7});
  const auto l = log_likelihood_ratio(d0, d1, 0.7);
  double prev = -std::numeric_limits<double>::infinity();
  int defined = 0;
  for (double v : l) {
    if (std::isnan(v) || std::isinf(v)) continue;
    EXPECT_GT(v, prev);
    prev = v;
    ++defined;
  }
  EXPECT_GT(defined, 10);
}

TEST(ErrorRates, IndistinguishableAndDisjoint) {
  const auto d = CountingDistribution::from_pmf(poisson(4.0, 40));
  EXPECT_DOUBLE_EQ(error_rates(d, d, 0.0).eps_mean, 0.5);
  const auto bright = CountingDistribution::from_pmf({0, 0, 0, 0, 0, 1.0});
  const auto dark = CountingDistribution::from_pmf({0, 1.0, 0, 0, 0, 0});
  const auto rep = error_rates(bright, dark, 0.0);
  EXPECT_EQ(rep.eps_mean, 0.0);
  EXPECT_EQ(rep.eps_bayes, 0.0);
  EXPECT_EQ(rep.n_crossing, 1);
}

TEST(ErrorRates, PoissonPairMatchesBruteForceThresholdScan) {
  const auto p0 = poisson(5.0, 60), p1 = poisson(2.0, 60);
  const auto rep = error_rates(CountingDistribution::from_pmf(p0), CountingDistribution::from_pmf(p1), 0.0);
  EXPECT_NEAR(rep.eps_mean, brute_force_min_error(p0, p1), 1e-14);
  EXPECT_EQ(rep.n_crossing, 3);  // λ(n) = n ln 2.5 − 3 changes sign between 3 and 4
  EXPECT_NEAR(rep.eps_bayes, rep.eps_mean, 1e-14);
}

TEST(ErrorRates, BayesBoundNeverExceedsThresholdRule) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(8), b(8);
    double sa = 0, sb = 0;
    for (std::size_t n = 0; n < 8; ++n) {
      sa += a[n] = u(rng);
      sb += b[n] = u(rng);
    }
    for (std::size_t n = 0; n < 8; ++n) {
      a[n] /= sa;
      b[n] /= sb;
    }
    const auto rep = error_rates(CountingDistribution::from_pmf(a), CountingDistribution::from_pmf(b), 0.0);
    EXPECT_LE(rep.eps_bayes, rep.eps_mean + 1e-15);
    EXPECT_GE(rep.eps0, 0.0);
    EXPECT_LE(rep.eps1, 1.0);
  }
}

TEST(Chernoff, IdenticalAndDisjoint) {
  const auto d = CountingDistribution::from_pmf(poisson(2.5, 40));
  EXPECT_NEAR(chernoff(d, d, 0.0).information, 0.0, 1e-14);
  const auto a = CountingDistribution::from_pmf({1.0, 0.0});
  const auto b = CountingDistribution::from_pmf({0.0, 1.0});
  EXPECT_TRUE(std::isinf(chernoff(a, b, 0.0).information));
}

TEST(Chernoff, PoissonClosedForm) {
  const auto p0 = poisson(4.0, 80), p1 = poisson(1.0, 80);
  const auto c = chernoff(p0, p1);
  EXPECT_NEAR(c.information, poisson_chernoff(4.0, 1.0), 1e-6);
  EXPECT_GT(c.s_star, 0.0);
  EXPECT_LT(c.s_star, 1.0);
}

TEST(Chernoff, SymmetricUnderSwap) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(0.5, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = poisson(mean(rng), 60), b = poisson(mean(rng), 60);
    const auto ab = chernoff(a, b), ba = chernoff(b, a);
    EXPECT_NEAR(ab.information, ba.information, 1e-10);
    EXPECT_NEAR(ab.s_star, 1.0 - ba.s_star, 1e-5);
  }
}

TEST(Chernoff, CumulativeErrorDecaysAtChernoffRate) {
  // Oracle: the optimal N-shot test for two Poisson laws thresholds the total
  // count, itself Poisson(N·λ). e_N = ½ Σ min(P₀⁽ᴺ⁾, P₁⁽ᴺ⁾) by convolution.
  const auto p0 = poisson(3.0, 30), p1 = poisson(1.0, 30);
  const double c = chernoff(p0, p1).information;
  std::vector<double> a = p0, b = p1;
  std::vector<double> log_e;
  for (int n = 1; n <= 64; ++n) {
    if (n > 1) {
      a = convolve(a, p0);
      b = convolve(b, p1);
    }
    double e = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) e += std::min(a[k], b[k]);
    log_e.push_back(std::log(0.5 * e));
  }
  const double slope = (log_e[63] - log_e[31]) / 32.0;
  EXPECT_NEAR(slope, -c, 0.1 * c);
}

TEST(SampleCounts, DeltaAndDeterminism) {
  const auto delta = CountingDistribution::from_pmf({0, 0, 1.0});
  for (auto n : sample_counts(delta, 0.0, 100, 99)) EXPECT_EQ(n, 2u);
  const auto d = CountingDistribution::from_pmf(poisson(4.0, 40));
  EXPECT_EQ(sample_counts(d, 0.0, 500, 1234), sample_counts(d, 0.0, 500, 1234));
  EXPECT_NE(sample_counts(d, 0.0, 500, 1234), sample_counts(d, 0.0, 500, 1235));
}

TEST(SampleCounts, CoinFlipMeanWithinThreeSigma) {
  const std::size_t shots = 100000;
  const auto s = sample_counts(CountingDistribution::from_pmf({0.5, 0.5}), 0.0, shots, 42);
  double mean = 0.0;
  for (auto n : s) mean += n;
  mean /= shots;
  EXPECT_LT(std::abs(mean - 0.5), 3.0 * 0.5 / std::sqrt(static_cast<double>(shots)));
}

TEST(SampleCounts, RefusesTruncatedDistributions) {
  try {
    sample_counts(CountingDistribution::from_pmf({0.99}, 0.0, 0.01), 0.0, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::truncated_distribution);
  }
  EXPECT_THROW(sample_counts(CountingDistribution::from_pmf({1.0}), 0.0, 0, 1), Error);
}
